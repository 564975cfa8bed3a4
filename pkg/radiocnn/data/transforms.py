"""
Image Transforms

Resizing, rescaling and training-time augmentation of (h, w, c) float images.

Key features:
- `resize_bilinear`: half-pixel centres, src = (dst + 0.5) * scale - 0.5, clamped to the
  border.
- `rescale`: 0..255 -> [0, 1].
- `augment_sample`: horizontal flip (p = 0.5), then rotation by theta ~ U[-18, 18]
  degrees about the centre, then zoom with s ~ U[0.9, 1.1]. Rotation and zoom use
  inverse mapping with bilinear sampling; reads outside the image are 0.

@dependencies
- `scipy.ndimage.map_coordinates` (order 1) as the bilinear sampler.
- `radiocnn.core.rng_uniform` for the augmentation draws.

@notes
- Draw order per sample is fixed (flip, angle, scale), so a stream keyed on
  (seed, epoch, sample index) reproduces the same augmentation anywhere.
"""

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt
from scipy import ndimage

from radiocnn import settings
from radiocnn.core import RngStream, rng_uniform

FloatImage = npt.NDArray[np.floating]


@dataclass(frozen=True)
class AugmentParams:
    flip: bool = False
    angle_deg: float = 0.0
    scale: float = 1.0

    @property
    def is_identity(self) -> bool:
        return not self.flip and self.angle_deg == 0.0 and self.scale == 1.0


def _require_image(x: FloatImage) -> None:
    if x.ndim != 3 or min(x.shape) < 1:
        raise ValueError(f"Expected an (h, w, c) image, got shape {x.shape}.")


def _sample(x: FloatImage, rows: np.ndarray, cols: np.ndarray, mode: str) -> FloatImage:
    """Bilinear reads of every channel at (rows, cols), which share the output grid shape."""
    out = np.empty((*rows.shape, x.shape[2]), dtype=np.float64)
    source = x.astype(np.float64, copy=False)
    for channel in range(x.shape[2]):
        out[..., channel] = ndimage.map_coordinates(
            source[..., channel], (rows, cols), order=1, mode=mode, cval=0.0, prefilter=False
        )
    return out


def resize_bilinear(x: FloatImage, out_h: int, out_w: int) -> npt.NDArray[np.float32]:
    _require_image(x)
    if out_h < 1 or out_w < 1:
        raise ValueError(f"Output size must be positive, got {out_h}x{out_w}.")
    h, w, _ = x.shape
    if (h, w) == (out_h, out_w):
        return x.astype(np.float32, copy=True)
    src_r = np.clip((np.arange(out_h) + 0.5) * (h / out_h) - 0.5, 0.0, h - 1)
    src_c = np.clip((np.arange(out_w) + 0.5) * (w / out_w) - 0.5, 0.0, w - 1)
    rows, cols = np.meshgrid(src_r, src_c, indexing="ij")
    resized = _sample(x, rows, cols, mode="nearest")
    # the interpolant is a convex combination, so rounding is the only way out of range
    return np.clip(resized, x.min(), x.max()).astype(np.float32)


def rescale(x: FloatImage) -> npt.NDArray[np.float32]:
    return (np.asarray(x, dtype=np.float32) / np.float32(settings.PIXEL_MAX)).astype(np.float32)


def flip_horizontal(x: FloatImage) -> FloatImage:
    return x[:, ::-1, :].copy()


def _centre_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray, float, float]:
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    return rows - cy, cols - cx, cy, cx


def rotate(x: FloatImage, angle_deg: float) -> FloatImage:
    """Rotates counter-clockwise by `angle_deg` about the image centre, zero-filling."""
    _require_image(x)
    if angle_deg == 0.0:
        return x.copy()
    h, w, _ = x.shape
    dr, dc, cy, cx = _centre_grid(h, w)
    theta = np.deg2rad(angle_deg)
    cos, sin = np.cos(theta), np.sin(theta)
    # inverse map: each output pixel reads from the source position rotated back by theta
    src_r = cy + cos * dr + sin * dc
    src_c = cx - sin * dr + cos * dc
    return _sample(x, src_r, src_c, mode="constant")


def zoom(x: FloatImage, scale: float) -> FloatImage:
    """Resamples with source = centre + (dst - centre) * scale; scale > 1 zooms out."""
    _require_image(x)
    if scale <= 0:
        raise ValueError(f"Zoom scale must be positive, got {scale}.")
    if scale == 1.0:
        return x.copy()
    h, w, _ = x.shape
    dr, dc, cy, cx = _centre_grid(h, w)
    return _sample(x, cy + dr * scale, cx + dc * scale, mode="constant")


def draw_augmentation(
    stream: RngStream,
    rotation_limit_deg: float = settings.ROTATION_LIMIT_DEG,
    zoom_limit: float = settings.ZOOM_LIMIT,
    flip_probability: float = settings.FLIP_PROBABILITY,
) -> AugmentParams:
    """Draws (flip, angle, scale) from three consecutive uniforms in that order."""
    u = rng_uniform(stream, 0.0, 1.0, 3, dtype=np.float64)
    angle = -rotation_limit_deg + 2.0 * rotation_limit_deg * float(u[1])
    scale = 1.0 - zoom_limit + 2.0 * zoom_limit * float(u[2])
    return AugmentParams(flip=bool(u[0] < flip_probability), angle_deg=angle, scale=scale)


def apply_augmentation(x: FloatImage, params: AugmentParams) -> FloatImage:
    y = flip_horizontal(x) if params.flip else x
    y = rotate(y, params.angle_deg)
    return zoom(y, params.scale)


def augment_sample(
    x: FloatImage,
    stream: RngStream,
    rotation_limit_deg: float = settings.ROTATION_LIMIT_DEG,
    zoom_limit: float = settings.ZOOM_LIMIT,
    flip_probability: float = settings.FLIP_PROBABILITY,
) -> npt.NDArray[np.float32]:
    """Flip, rotate and zoom one image; the output keeps the input's shape and range."""
    params = draw_augmentation(stream, rotation_limit_deg, zoom_limit, flip_probability)
    out = apply_augmentation(x, params)
    return np.clip(out, min(0.0, float(x.min())), float(x.max())).astype(np.float32)
