"""
Image Codec

Decodes PNG and binary PGM files (and JPEG when enabled) into float arrays of shape
(h, w, c) holding 0..255 values, and encodes 8-bit grayscale arrays back to PNG or PGM.

Key features:
- PNG: 8-bit grayscale (colour type 0) and 8-bit RGB (colour type 2).
- PGM: binary P5 with maxval 255.
- JPEG: only when `allow_jpeg` is set (`RADIOCNN_ENABLE_JPEG`).
- Grayscale is replicated to 3 channels; RGB is luma-converted with
  0.299 R + 0.587 G + 0.114 B when 1 channel is requested.

@dependencies
- `Pillow` for container parsing and writing.
- `numpy` for the pixel arrays.
"""

import io
import logging
from pathlib import Path

import numpy as np
import numpy.typing as npt
from PIL import Image, UnidentifiedImageError

from radiocnn.errors import RadiocnnError

logger = logging.getLogger(__name__)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114], dtype=np.float64)


class DecodeError(RadiocnnError):
    """Raised for unsupported or corrupt image containers."""

    pass


def _diagnose(data: bytes) -> str:
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return "PNG"
    if data[:2] in (b"P5", b"P2"):
        return f"PGM ({data[:2].decode()})"
    if data[:2] in (b"P6", b"P3"):
        return f"PPM ({data[:2].decode()})"
    if data[:3] == b"\xff\xd8\xff":
        return "JPEG"
    return "unknown container"


def decode_image(
    data: bytes, channels: int = 3, allow_jpeg: bool = False, source: str = "<bytes>"
) -> npt.NDArray[np.float32]:
    """
    Decodes an image container into a float32 (h, w, channels) array of 0..255 values.

    Raises:
        DecodeError: If the container is unsupported, not 8-bit, or corrupt.
    """
    if channels not in (1, 3):
        raise DecodeError(f"{source}: channels must be 1 or 3, got {channels}.")
    kind = _diagnose(data)
    if kind == "JPEG" and not allow_jpeg:
        raise DecodeError(f"{source}: JPEG input is disabled (set RADIOCNN_ENABLE_JPEG=1).")
    if kind not in ("PNG", "PGM (P5)", "JPEG"):
        raise DecodeError(f"{source}: unsupported container ({kind}); expected PNG or binary PGM.")

    try:
        with Image.open(io.BytesIO(data)) as image:
            image.load()
            mode = image.mode
            if kind == "PNG" and mode not in ("L", "RGB"):
                raise DecodeError(
                    f"{source}: PNG mode {mode} is not supported; expected 8-bit gray or RGB."
                )
            if kind == "PGM (P5)" and mode != "L":
                raise DecodeError(f"{source}: PGM must have maxval 255, got mode {mode}.")
            if kind == "JPEG" and mode not in ("L", "RGB"):
                image = image.convert("RGB")
            pixels = np.asarray(image, dtype=np.float64)
    except DecodeError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise DecodeError(f"{source}: corrupt {kind} data ({e}).") from e

    return match_channels(pixels, channels)


def match_channels(pixels: npt.NDArray[np.floating], channels: int) -> npt.NDArray[np.float32]:
    """Replicates gray to 3 channels, or luma-converts RGB to 1 channel."""
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim == 2:
        pixels = pixels[:, :, None]
    if pixels.ndim != 3 or pixels.shape[2] not in (1, 3):
        raise DecodeError(f"Expected a gray or RGB image, got shape {pixels.shape}.")
    if channels == 3 and pixels.shape[2] == 1:
        pixels = np.repeat(pixels, 3, axis=2)
    elif channels == 1 and pixels.shape[2] == 3:
        pixels = (pixels @ LUMA_WEIGHTS)[:, :, None]
    return pixels.astype(np.float32)


def read_image(path: Path | str, channels: int = 3, allow_jpeg: bool = False) -> npt.NDArray[np.float32]:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise DecodeError(f"{path}: cannot read file ({e}).") from e
    return decode_image(data, channels, allow_jpeg, source=str(path))


def _to_image(pixels: npt.NDArray[np.integer]) -> Image.Image:
    array = np.asarray(pixels)
    if array.ndim == 3 and array.shape[2] == 1:
        array = array[:, :, 0]
    if array.dtype != np.uint8:
        raise ValueError(f"Only 8-bit images can be encoded, got {array.dtype}.")
    return Image.fromarray(array)


def encode_png(pixels: npt.NDArray[np.integer]) -> bytes:
    """8-bit grayscale (h, w) or RGB (h, w, 3) array to PNG bytes."""
    buffer = io.BytesIO()
    _to_image(pixels).save(buffer, format="PNG")
    return buffer.getvalue()


def encode_pgm(pixels: npt.NDArray[np.integer]) -> bytes:
    """8-bit grayscale (h, w) array to binary P5 PGM bytes."""
    image = _to_image(pixels)
    if image.mode != "L":
        raise ValueError("PGM encoding needs a single-channel image.")
    buffer = io.BytesIO()
    image.save(buffer, format="PPM")
    return buffer.getvalue()
