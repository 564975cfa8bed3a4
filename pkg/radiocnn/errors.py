"""Base exception shared by every radiocnn subpackage."""


class RadiocnnError(Exception):
    """Base exception class for radiocnn-specific errors."""

    pass
