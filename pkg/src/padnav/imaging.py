"""8-bit grayscale rasters, PGM I/O, and preprocessing.

Images are numpy arrays of dtype uint8 with shape (height, width), row-major.
Binary images use the same container restricted to the values {0, 255}.
Arrays are treated as immutable values: every operation returns a new array.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRAY_MAXVAL = 255


class PgmDecodeError(ValueError):
    """A PGM byte stream could not be decoded; carries the failing byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Roi:
    """Rectangular region of interest in pixel coordinates (x0, y0 top-left)."""

    x0: int
    y0: int
    w: int
    h: int

    def clamped(self, width: int, height: int) -> "Roi | None":
        """Intersect with a width x height frame; None if nothing remains."""
        x0 = max(0, self.x0)
        y0 = max(0, self.y0)
        x1 = min(width, self.x0 + self.w)
        y1 = min(height, self.y0 + self.h)
        if x1 - x0 < 1 or y1 - y0 < 1:
            return None
        return Roi(x0, y0, x1 - x0, y1 - y0)


def _require_gray(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("expected a 2-D uint8 image")
    return img


_WHITESPACE = b" \t\r\n\x0b\x0c"


def _skip_separators(data: bytes, pos: int) -> int:
    while pos < len(data):
        c = data[pos]
        if c in _WHITESPACE:
            pos += 1
        elif c == ord("#"):
            while pos < len(data) and data[pos] not in b"\r\n":
                pos += 1
        else:
            break
    return pos


def _read_int(data: bytes, pos: int, what: str) -> tuple[int, int, int]:
    """Read one ASCII integer token; returns (value, token offset, next pos)."""
    pos = _skip_separators(data, pos)
    start = pos
    while pos < len(data) and data[pos] not in _WHITESPACE and data[pos] != ord("#"):
        pos += 1
    if pos == start:
        raise PgmDecodeError(f"unexpected end of data while reading {what}", start)
    token = data[start:pos]
    try:
        value = int(token)
    except ValueError:
        raise PgmDecodeError(f"non-numeric {what} {token!r}", start) from None
    return value, start, pos


def load_pgm(data: bytes) -> np.ndarray:
    """Decode a binary (P5) or ASCII (P2) portable graymap with maxval 255.

    Comment lines starting with '#' are tolerated between header tokens.
    Raises PgmDecodeError (with the byte offset) on malformed headers,
    truncated payloads, or unsupported maxval.
    """
    if len(data) < 2:
        raise PgmDecodeError("missing PGM magic number", 0)
    magic = bytes(data[:2])
    if magic not in (b"P5", b"P2"):
        raise PgmDecodeError(f"unsupported magic {magic!r}", 0)
    pos = 2
    width, off, pos = _read_int(data, pos, "width")
    if width < 1:
        raise PgmDecodeError(f"invalid width {width}", off)
    height, off, pos = _read_int(data, pos, "height")
    if height < 1:
        raise PgmDecodeError(f"invalid height {height}", off)
    maxval, off, pos = _read_int(data, pos, "maxval")
    if maxval != GRAY_MAXVAL:
        raise PgmDecodeError(f"unsupported maxval {maxval} (must be 255)", off)

    count = width * height
    if magic == b"P5":
        if pos >= len(data) or data[pos] not in _WHITESPACE:
            raise PgmDecodeError("missing whitespace after maxval", pos)
        pos += 1
        if len(data) - pos < count:
            raise PgmDecodeError(
                f"truncated pixel payload: need {count} bytes, have {len(data) - pos}",
                len(data),
            )
        flat = np.frombuffer(data, dtype=np.uint8, count=count, offset=pos)
        return flat.reshape(height, width).copy()

    values = np.empty(count, dtype=np.uint8)
    for i in range(count):
        try:
            value, off, pos = _read_int(data, pos, f"pixel {i}")
        except PgmDecodeError as err:
            raise PgmDecodeError(
                f"truncated pixel payload: need {count} values, have {i}", err.offset
            ) from None
        if not 0 <= value <= GRAY_MAXVAL:
            raise PgmDecodeError(f"pixel value {value} out of range", off)
        values[i] = value
    return values.reshape(height, width)


def save_pgm(img: np.ndarray) -> bytes:
    """Encode an image as a binary P5 stream; load_pgm inverts it exactly."""
    img = _require_gray(img)
    h, w = img.shape
    header = f"P5\n{w} {h}\n{GRAY_MAXVAL}\n".encode("ascii")
    return header + img.tobytes()


def resize(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample to (out_h, out_w).

    Pixel-center mapping makes same-size resizing the exact identity; source
    coordinates outside the image clamp to the nearest edge pixel.
    """
    img = _require_gray(img)
    if out_w < 1 or out_h < 1:
        raise ValueError("target dimensions must be >= 1")
    h, w = img.shape
    sx = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    sy = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    x0f = np.floor(sx)
    y0f = np.floor(sy)
    fx = sx - x0f
    fy = sy - y0f
    x0 = np.clip(x0f.astype(np.int64), 0, w - 1)
    x1 = np.clip(x0f.astype(np.int64) + 1, 0, w - 1)
    y0 = np.clip(y0f.astype(np.int64), 0, h - 1)
    y1 = np.clip(y0f.astype(np.int64) + 1, 0, h - 1)

    src = img.astype(np.float64)
    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    out = top * (1.0 - fy)[:, None] + bot * fy[:, None]
    return np.rint(out).clip(0, GRAY_MAXVAL).astype(np.uint8)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def gaussian_blur(img: np.ndarray, sigma: float = 1.0) -> np.ndarray:
    """Separable Gaussian smoothing with edge replication at the borders."""
    img = _require_gray(img)
    kernel = gaussian_kernel(sigma)
    radius = len(kernel) // 2
    h, w = img.shape
    padded = np.pad(img.astype(np.float64), radius, mode="edge")
    tmp = np.zeros((h + 2 * radius, w), dtype=np.float64)
    for k, weight in enumerate(kernel):
        tmp += weight * padded[:, k:k + w]
    out = np.zeros((h, w), dtype=np.float64)
    for k, weight in enumerate(kernel):
        out += weight * tmp[k:k + h, :]
    return np.rint(out).clip(0, GRAY_MAXVAL).astype(np.uint8)
