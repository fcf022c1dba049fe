"""Pixel containers, 8-bit conversion, box downsampling, and PPM I/O.

All floating-point images are linear radiance in [0, 1]; no transfer
curve is applied anywhere in the pipeline. The only raster file format
is binary PPM (P6, maxval 255), which round-trips bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class ImagingError(Exception):
    """Base class for raster-layer failures."""


class NonDivisibleDimensions(ImagingError):
    """Requested output size does not evenly divide the input size."""


class MalformedHeader(ImagingError):
    """PPM input does not start with a parseable P6 header."""


class UnsupportedMaxval(ImagingError):
    """PPM maxval is not 255."""


class TruncatedData(ImagingError):
    """PPM pixel payload is shorter than width*height*3 bytes."""


@dataclass(frozen=True)
class Image:
    """H x W x 3 linear-radiance raster; every sample finite in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) data, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be positive")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image samples must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image samples must lie in [0, 1]")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class Image8:
    """H x W x 3 byte raster, the camera output / wire format carrier."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) data, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError("image dimensions must be positive")
        if arr.dtype != np.uint8:
            if np.any(arr < 0) or np.any(arr > 255):
                raise ValueError("byte samples must lie in 0..255")
            arr = arr.astype(np.uint8)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def quantize(img: Image) -> Image8:
    """Linear [0,1] samples to bytes, rounding half away from zero.

    round(x*255) with ties away from zero is floor(x*255 + 0.5) for the
    non-negative samples an Image guarantees.
    """
    return Image8(np.floor(img.data * 255.0 + 0.5).astype(np.uint8))


def dequantize(img8: Image8) -> Image:
    """Bytes back to linear samples; exact inverse of quantize on bytes."""
    return Image(img8.data.astype(np.float64) / 255.0)


def downsample_box(img: Image, out_h: int, out_w: int) -> Image:
    """Downsample by averaging equal blocks, per channel.

    Raises NonDivisibleDimensions unless out_h | height and out_w | width.
    """
    h, w = img.height, img.width
    if out_h < 1 or out_w < 1 or h % out_h != 0 or w % out_w != 0:
        raise NonDivisibleDimensions(
            f"cannot box-downsample {h}x{w} to {out_h}x{out_w}"
        )
    fh, fw = h // out_h, w // out_w
    blocks = img.data.reshape(out_h, fh, out_w, fw, 3)
    return Image(blocks.mean(axis=(1, 3)))


def write_ppm(img8: Image8) -> bytes:
    """Serialize to binary PPM: b"P6\\n<w> <h>\\n255\\n" + raw bytes."""
    header = f"P6\n{img8.width} {img8.height}\n255\n".encode("ascii")
    return header + img8.data.tobytes()


def _read_token(buf: bytes, pos: int) -> tuple[bytes, int]:
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(buf)
    while pos < n:
        c = buf[pos : pos + 1]
        if c == b"#":
            while pos < n and buf[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < n and not buf[pos : pos + 1].isspace() and buf[pos : pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise MalformedHeader("unexpected end of PPM header")
    return buf[start:pos], pos


def read_ppm(data: bytes) -> Image8:
    """Parse binary PPM (P6, maxval 255) bytes into an Image8."""
    if data[:2] != b"P6" or not (data[2:3].isspace() or data[2:3] == b"#"):
        raise MalformedHeader(f"not a binary PPM (magic {data[:3]!r})")
    pos = 2
    try:
        width_tok, pos = _read_token(data, pos)
        height_tok, pos = _read_token(data, pos)
        maxval_tok, pos = _read_token(data, pos)
        width, height, maxval = int(width_tok), int(height_tok), int(maxval_tok)
    except ValueError as exc:
        raise MalformedHeader(f"bad PPM header field: {exc}") from exc
    if width < 1 or height < 1:
        raise MalformedHeader(f"bad PPM dimensions {width}x{height}")
    if maxval != 255:
        raise UnsupportedMaxval(f"maxval {maxval} (only 255 is supported)")
    pos += 1  # exactly one whitespace byte after maxval
    expected = width * height * 3
    payload = data[pos : pos + expected]
    if len(payload) < expected:
        raise TruncatedData(
            f"need {expected} pixel bytes, found {len(payload)}"
        )
    arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3)
    return Image8(arr)


def read_ppm_file(path) -> Image8:
    with open(path, "rb") as fh:
        return read_ppm(fh.read())


def write_ppm_file(path, img8: Image8) -> None:
    with open(path, "wb") as fh:
        fh.write(write_ppm(img8))
