"""PGM (P2/P5) image I/O and the image <-> field correspondence.

Intensities live in [0, 1]; files quantize to an integer maxval of at
most 65535 (two-byte big-endian samples above 255, per the format).
Quantization rounds half up, so a roundtrip through save/load moves any
intensity by at most 1/(2 maxval).  Parse errors report the byte offset
at which the stream stopped making sense.

A width x height image maps bijectively onto the interior nodes of a
grid with hx = hy = 1/(max(width, height) + 1), so the rectangle sits
inside the unit square.  Pixel (row, col) is node (i=col, j=row); the
zero boundary ring is implicit.

Writes are atomic: a temporary file in the target directory is renamed
over the destination, so readers never observe a partial file.
"""

from __future__ import annotations

import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import PgmError
from .grid import GridSpec, ScalarField

__all__ = [
    "ImageBuffer",
    "load_pgm",
    "save_pgm",
    "field_from_image",
    "image_from_field",
    "orientation_image",
    "atomic_write_bytes",
    "atomic_write_text",
]

MAX_MAXVAL = 65535
_WHITESPACE = b" \t\n\r\x0b\x0c"


@dataclass(frozen=True, eq=False)
class ImageBuffer:
    """Row-major intensities in [0, 1]; intensities[row, col], shape (h, w)."""

    width: int
    height: int
    intensities: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.intensities, dtype=np.float64)
        if v.shape != (self.height, self.width):
            raise ValueError(
                "intensities have shape %s, expected (%d, %d)"
                % (v.shape, self.height, self.width)
            )
        if not np.isfinite(v).all():
            raise ValueError("intensities must be finite")
        if v.size and (v.min() < 0.0 or v.max() > 1.0):
            raise ValueError("intensities must lie in [0, 1]")
        if v.base is not None or v.flags.writeable:
            v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "intensities", v)

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError("image array must be two dimensional")
        return cls(width=arr.shape[1], height=arr.shape[0], intensities=arr)


class _Scanner:
    """Tokenizer over PGM header/ASCII raster bytes, tracking the offset."""

    def __init__(self, data, pos):
        self.data = data
        self.pos = pos

    def skip_separators(self):
        data = self.data
        n = len(data)
        while self.pos < n:
            c = data[self.pos]
            if c in _WHITESPACE:
                self.pos += 1
            elif c == 0x23:  # '#' comment runs to end of line
                while self.pos < n and data[self.pos] not in b"\r\n":
                    self.pos += 1
            else:
                return

    def next_int(self, what, limit):
        self.skip_separators()
        if self.pos >= len(self.data):
            raise PgmError("unexpected end of file reading %s" % what, self.pos)
        start = self.pos
        data = self.data
        while self.pos < len(data) and data[self.pos] not in _WHITESPACE and data[self.pos] != 0x23:
            self.pos += 1
        token = data[start : self.pos]
        if not token.isdigit():
            raise PgmError("expected an integer for %s, got %r" % (what, token), start)
        value = int(token)
        if value > limit:
            raise PgmError("%s value %d exceeds %d" % (what, value, limit), start)
        return value

    def expect_end(self):
        self.skip_separators()
        if self.pos < len(self.data):
            raise PgmError("trailing data after raster", self.pos)


def load_pgm(path) -> ImageBuffer:
    """Read a P2 (ASCII) or P5 (binary) PGM file into [0, 1] intensities."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 2 or data[0:2] not in (b"P2", b"P5"):
        raise PgmError("not a P2/P5 PGM stream", 0)
    binary = data[0:2] == b"P5"

    sc = _Scanner(data, 2)
    width = sc.next_int("width", 1 << 30)
    height = sc.next_int("height", 1 << 30)
    maxval = sc.next_int("maxval", MAX_MAXVAL)
    if width < 1 or height < 1:
        raise PgmError("image dimensions must be positive", sc.pos)
    if maxval < 1:
        raise PgmError("maxval must be at least 1", sc.pos)
    n = width * height

    if binary:
        if sc.pos >= len(data) or data[sc.pos] not in _WHITESPACE:
            raise PgmError("missing single whitespace before raster", sc.pos)
        sc.pos += 1
        two_byte = maxval > 255
        need = n * (2 if two_byte else 1)
        if len(data) - sc.pos < need:
            raise PgmError(
                "raster truncated: need %d bytes, have %d" % (need, len(data) - sc.pos),
                len(data),
            )
        dtype = np.dtype(">u2") if two_byte else np.dtype("u1")
        raw = np.frombuffer(data, dtype=dtype, count=n, offset=sc.pos)
        if int(raw.max(initial=0)) > maxval:
            bad = int(np.argmax(raw > maxval))
            raise PgmError(
                "sample %d exceeds maxval %d" % (int(raw[bad]), maxval),
                sc.pos + bad * dtype.itemsize,
            )
        sc.pos += need
        if data[sc.pos :].strip(_WHITESPACE):
            raise PgmError("trailing data after raster", sc.pos)
        samples = raw.astype(np.float64)
    else:
        samples = np.empty(n, dtype=np.float64)
        for k in range(n):
            samples[k] = sc.next_int("sample", maxval)
        sc.expect_end()

    intensities = (samples / float(maxval)).reshape(height, width)
    return ImageBuffer(width=width, height=height, intensities=intensities)


def save_pgm(img: ImageBuffer, path, maxval=255, binary=True):
    """Write a PGM file, rounding half up to the maxval scale, atomically."""
    maxval = int(maxval)
    if not 1 <= maxval <= MAX_MAXVAL:
        raise ValueError("maxval must lie in [1, %d]" % MAX_MAXVAL)
    q = np.floor(img.intensities * maxval + 0.5)
    q = np.clip(q, 0, maxval).astype(np.uint16 if maxval > 255 else np.uint8)

    if binary:
        header = b"P5\n%d %d\n%d\n" % (img.width, img.height, maxval)
        raster = q.astype(">u2").tobytes() if maxval > 255 else q.tobytes()
        atomic_write_bytes(path, header + raster)
    else:
        lines = ["P2", "%d %d" % (img.width, img.height), "%d" % maxval]
        for row in q:
            lines.append(" ".join(str(int(x)) for x in row))
        atomic_write_text(path, "\n".join(lines) + "\n")


def field_from_image(img: ImageBuffer) -> ScalarField:
    """Place pixels on the interior nodes; hx = hy = 1/(max(w, h) + 1)."""
    h = 1.0 / (max(img.width, img.height) + 1)
    grid = GridSpec(nx=img.width, ny=img.height, hx=h, hy=h)
    return ScalarField(grid, img.intensities.T)


def image_from_field(f: ScalarField) -> ImageBuffer:
    """Back to pixel layout; values are clamped to [0, 1] for export only."""
    return ImageBuffer.from_array(np.clip(f.values.T, 0.0, 1.0))


def orientation_image(alpha: ScalarField):
    """Map an orientation field affinely onto [0, 1] for export.

    Returns (image, lo, hi); reconstruct with alpha = lo + pixel*(hi-lo).
    A constant field exports as zeros with lo = hi.
    """
    v = alpha.values
    lo = float(v.min())
    hi = float(v.max())
    if hi > lo:
        scaled = (v - lo) / (hi - lo)
    else:
        scaled = np.zeros_like(v)
    return ImageBuffer.from_array(scaled.T), lo, hi


def _atomic_write(path, data, mode):
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def atomic_write_bytes(path, data: bytes):
    _atomic_write(path, data, "wb")


def atomic_write_text(path, text: str):
    _atomic_write(path, text, "w")
