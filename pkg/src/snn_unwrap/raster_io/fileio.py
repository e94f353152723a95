"""SNUR v1 raster files plus CSV and PGM exports.

Layout (little-endian)::

    0   4s   magic "SNUR"
    4   u16  version (1)
    6   u8   dtype   0=f32, 1=i32, 2=f64
    7   u8   kind    0=wrapped, 1=absolute, 2=coherence, 3=wrapcount
    8   u32  width
    12  u32  height
    16  u64  reserved (0)
    24  ...  row-major payload, width*height values
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from ..errors import BadHeader, BadMagic, DimensionOverflow, FormatError, Truncated, VersionMismatch
from .rasters import CoherenceRaster, PhaseRaster, RasterKind, WrapCountRaster

MAGIC = b"SNUR"
VERSION = 1
HEADER = struct.Struct("<4sHBBIIQ")
MAX_ELEMENTS = 1 << 28

DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<i4"), 2: np.dtype("<f8")}
DTYPE_CODES = {"f32": 0, "i32": 1, "f64": 2}


def encode_raster(raster, dtype: str | None = None) -> bytes:
    kind = RasterKind(raster.kind)
    if dtype is None:
        dtype = "i32" if kind is RasterKind.WRAPCOUNT else "f64"
    code = DTYPE_CODES[dtype]
    if kind is RasterKind.WRAPCOUNT and code != 1:
        raise FormatError("wrap-count rasters are stored as i32")
    if kind is not RasterKind.WRAPCOUNT and code == 1:
        raise FormatError("phase and coherence rasters need a float dtype")
    values = np.ascontiguousarray(raster.values, dtype=DTYPES[code])
    if kind is RasterKind.WRAPCOUNT and not np.array_equal(values, raster.values):
        raise FormatError("wrap counts do not fit in i32")
    height, width = raster.values.shape
    return HEADER.pack(MAGIC, VERSION, code, int(kind), width, height, 0) + values.tobytes()


def decode_raster(data: bytes):
    if len(data) < HEADER.size:
        if data[:4] != MAGIC[: len(data[:4])]:
            raise BadMagic(f"bad magic {data[:4]!r}")
        raise Truncated(f"file shorter than the {HEADER.size}-byte header")
    magic, version, code, kind_code, width, height, _reserved = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != VERSION:
        raise VersionMismatch(f"unsupported SNUR version {version}")
    if code not in DTYPES:
        raise BadHeader(f"unknown dtype code {code}")
    try:
        kind = RasterKind(kind_code)
    except ValueError:
        raise BadHeader(f"unknown raster kind {kind_code}") from None
    count = width * height
    if count > MAX_ELEMENTS:
        raise DimensionOverflow(f"{width}x{height} exceeds {MAX_ELEMENTS} elements")
    if width < 2 or height < 2:
        raise BadHeader(f"degenerate dimensions {width}x{height}")
    dt = DTYPES[code]
    payload = memoryview(data)[HEADER.size :]
    expected = count * dt.itemsize
    if len(payload) < expected:
        raise Truncated(f"payload holds {len(payload) // dt.itemsize} of {count} values")
    if len(payload) > expected:
        raise FormatError(f"{len(payload) - expected} trailing bytes after payload")
    values = np.frombuffer(payload, dtype=dt).reshape(height, width)

    if kind is RasterKind.WRAPCOUNT:
        return WrapCountRaster(values.astype(np.int64), max_abs_k=None)
    values = values.astype(np.float64)
    if kind is RasterKind.COHERENCE:
        return CoherenceRaster(values)
    if kind is RasterKind.WRAPPED and code == 0:
        # float32(pi) rounds above the double pi
        values = np.minimum(values, np.pi)
    return PhaseRaster(values, kind)


def write_raster(raster, path, dtype: str | None = None) -> None:
    Path(path).write_bytes(encode_raster(raster, dtype))


def read_raster(path):
    return decode_raster(Path(path).read_bytes())


def export_csv(raster, path) -> None:
    """Write ``x,y,value`` rows, one per pixel, row-major."""
    values = raster.values
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "value"])
        for y in range(values.shape[0]):
            for x in range(values.shape[1]):
                writer.writerow([x, y, repr(values[y, x].item())])


def to_pgm(values) -> bytes:
    """Binary 8-bit PGM with min-max scaling; a constant image maps to 0."""
    v = np.asarray(values, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if hi > lo:
        scaled = np.round((v - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(v)
    height, width = v.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + scaled.astype(np.uint8).tobytes()


def export_pgm(raster, path) -> None:
    Path(path).write_bytes(to_pgm(raster.values))
