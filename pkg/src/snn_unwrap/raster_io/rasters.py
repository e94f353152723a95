"""Grid data types and the phase-wrapping primitives everything else builds on."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidRaster

TWO_PI = 2.0 * np.pi


class RasterKind(enum.IntEnum):
    # values double as the SNUR header codes
    WRAPPED = 0
    ABSOLUTE = 1
    COHERENCE = 2
    WRAPCOUNT = 3


def _as_grid(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    if arr.ndim != 2:
        raise InvalidRaster(f"raster values must be 2-D (height, width), got shape {arr.shape}")
    height, width = arr.shape
    if width < 2 or height < 2:
        raise InvalidRaster(f"raster must be at least 2x2, got {height}x{width}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class PhaseRaster:
    """Row-major grid of phase values in radians.

    ``values`` has shape ``(height, width)``; ``kind`` is either
    :attr:`RasterKind.WRAPPED` (every value in ``(-pi, pi]``) or
    :attr:`RasterKind.ABSOLUTE`.
    """

    values: np.ndarray
    kind: RasterKind = RasterKind.ABSOLUTE

    def __post_init__(self):
        kind = RasterKind(self.kind)
        if kind not in (RasterKind.WRAPPED, RasterKind.ABSOLUTE):
            raise InvalidRaster(f"phase raster kind must be wrapped or absolute, got {kind.name}")
        arr = _as_grid(self.values, np.float64)
        if not np.all(np.isfinite(arr)):
            raise InvalidRaster("phase raster contains non-finite values")
        if kind is RasterKind.WRAPPED and (np.any(arr <= -np.pi) or np.any(arr > np.pi)):
            raise InvalidRaster("wrapped raster has values outside (-pi, pi]")
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "kind", kind)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    @property
    def is_wrapped(self) -> bool:
        return self.kind is RasterKind.WRAPPED

    def __eq__(self, other):
        if not isinstance(other, PhaseRaster):
            return NotImplemented
        return self.kind is other.kind and np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class CoherenceRaster:
    """Per-pixel interferometric coherence, dimensionless in [0, 1]."""

    values: np.ndarray
    kind: RasterKind = field(default=RasterKind.COHERENCE, init=False)

    def __post_init__(self):
        arr = _as_grid(self.values, np.float64)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InvalidRaster("coherence values must lie in [0, 1]")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, CoherenceRaster):
            return NotImplemented
        return np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class WrapCountRaster:
    """Signed integer cycle count ``k`` per pixel."""

    values: np.ndarray
    max_abs_k: int | None = 2
    kind: RasterKind = field(default=RasterKind.WRAPCOUNT, init=False)

    def __post_init__(self):
        raw = np.asarray(self.values)
        if raw.dtype.kind == "f":
            if not np.all(np.isfinite(raw)) or np.any(raw != np.round(raw)):
                raise InvalidRaster("wrap counts must be integers")
        arr = _as_grid(raw, np.int64)
        if self.max_abs_k is not None and np.any(np.abs(arr) > self.max_abs_k):
            raise InvalidRaster(f"wrap count outside configured range |k| <= {self.max_abs_k}")
        object.__setattr__(self, "values", arr)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape

    def __eq__(self, other):
        if not isinstance(other, WrapCountRaster):
            return NotImplemented
        return np.array_equal(self.values, other.values)


def wrap_values(a):
    """Map radians onto ``(-pi, pi]``.

    Ties at odd multiples of pi are broken by numpy's round-half-to-even,
    and the ``-pi`` that this can leave behind is folded onto ``+pi``.
    """
    a = np.asarray(a, dtype=np.float64)
    out = a - TWO_PI * np.round(a / TWO_PI)
    out = np.where(out <= -np.pi, out + TWO_PI, out)
    out = np.where(out > np.pi, out - TWO_PI, out)
    return out


def wrap(phase_abs: PhaseRaster) -> PhaseRaster:
    if not isinstance(phase_abs, PhaseRaster):
        raise InvalidRaster("wrap() expects a PhaseRaster")
    if phase_abs.kind is not RasterKind.ABSOLUTE:
        raise InvalidRaster("wrap() expects an absolute-phase raster")
    return PhaseRaster(wrap_values(phase_abs.values), RasterKind.WRAPPED)


def wrap_count(absolute, wrapped) -> np.ndarray:
    """Integer k with ``absolute == wrapped + 2*pi*k`` (rounded)."""
    a = absolute.values if isinstance(absolute, PhaseRaster) else np.asarray(absolute, dtype=np.float64)
    w = wrapped.values if isinstance(wrapped, PhaseRaster) else np.asarray(wrapped, dtype=np.float64)
    return np.round((a - w) / TWO_PI).astype(np.int64)


def wrapped_diff(values, axis: int) -> np.ndarray:
    """Forward differences along ``axis`` passed through the wrap operator.

    The result is one shorter than the input along ``axis``.
    """
    return wrap_values(np.diff(np.asarray(values, dtype=np.float64), axis=axis))


def reconstruct(wrapped: PhaseRaster, k: WrapCountRaster) -> PhaseRaster:
    """Absolute phase ``phi_w + 2*pi*k``."""
    if wrapped.shape != k.shape:
        raise InvalidRaster(f"shape mismatch {wrapped.shape} vs {k.shape}")
    return PhaseRaster(wrapped.values + TWO_PI * k.values, RasterKind.ABSOLUTE)
