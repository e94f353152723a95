"""Classical reference machinery: residues, Itoh path integration, gradient energy."""

from __future__ import annotations

import math

import numpy as np

from ..errors import InvalidRaster, OracleInapplicable
from .rasters import TWO_PI, PhaseRaster, RasterKind, wrap_values, wrapped_diff


def _values(raster) -> np.ndarray:
    if isinstance(raster, PhaseRaster):
        return raster.values
    return np.asarray(raster, dtype=np.float64)


def residue_charges(wrapped) -> np.ndarray:
    """Charge of every 2x2 loop, shape ``(height - 1, width - 1)``.

    Loop order is (x, y) -> (x+1, y) -> (x+1, y+1) -> (x, y+1) -> (x, y), so a
    phase increasing counter-clockwise in (x, y) coordinates has charge +1.
    """
    p = _values(wrapped)
    a = p[:-1, :-1]
    b = p[:-1, 1:]
    c = p[1:, 1:]
    d = p[1:, :-1]
    circulation = wrap_values(b - a) + wrap_values(c - b) + wrap_values(d - c) + wrap_values(a - d)
    return np.round(circulation / TWO_PI).astype(np.int64)


def detect_residues(wrapped: PhaseRaster) -> list[tuple[int, int, int]]:
    """Nonzero loop charges as ``(x, y, charge)``; (x, y) is the loop's top-left pixel."""
    if isinstance(wrapped, PhaseRaster) and wrapped.kind is not RasterKind.WRAPPED:
        raise InvalidRaster("detect_residues expects a wrapped raster")
    charges = residue_charges(wrapped)
    ys, xs = np.nonzero(charges)
    return [(int(x), int(y), int(charges[y, x])) for y, x in zip(ys, xs)]


def _integrate_line(line: np.ndarray, start: int, start_value: float) -> np.ndarray:
    """Integrate wrapped differences outward from ``start`` along a 1-D line."""
    out = np.empty_like(line)
    out[start] = start_value
    steps = wrap_values(np.diff(line))
    if start + 1 < line.size:
        out[start + 1 :] = start_value + np.cumsum(steps[start:])
    if start > 0:
        out[:start] = start_value - np.cumsum(steps[:start][::-1])[::-1]
    return out


def _integrate(p: np.ndarray, seed_pixel, order: str) -> np.ndarray:
    sx, sy = seed_pixel
    if order == "row_first":
        out = np.empty_like(p)
        seed_row = _integrate_line(p[sy], sx, p[sy, sx])
        for x in range(p.shape[1]):
            out[:, x] = _integrate_line(p[:, x], sy, seed_row[x])
        return out
    if order == "column_first":
        return _integrate(p.T, (sy, sx), "row_first").T
    raise ValueError(f"unknown integration order {order!r}")


def itoh_unwrap(wrapped: PhaseRaster, seed_pixel=(0, 0), order: str = "row_first",
                check_residues: bool = True) -> PhaseRaster:
    """Path-following unwrap by integrating wrapped forward differences.

    The seed pixel keeps its wrapped value (k_seed = 0).  ``row_first``
    integrates along the seed row and then down every column;
    ``column_first`` does the transpose.  The accumulated sum is snapped to
    ``wrapped + 2*pi*k`` so the result differs from the input by exact
    multiples of 2*pi.
    """
    if wrapped.kind is not RasterKind.WRAPPED:
        raise InvalidRaster("itoh_unwrap expects a wrapped raster")
    sx, sy = seed_pixel
    if not (0 <= sx < wrapped.width and 0 <= sy < wrapped.height):
        raise InvalidRaster(f"seed pixel {seed_pixel} outside {wrapped.width}x{wrapped.height} grid")
    if check_residues:
        residues = detect_residues(wrapped)
        if residues:
            raise OracleInapplicable(residues)
    p = wrapped.values
    integrated = _integrate(p, (sx, sy), order)
    k = np.round((integrated - p) / TWO_PI)
    return PhaseRaster(p + TWO_PI * k, RasterKind.ABSOLUTE)


def gradient_energy_values(candidate, wrapped) -> float:
    """Array form of :func:`gradient_energy`; accepts any 2-D shape, including 1xN strips."""
    a = np.atleast_2d(np.asarray(candidate, dtype=np.float64))
    w = np.atleast_2d(np.asarray(wrapped, dtype=np.float64))
    if a.shape != w.shape:
        raise InvalidRaster(f"shape mismatch {a.shape} vs {w.shape}")
    terms = []
    for axis in (1, 0):
        if a.shape[axis] < 2:
            continue
        r = np.diff(a, axis=axis) - wrapped_diff(w, axis=axis)
        terms.append((r * r).ravel())
    if not terms:
        return 0.0
    return math.fsum(np.concatenate(terms))


def gradient_energy(candidate: PhaseRaster, wrapped: PhaseRaster) -> float:
    """Sum of squared mismatches between candidate gradients and wrapped gradients.

    Forward differences only; the right column and bottom row have no
    outgoing edge and contribute nothing.
    """
    if candidate.shape != wrapped.shape:
        raise InvalidRaster(f"shape mismatch {candidate.shape} vs {wrapped.shape}")
    return gradient_energy_values(candidate.values, wrapped.values)
