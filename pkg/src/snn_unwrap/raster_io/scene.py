"""Synthetic interferograms with coherence-driven phase noise.

The generator stands in for real acquisitions: it produces an absolute phase
field, its noisy wrapped observation, a coherence map and the exact wrap
counts of the noiseless field (the supervised labels).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import ndimage

from ..errors import InvalidSpec
from .rasters import (
    TWO_PI,
    CoherenceRaster,
    PhaseRaster,
    RasterKind,
    WrapCountRaster,
    wrap_count,
    wrap_values,
)

SHAPES = ("gaussian_bump", "linear_ramp", "superposed_bumps")
PROFILES = ("uniform", "radial", "patchy")

_SHAPE_ALIASES = {"bump": "gaussian_bump", "ramp": "linear_ramp", "bumps": "superposed_bumps"}

MAX_NOISE_STD = np.pi / 2


@dataclass(frozen=True)
class SceneSpec:
    shape: str = "gaussian_bump"
    amplitude: float = 10.0
    ramp_slope: float = 0.0
    coherence_profile: str = "uniform"
    coherence_level: float = 1.0
    rng_seed: int = 0
    width: int = 64
    height: int = 64
    n_bumps: int = 3

    def __post_init__(self):
        object.__setattr__(self, "shape", _SHAPE_ALIASES.get(self.shape, self.shape))
        if self.shape not in SHAPES:
            raise InvalidSpec(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if self.coherence_profile not in PROFILES:
            raise InvalidSpec(f"unknown coherence profile {self.coherence_profile!r}")
        if self.width * self.height == 0:
            raise InvalidSpec("zero-area grid")
        if self.width < 2 or self.height < 2:
            raise InvalidSpec("scene must be at least 2x2")
        if not (self.amplitude >= 0 and np.isfinite(self.amplitude)):
            raise InvalidSpec("amplitude must be a finite non-negative number")
        if not np.isfinite(self.ramp_slope):
            raise InvalidSpec("ramp_slope must be finite")
        if not 0.0 <= self.coherence_level <= 1.0:
            raise InvalidSpec("coherence_level must lie in [0, 1]")
        if self.n_bumps < 1:
            raise InvalidSpec("n_bumps must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Scene:
    absolute: PhaseRaster
    wrapped: PhaseRaster
    coherence: CoherenceRaster
    k_truth: WrapCountRaster

    def __iter__(self):
        return iter((self.absolute, self.wrapped, self.coherence, self.k_truth))


def noise_std(gamma):
    """Single-look phase standard deviation for coherence ``gamma``.

    ``sqrt((1 - g^2) / (2 g^2))`` clamped to ``[0, pi/2]``; ``gamma == 0``
    maps to the clamp (callers replace those pixels with uniform noise).
    """
    g = np.asarray(gamma, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.sqrt((1.0 - g * g) / (2.0 * g * g))
    s = np.where(g > 0, s, MAX_NOISE_STD)
    return np.clip(s, 0.0, MAX_NOISE_STD)


def _grid(spec: SceneSpec):
    y, x = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
    return x, y


def _absolute_phase(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    x, y = _grid(spec)
    phase = spec.ramp_slope * x
    if spec.shape == "gaussian_bump":
        cx, cy = (spec.width - 1) / 2, (spec.height - 1) / 2
        s = min(spec.width, spec.height) / 6.0
        phase = phase + spec.amplitude * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    elif spec.shape == "superposed_bumps":
        for _ in range(spec.n_bumps):
            cx = rng.uniform(0, spec.width - 1)
            cy = rng.uniform(0, spec.height - 1)
            s = rng.uniform(0.1, 0.25) * min(spec.width, spec.height)
            sign = rng.choice((-1.0, 1.0))
            phase = phase + sign * spec.amplitude * np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2 * s * s))
    return phase


def _coherence(spec: SceneSpec, rng: np.random.Generator) -> np.ndarray:
    level = spec.coherence_level
    if spec.coherence_profile == "uniform":
        return np.full((spec.height, spec.width), level)
    if spec.coherence_profile == "radial":
        x, y = _grid(spec)
        cx, cy = (spec.width - 1) / 2, (spec.height - 1) / 2
        scale = 0.5 * min(spec.width, spec.height)
        r2 = ((x - cx) ** 2 + (y - cy) ** 2) / (scale * scale)
        return np.clip(level * np.exp(-r2), 0.0, 1.0)
    # patchy: smoothed white noise around the baseline level
    field = rng.standard_normal((spec.height, spec.width))
    field = ndimage.gaussian_filter(field, sigma=max(1.0, min(spec.width, spec.height) / 8), mode="wrap")
    std = field.std()
    if std > 0:
        field = (field - field.mean()) / std
    return np.clip(level + 0.2 * field, 0.0, 1.0)


def synthesize_scene(spec: SceneSpec) -> Scene:
    """Build (absolute, wrapped, coherence, k_truth) for ``spec``.

    Independent random streams are spawned for geometry, coherence and noise,
    so changing the coherence level of an otherwise fixed spec rescales the
    same underlying noise draw instead of producing a fresh one.
    """
    geometry_rng, coherence_rng, noise_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(spec.rng_seed).spawn(3)
    )
    absolute = _absolute_phase(spec, geometry_rng)
    gamma = _coherence(spec, coherence_rng)

    gauss = noise_rng.standard_normal(absolute.shape)
    uniform = noise_rng.uniform(-np.pi, np.pi, absolute.shape)
    noise = np.where(gamma > 0, noise_std(gamma) * gauss, uniform)

    clean_wrapped = wrap_values(absolute)
    k = wrap_count(absolute, clean_wrapped)
    return Scene(
        absolute=PhaseRaster(absolute, RasterKind.ABSOLUTE),
        wrapped=PhaseRaster(wrap_values(absolute + noise), RasterKind.WRAPPED),
        coherence=CoherenceRaster(gamma),
        k_truth=WrapCountRaster(k, max_abs_k=None),
    )


def vortex_phase(width: int, height: int, center=None, charge: int = 1) -> PhaseRaster:
    """Wrapped phase of a point vortex ``charge * atan2(y - cy, x - cx)``.

    The default center sits between pixels so that exactly one 2x2 loop
    encloses it.
    """
    if center is None:
        center = ((width - 1) / 2, (height - 1) / 2)
    cx, cy = center
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    return PhaseRaster(wrap_values(charge * np.arctan2(y - cy, x - cx)), RasterKind.WRAPPED)


def single_fringe_ramp_specs(n: int, size: int = 64, seed: int = 0, coherence_level: float = 0.9,
                             coherence_profile: str = "uniform", span=(1.2, 1.9)) -> list[SceneSpec]:
    """Descending ramps whose total drop lies in ``span`` cycles of pi.

    Each ramp crosses the -pi wrap line exactly once, so the truth labels
    are ``k in {-1, 0}``.
    """
    rng = np.random.default_rng(seed)
    specs = []
    for i in range(n):
        drop = rng.uniform(*span) * np.pi
        specs.append(
            SceneSpec(
                shape="linear_ramp",
                amplitude=0.0,
                ramp_slope=-drop / (size - 1),
                coherence_profile=coherence_profile,
                coherence_level=coherence_level,
                rng_seed=int(rng.integers(0, 2**63 - 1)),
                width=size,
                height=size,
            )
        )
    return specs
