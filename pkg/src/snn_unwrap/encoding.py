"""Spike encoders for wrapped phase, phase gradient and coherence.

Spike trains are carried as dense boolean arrays shaped ``(T_sim, ...)``;
:class:`SpikeTrain` is the per-neuron list view used for dumps and checks.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidRaster
from .raster_io import CoherenceRaster, PhaseRaster, RasterKind, wrapped_diff

_EPS = 1e-9


@dataclass(frozen=True)
class SpikeTrain:
    neuron_id: int
    times: tuple[int, ...]

    def __post_init__(self):
        t = tuple(int(x) for x in self.times)
        if any(b <= a for a, b in zip(t, t[1:])):
            raise ValueError("spike times must be strictly increasing")
        if t and t[0] < 0:
            raise ValueError("spike times must be non-negative")
        object.__setattr__(self, "times", t)

    def check(self, T_sim: int, refractory_steps: int = 1) -> None:
        if self.times and self.times[-1] >= T_sim:
            raise ValueError(f"spike at {self.times[-1]} outside window of {T_sim} steps")
        if any(b - a < refractory_steps for a, b in zip(self.times, self.times[1:])):
            raise ValueError("spikes closer than the refractory interval")


@dataclass(frozen=True)
class RateParams:
    r_max: float = 100.0  # Hz
    dt: float = 1e-3  # s per step
    T_sim: int = 100
    mode: str = "deterministic"
    rng_seed: int = 0

    def __post_init__(self):
        if self.r_max < 0 or self.dt <= 0:
            raise ValueError("r_max must be >= 0 and dt > 0")
        if self.r_max * self.dt > 1.0:
            raise ValueError("r_max * dt must not exceed one spike per step")
        if self.T_sim < 1:
            raise ValueError("T_sim must be at least 1")
        if self.mode not in ("deterministic", "poisson"):
            raise ValueError(f"unknown rate mode {self.mode!r}")


@dataclass(frozen=True)
class TemporalParams:
    t_ref: int = 50
    delta_t: int = 40
    grad_max: float = np.pi

    def __post_init__(self):
        if self.grad_max <= 0:
            raise ValueError("grad_max must be positive")
        if self.delta_t <= 0 or self.t_ref - self.delta_t < 0:
            raise ValueError("need delta_t > 0 and t_ref - delta_t >= 0")

    def validate_window(self, T_sim: int) -> None:
        if self.t_ref + self.delta_t >= T_sim:
            raise ValueError(f"t_ref + delta_t = {self.t_ref + self.delta_t} must be < T_sim = {T_sim}")


@dataclass(frozen=True)
class PopulationParams:
    N_total: int = 10
    active_rate: float = 100.0  # Hz

    def __post_init__(self):
        if self.N_total < 1:
            raise ValueError("N_total must be >= 1")
        if self.active_rate < 0:
            raise ValueError("active_rate must be >= 0")


@dataclass(frozen=True)
class EncoderConfig:
    rate: RateParams = field(default_factory=RateParams)
    temporal: TemporalParams = field(default_factory=TemporalParams)
    population: PopulationParams = field(default_factory=PopulationParams)
    gradient_axes: str = "x"  # "x" -> 3MN channels, "xy" -> 4MN

    def __post_init__(self):
        if self.gradient_axes not in ("x", "xy"):
            raise ValueError("gradient_axes must be 'x' or 'xy'")
        self.temporal.validate_window(self.rate.T_sim)

    @property
    def n_maps(self) -> int:
        return 3 if self.gradient_axes == "x" else 4


def regular_spikes(rate_hz, dt: float, T_sim: int) -> np.ndarray:
    """Evenly spaced trains: the n-th spike lands on step ``floor(n / (r*dt))``.

    ``rate_hz`` may have any shape; the result is ``(T_sim, *shape)`` bool.
    """
    rho = np.asarray(rate_hz, dtype=np.float64) * dt
    out = np.zeros((T_sim,) + rho.shape, dtype=bool)
    flat_rho = rho.ravel()
    flat_out = out.reshape(T_sim, -1)
    active = np.nonzero(flat_rho > 0)[0]
    if active.size == 0:
        return out
    n_max = int(np.ceil(T_sim * flat_rho[active].max())) + 1
    n = np.arange(1, n_max + 1, dtype=np.float64)[:, None]
    times = np.floor(n / flat_rho[active][None, :] + _EPS)
    cols = np.broadcast_to(active[None, :], times.shape)
    keep = times < T_sim
    flat_out[times[keep].astype(np.int64), cols[keep]] = True
    return out


def phase_rate(phi, r_max: float):
    """Target rate ``r_max * |phi + pi| / (2*pi)`` in Hz."""
    return r_max * np.abs(np.asarray(phi, dtype=np.float64) + np.pi) / (2.0 * np.pi)


def _phase_values(wrapped) -> np.ndarray:
    if isinstance(wrapped, PhaseRaster):
        return wrapped.values
    return np.asarray(wrapped, dtype=np.float64)


def encode_rate(wrapped, p: RateParams) -> np.ndarray:
    """Rate-code every pixel of ``wrapped``; returns ``(T_sim, H, W)`` bool."""
    phi = _phase_values(wrapped)
    rate = phase_rate(phi, p.r_max)
    if p.mode == "deterministic":
        return regular_spikes(rate, p.dt, p.T_sim)
    rng = np.random.default_rng(p.rng_seed)
    return rng.random((p.T_sim,) + phi.shape) < (rate * p.dt)


def wrapped_gradient(wrapped: PhaseRaster, axis: str = "x") -> np.ndarray:
    """Wrapped forward difference along ``axis``; the last column/row is 0."""
    if isinstance(wrapped, PhaseRaster) and wrapped.kind is not RasterKind.WRAPPED:
        raise InvalidRaster("wrapped_gradient expects a wrapped raster")
    phi = _phase_values(wrapped)
    g = np.zeros_like(phi)
    if axis == "x":
        g[:, :-1] = wrapped_diff(phi, axis=1)
    elif axis == "y":
        g[:-1, :] = wrapped_diff(phi, axis=0)
    else:
        raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
    return g


def temporal_spike_times(gradient, p: TemporalParams) -> np.ndarray:
    g = np.clip(np.asarray(gradient, dtype=np.float64), -p.grad_max, p.grad_max)
    return np.rint(p.t_ref - p.delta_t * g / p.grad_max).astype(np.int64)


def decode_temporal(times, p: TemporalParams) -> np.ndarray:
    """Inverse of the timing map up to one quantum of ``grad_max / delta_t``."""
    return (p.t_ref - np.asarray(times, dtype=np.float64)) * p.grad_max / p.delta_t


def encode_temporal(gradient, p: TemporalParams, T_sim: int) -> np.ndarray:
    """One spike per pixel at ``round(t_ref - delta_t * g / grad_max)``.

    Larger (more positive) gradients fire earlier.  Returns ``(T_sim, ...)`` bool.
    """
    p.validate_window(T_sim)
    times = temporal_spike_times(gradient, p)
    out = np.zeros((T_sim,) + times.shape, dtype=bool)
    idx = np.indices(times.shape)
    out[(times,) + tuple(idx)] = True
    return out


def active_count(gamma, N_total: int) -> np.ndarray:
    """``floor(N_total * gamma)``, guarded against representation error (0.57*100 -> 57)."""
    return np.floor(N_total * np.asarray(gamma, dtype=np.float64) + _EPS).astype(np.int64)


def encode_population(coherence, p: PopulationParams, rate: RateParams) -> np.ndarray:
    """Population code: ``(T_sim, H, W, N_total)`` bool.

    The first ``N_active`` members of each pixel's population fire regularly
    at ``active_rate``; the rest stay silent.
    """
    gamma = coherence.values if isinstance(coherence, CoherenceRaster) else np.asarray(coherence)
    n_active = active_count(gamma, p.N_total)
    member = np.arange(p.N_total)
    active = member[None, None, :] < n_active[..., None]
    train = regular_spikes(p.active_rate, rate.dt, rate.T_sim)  # (T,)
    return train[:, None, None, None] & active[None]


def population_summary(coherence, p: PopulationParams, rate: RateParams) -> np.ndarray:
    """One neuron per pixel firing at ``active_rate * N_active / N_total``."""
    gamma = coherence.values if isinstance(coherence, CoherenceRaster) else np.asarray(coherence)
    n_active = active_count(gamma, p.N_total)
    return regular_spikes(p.active_rate * n_active / p.N_total, rate.dt, rate.T_sim)


@dataclass(frozen=True, eq=False)
class EncodedScene:
    """Encoding-layer output.

    Channel layout of :meth:`channels` (neuron id = map * M*N + y*N + x)::

        [ phase rate map | x-gradient map | coherence summary map | (y-gradient map) ]

    The coherence map exposes one summary neuron per pixel; the full
    ``N_total``-member population is kept in ``population``.
    """

    phase: np.ndarray
    gradient_x: np.ndarray
    coherence: np.ndarray
    population: np.ndarray
    gradient_y: np.ndarray | None = None

    @property
    def T_sim(self) -> int:
        return self.phase.shape[0]

    @property
    def grid_shape(self):
        return self.phase.shape[1:]

    @property
    def n_pixels(self) -> int:
        return int(np.prod(self.grid_shape))

    @property
    def n_channels(self) -> int:
        return self.n_pixels * (3 if self.gradient_y is None else 4)

    def maps(self) -> list[np.ndarray]:
        maps = [self.phase, self.gradient_x, self.coherence]
        if self.gradient_y is not None:
            maps.append(self.gradient_y)
        return maps

    def channels(self) -> np.ndarray:
        """``(T_sim, n_channels)`` bool, layout as documented above."""
        T = self.T_sim
        return np.concatenate([m.reshape(T, -1) for m in self.maps()], axis=1)

    def total_spikes(self, include_population: bool = True) -> int:
        """Spike count over the exposed channels, with the summary map
        replaced by the full population when ``include_population``."""
        n = int(self.phase.sum()) + int(self.gradient_x.sum())
        if self.gradient_y is not None:
            n += int(self.gradient_y.sum())
        n += int(self.population.sum()) if include_population else int(self.coherence.sum())
        return n

    def trains(self) -> list[SpikeTrain]:
        ch = self.channels()
        return [SpikeTrain(i, tuple(np.nonzero(ch[:, i])[0].tolist())) for i in range(ch.shape[1])]

    def __eq__(self, other):
        if not isinstance(other, EncodedScene):
            return NotImplemented
        if (self.gradient_y is None) != (other.gradient_y is None):
            return False
        return all(np.array_equal(a, b) for a, b in zip(self.maps() + [self.population],
                                                        other.maps() + [other.population]))


def encode_scene(wrapped: PhaseRaster, coherence: CoherenceRaster, cfg: EncoderConfig | None = None) -> EncodedScene:
    cfg = cfg or EncoderConfig()
    if wrapped.shape != coherence.shape:
        raise InvalidRaster(f"shape mismatch {wrapped.shape} vs {coherence.shape}")
    T = cfg.rate.T_sim
    grad_y = None
    if cfg.gradient_axes == "xy":
        grad_y = encode_temporal(wrapped_gradient(wrapped, "y"), cfg.temporal, T)
    return EncodedScene(
        phase=encode_rate(wrapped, cfg.rate),
        gradient_x=encode_temporal(wrapped_gradient(wrapped, "x"), cfg.temporal, T),
        coherence=population_summary(coherence, cfg.population, cfg.rate),
        population=encode_population(coherence, cfg.population, cfg.rate),
        gradient_y=grad_y,
    )


def dump_spikes_csv(spikes: np.ndarray, path, neuron_offset: int = 0) -> int:
    """Write ``(T, n)`` spikes as ``neuron_id,timestep`` rows sorted by (neuron, time)."""
    spikes = np.asarray(spikes).reshape(spikes.shape[0], -1)
    t, n = np.nonzero(spikes)
    order = np.lexsort((t, n))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["neuron_id", "timestep"])
        for i in order:
            writer.writerow([int(n[i]) + neuron_offset, int(t[i])])
    return int(order.size)


def load_spikes_csv(path, n_neurons: int, T_sim: int) -> np.ndarray:
    out = np.zeros((T_sim, n_neurons), dtype=bool)
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[int(row["timestep"]), int(row["neuron_id"])] = True
    return out
