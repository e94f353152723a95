"""Three-layer unwrapping network: encoding -> processing -> decision.

Neuron numbering
----------------
* encoding layer: ``map * M*N + pixel`` (see :class:`~snn_unwrap.encoding.EncodedScene`)
* processing layer: ``pixel`` where ``pixel = y * N + x``
* decision layer: ``pixel * K + kidx`` with ``kidx`` indexing ``DecisionParams.k_values``

The processing layer receives the pixel's own encoding channels plus lateral
input from processing neurons within ``cutoff_radius``; the decision layer
sees only its own pixel's processing neuron.
"""

from __future__ import annotations

import hashlib
import heapq
import io
import json
import struct
from dataclasses import asdict, dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .encoding import EncodedScene, EncoderConfig, PopulationParams, RateParams, TemporalParams, encode_scene
from .errors import BadMagic, CapacityError, FormatError, InvalidRaster, Truncated, VersionMismatch
from .lif import LifParams, NeuronPopulation, SpikeRecord, SynapseTable, run
from .raster_io import TWO_PI, CoherenceRaster, PhaseRaster, WrapCountRaster


@dataclass(frozen=True)
class LateralParams:
    w0: float = 0.05
    sigma: float = 1.0
    cutoff_radius: float = 3.0
    h_mode: str = "geometric_mean"

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.cutoff_radius < 1:
            raise ValueError("cutoff_radius must be >= 1")
        if self.h_mode not in ("geometric_mean", "min"):
            raise ValueError(f"unknown h_mode {self.h_mode!r}")


@dataclass(frozen=True)
class DecisionParams:
    k_values: tuple[int, ...] = (-2, -1, 0, 1, 2)
    decision_window: int | None = None  # None -> whole simulation
    tie_break: str = "smallest_abs"  # smallest |k|, then smaller signed k
    readout: str = "first_spike"  # or "spike_count"

    def __post_init__(self):
        ks = tuple(int(k) for k in self.k_values)
        object.__setattr__(self, "k_values", ks)
        if any(b <= a for a, b in zip(ks, ks[1:])):
            raise ValueError("k_values must be strictly increasing")
        if 0 not in ks:
            raise ValueError("k_values must contain 0")
        if self.tie_break != "smallest_abs":
            raise ValueError(f"unknown tie_break {self.tie_break!r}")
        if self.readout not in ("first_spike", "spike_count"):
            raise ValueError(f"unknown readout {self.readout!r}")
        if self.decision_window is not None and self.decision_window < 1:
            raise ValueError("decision_window must be positive")

    @property
    def K(self) -> int:
        return len(self.k_values)

    @property
    def zero_index(self) -> int:
        return self.k_values.index(0)

    def preference_rank(self) -> np.ndarray:
        """Rank of each k under the tie-break rule (0 = preferred)."""
        order = sorted(range(self.K), key=lambda i: (abs(self.k_values[i]), self.k_values[i]))
        rank = np.empty(self.K, dtype=np.int64)
        rank[order] = np.arange(self.K)
        return rank


@dataclass(frozen=True)
class NetworkParams:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    lif: LifParams = field(default_factory=LifParams)
    lateral: LateralParams = field(default_factory=LateralParams)
    decision: DecisionParams = field(default_factory=DecisionParams)
    w_init_max: float = 1.0
    i_target: float = 1.2  # fan-in sum of encoding -> processing weights
    dec_zero_weight: float = 0.5
    dec_other_max: float = 0.25
    w_prop: float | None = None  # None -> 1.5 * v_threshold
    prop_saturation: float | None = None  # None -> 2 * v_threshold
    max_decision_neurons: int = 1 << 22

    def __post_init__(self):
        if self.w_init_max <= 0 or self.i_target <= 0:
            raise ValueError("w_init_max and i_target must be positive")
        if not 0 <= self.dec_other_max < self.dec_zero_weight:
            raise ValueError("need 0 <= dec_other_max < dec_zero_weight so that k=0 wins by default")

    @property
    def propagation_gain(self) -> float:
        return 1.5 * self.lif.v_threshold if self.w_prop is None else self.w_prop

    @property
    def propagation_cap(self) -> float:
        return 2.0 * self.lif.v_threshold if self.prop_saturation is None else self.prop_saturation

    @property
    def T_sim(self) -> int:
        return self.encoder.rate.T_sim

    @property
    def window(self) -> int:
        w = self.decision.decision_window
        return self.T_sim if w is None else min(w, self.T_sim)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkParams":
        d = dict(d)
        enc = dict(d.pop("encoder", {}))
        encoder = EncoderConfig(
            rate=RateParams(**enc.pop("rate", {})),
            temporal=TemporalParams(**enc.pop("temporal", {})),
            population=PopulationParams(**enc.pop("population", {})),
            **enc,
        )
        dec = dict(d.pop("decision", {}))
        if "k_values" in dec:
            dec["k_values"] = tuple(dec["k_values"])
        return cls(
            encoder=encoder,
            lif=LifParams(**d.pop("lif", {})),
            lateral=LateralParams(**d.pop("lateral", {})),
            decision=DecisionParams(**dec),
            **d,
        )


# ---------------------------------------------------------------------------
# lateral connectivity


def lateral_offsets(cutoff_radius: float) -> list[tuple[int, int]]:
    """(dy, dx) lattice offsets with ``0 < d <= cutoff_radius``."""
    r = int(np.floor(cutoff_radius))
    r2 = cutoff_radius * cutoff_radius
    return [(dy, dx) for dy in range(-r, r + 1) for dx in range(-r, r + 1)
            if 0 < dy * dy + dx * dx <= r2]


def coherence_gate(gi, gj, mode: str):
    if mode == "geometric_mean":
        return np.sqrt(gi * gj)
    if mode == "min":
        return np.minimum(gi, gj)
    raise ValueError(f"unknown h_mode {mode!r}")


def _lateral_pairs(height: int, width: int, p: LateralParams):
    pre, post, d2 = [], [], []
    ys, xs = np.mgrid[0:height, 0:width]
    for dy, dx in lateral_offsets(p.cutoff_radius):
        ok = (ys + dy >= 0) & (ys + dy < height) & (xs + dx >= 0) & (xs + dx < width)
        src = (ys * width + xs)[ok]
        dst = ((ys + dy) * width + (xs + dx))[ok]
        pre.append(src)
        post.append(dst)
        d2.append(np.full(src.size, dy * dy + dx * dx, dtype=np.float64))
    if not pre:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    return np.concatenate(pre), np.concatenate(post), np.concatenate(d2)


def build_lateral_weights(coherence: CoherenceRaster, p: LateralParams) -> SynapseTable:
    """``w_ij = w0 * exp(-d^2 / (2 sigma^2)) * h(gamma_i, gamma_j)`` within the cutoff.

    Zero-valued entries (from zero coherence) are kept so the table structure
    depends only on the grid and the cutoff.
    """
    height, width = coherence.shape
    pre, post, d2 = _lateral_pairs(height, width, p)
    gamma = coherence.values.ravel()
    w = p.w0 * np.exp(-d2 / (2.0 * p.sigma * p.sigma)) * coherence_gate(gamma[pre], gamma[post], p.h_mode)
    n = height * width
    return SynapseTable(pre, post, w, n, n)


# ---------------------------------------------------------------------------
# topology


@dataclass(eq=False)
class NetworkTopology:
    height: int
    width: int
    params: NetworkParams
    enc_to_proc: SynapseTable
    lateral: SynapseTable  # built for gamma == 1; rescaled per scene
    proc_to_dec: SynapseTable
    rng_seed: int = 0
    trained_epochs: int = 0

    @property
    def n_pixels(self) -> int:
        return self.height * self.width

    @property
    def K(self) -> int:
        return self.params.decision.K

    @property
    def layer_sizes(self) -> tuple[int, int, int]:
        return (self.params.encoder.n_maps * self.n_pixels, self.n_pixels, self.K * self.n_pixels)

    def learnable_weights(self) -> np.ndarray:
        return np.concatenate([self.enc_to_proc.weight, self.proc_to_dec.weight])

    def with_learnable(self, enc_w, dec_w) -> "NetworkTopology":
        return replace(self, enc_to_proc=self.enc_to_proc.with_weights(enc_w),
                       proc_to_dec=self.proc_to_dec.with_weights(dec_w))

    def lateral_for(self, coherence: CoherenceRaster) -> SynapseTable:
        if coherence.shape != (self.height, self.width):
            raise InvalidRaster(f"coherence {coherence.shape} does not match topology {(self.height, self.width)}")
        gamma = coherence.values.ravel()
        h = coherence_gate(gamma[self.lateral.pre], gamma[self.lateral.post], self.params.lateral.h_mode)
        return self.lateral.with_weights(self.lateral.weight * h)

    def digest(self) -> str:
        return hashlib.sha256(snapshot_bytes(self)).hexdigest()

    def __eq__(self, other):
        if not isinstance(other, NetworkTopology):
            return NotImplemented
        return snapshot_bytes(self) == snapshot_bytes(other)


def build_network(M: int, N: int, params: NetworkParams | None = None, rng_seed: int = 0) -> NetworkTopology:
    """Initial topology for an ``M x N`` interferogram (M rows, N columns).

    Encoding -> processing weights are drawn uniform on ``[0, w_init_max]``
    and rescaled so each processing neuron's fan-in sums to ``i_target``.
    Processing -> decision weights favour the k = 0 neuron, which therefore
    reaches threshold first whenever its pixel is active.
    """
    params = params or NetworkParams()
    if M < 2 or N < 2:
        raise InvalidRaster("network needs at least a 2x2 grid")
    K = params.decision.K
    n_pix = M * N
    if n_pix * K > params.max_decision_neurons:
        raise CapacityError(f"{n_pix * K} decision neurons exceed the configured maximum {params.max_decision_neurons}")
    rng = np.random.default_rng(rng_seed)
    n_maps = params.encoder.n_maps

    pix = np.arange(n_pix)
    enc_pre = np.concatenate([m * n_pix + pix for m in range(n_maps)])
    enc_post = np.tile(pix, n_maps)
    raw = rng.uniform(0.0, params.w_init_max, size=(n_maps, n_pix))
    raw = np.where(raw.sum(axis=0) > 0, raw, 1.0)
    enc_w = (raw / raw.sum(axis=0) * params.i_target).ravel()
    enc = SynapseTable(enc_pre, enc_post, enc_w, n_maps * n_pix, n_pix)

    dec_pre = np.repeat(pix, K)
    dec_post = np.arange(n_pix * K)
    dec_w = rng.uniform(0.0, params.dec_other_max, size=(n_pix, K))
    dec_w[:, params.decision.zero_index] = params.dec_zero_weight
    dec = SynapseTable(dec_pre, dec_post, dec_w.ravel(), n_pix, n_pix * K)

    pre, post, d2 = _lateral_pairs(M, N, params.lateral)
    lp = params.lateral
    lat = SynapseTable(pre, post, lp.w0 * np.exp(-d2 / (2.0 * lp.sigma * lp.sigma)), n_pix, n_pix)
    return NetworkTopology(M, N, params, enc, lat, dec, rng_seed=rng_seed)


# ---------------------------------------------------------------------------
# inference


@dataclass(eq=False)
class DecisionTrace:
    k: np.ndarray  # (M, N)
    latency: np.ndarray  # (M, N) steps, -1 when undecided
    decided: np.ndarray  # (M, N) bool
    first_spikes: np.ndarray  # (M, N, K) first spike step per decision neuron, -1 if silent
    mode: str = "one_shot"
    untrained: bool = False
    bias: np.ndarray | None = None  # (M, N, K) propagation current, propagating mode only

    def records(self):
        M, N = self.k.shape
        for y in range(M):
            for x in range(N):
                yield {"x": x, "y": y, "k": int(self.k[y, x]), "latency_steps": int(self.latency[y, x]),
                       "decided": bool(self.decided[y, x])}

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec) + "\n")


@dataclass(eq=False)
class InferenceResult:
    k: WrapCountRaster
    record: SpikeRecord  # population = [processing | decision]; sources = encoding layer
    trace: DecisionTrace
    encoded: EncodedScene
    dec_input: np.ndarray | None = None  # (T, K*MN) synaptic drive of the decision layer

    def __iter__(self):
        return iter((self.k, self.record, self.trace))


def _first_spikes(spikes: np.ndarray, window: int) -> np.ndarray:
    s = spikes[:window]
    fired = s.any(axis=0)
    return np.where(fired, np.argmax(s, axis=0), -1)


def select_k(first_spikes: np.ndarray, counts: np.ndarray | None, dp: DecisionParams):
    """Winner per pixel from ``(..., K)`` first-spike times (and counts for the
    ``spike_count`` readout).  Returns ``(kidx, decided, latency)``."""
    rank = dp.preference_rank()
    big = np.iinfo(np.int64).max // 4
    if dp.readout == "first_spike":
        key = np.where(first_spikes >= 0, first_spikes * dp.K + rank, big)
        kidx = np.argmin(key, axis=-1)
        decided = (first_spikes >= 0).any(axis=-1)
    else:
        key = np.where(counts > 0, -counts * dp.K + rank, big)
        kidx = np.argmin(key, axis=-1)
        decided = (counts > 0).any(axis=-1)
    kidx = np.where(decided, kidx, dp.zero_index)
    latency = np.take_along_axis(first_spikes, kidx[..., None], axis=-1)[..., 0]
    latency = np.where(decided, latency, -1)
    return kidx, decided, latency


def run_processing(topology: NetworkTopology, encoded: EncodedScene, coherence: CoherenceRaster) -> SpikeRecord:
    n = topology.n_pixels
    W = sp.hstack([topology.enc_to_proc.matrix, topology.lateral_for(coherence).matrix], format="csr")
    pop = NeuronPopulation.create(n)
    return run(pop, topology.params.lif, encoded.T_sim, synapses=W, sources=encoded.channels())


def decision_drive(topology: NetworkTopology, proc_spikes: np.ndarray) -> np.ndarray:
    """Synaptic input to every decision neuron per step (one-step delay)."""
    T = proc_spikes.shape[0]
    D = topology.proc_to_dec.matrix
    drive = np.zeros((T, D.shape[0]))
    if T > 1:
        drive[1:] = (D @ proc_spikes[:-1].T.astype(np.float64)).T
    return drive


def run_decision(topology: NetworkTopology, proc_spikes: np.ndarray, bias=None, record_membrane=False) -> SpikeRecord:
    n_dec = topology.K * topology.n_pixels
    W = sp.hstack([topology.proc_to_dec.matrix, sp.csr_matrix((n_dec, n_dec))], format="csr")
    pop = NeuronPopulation.create(n_dec)
    return run(pop, topology.params.lif, proc_spikes.shape[0], input_schedule=bias, synapses=W,
               sources=proc_spikes, record_membrane=True if record_membrane else None)


def traversal_order(coherence: np.ndarray, seed: tuple[int, int], order: str = "raster") -> list[tuple[int, int]]:
    """Visiting order (y, x) starting at ``seed``; every later pixel touches an earlier one.

    ``raster`` walks the seed row outward, then rows outward from it, each
    row outward from the seed column.  ``coherence`` grows a region from the
    seed, always taking the most coherent pixel on its boundary.
    """
    M, N = coherence.shape
    sy, sx = seed
    if order == "raster":
        rows = sorted(range(M), key=lambda y: (abs(y - sy), y))
        cols = sorted(range(N), key=lambda x: (abs(x - sx), x))
        return [(y, x) for y in rows for x in cols]
    if order == "coherence":
        seen = np.zeros((M, N), dtype=bool)
        heap = [(-coherence[sy, sx], sy * N + sx)]
        seen[sy, sx] = True
        out = []
        while heap:
            _, idx = heapq.heappop(heap)
            y, x = divmod(idx, N)
            out.append((y, x))
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < M and 0 <= nx < N and not seen[ny, nx]:
                    seen[ny, nx] = True
                    heapq.heappush(heap, (-coherence[ny, nx], ny * N + nx))
        return out
    raise ValueError(f"unknown traversal order {order!r}")


def _first_crossing(drive: np.ndarray, bias: np.ndarray, lif: LifParams, window: int) -> np.ndarray:
    """First-spike step of each of a pixel's K neurons (fresh state), -1 if none.

    Same arithmetic as :func:`snn_unwrap.lif.run`; before the first spike no
    neuron is refractory, so the plain recurrence is exact.
    """
    K = bias.size
    v = np.zeros(K)
    first = np.full(K, -1, dtype=np.int64)
    for t in range(window):
        v = v + lif.leak * (bias - v) + drive[t]
        hit = (v >= lif.v_threshold) & (first < 0)
        if hit.any():
            first[hit] = t
            return first
    return first


def propagate(wrapped: np.ndarray, coherence: np.ndarray, dec_drive: np.ndarray, params: NetworkParams,
              order: str = "raster"):
    """Sequential decisions with neighbour-consensus bias.

    ``dec_drive`` is ``(T, M, N, K)``.  For the pixel being visited, each
    decided 4-neighbour n proposes ``round((phi_w[n] + 2*pi*k[n] - phi_w[i]) / 2*pi)``
    and the decision neuron of that proposal receives ``w_prop`` of constant
    current (capped at ``prop_saturation``).  The seed is the most coherent
    pixel and is fixed to k = 0.
    """
    M, N = wrapped.shape
    dp = params.decision
    K = dp.K
    kvals = np.asarray(dp.k_values)
    seed = np.unravel_index(int(np.argmax(coherence)), coherence.shape)
    k = np.zeros((M, N), dtype=np.int64)
    decided = np.zeros((M, N), dtype=bool)
    visited = np.zeros((M, N), dtype=bool)
    latency = np.full((M, N), -1, dtype=np.int64)
    first = np.full((M, N, K), -1, dtype=np.int64)
    bias = np.zeros((M, N, K))
    gain, cap = params.propagation_gain, params.propagation_cap
    window = params.window
    k_to_idx = {int(kv): i for i, kv in enumerate(kvals)}
    for y, x in traversal_order(coherence, seed, order):
        if (y, x) == tuple(seed):
            visited[y, x] = decided[y, x] = True
            latency[y, x] = 0
            continue
        b = np.zeros(K)
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < M and 0 <= nx < N and visited[ny, nx]:
                proposal = int(np.round((wrapped[ny, nx] + TWO_PI * k[ny, nx] - wrapped[y, x]) / TWO_PI))
                if proposal in k_to_idx:
                    b[k_to_idx[proposal]] += gain
        b = np.minimum(b, cap)
        bias[y, x] = b
        f = _first_crossing(dec_drive[:, y, x, :], b, params.lif, window)
        first[y, x] = f
        kidx, dec, lat = select_k(f[None], None, replace(dp, readout="first_spike"))
        k[y, x] = kvals[kidx[0]]
        decided[y, x] = dec[0]
        latency[y, x] = lat[0]
        visited[y, x] = True
    return k, decided, latency, first, bias, seed


def infer(wrapped: PhaseRaster, coherence: CoherenceRaster, topology: NetworkTopology, mode: str = "one_shot",
          order: str = "raster", record_membrane: bool = False) -> InferenceResult:
    """Run the network on one scene and read out a wrap count per pixel.

    ``one_shot``: simulate all layers for ``T_sim`` steps; the decision
    neuron that fires first inside the decision window sets k (ties: smallest
    |k|, then smaller k).  Pixels without a decision get k = 0 and
    ``decided == False``.

    ``propagating``: the processing layer runs as in one_shot, then pixels
    are decided one at a time (see :func:`propagate`).
    """
    if wrapped.shape != (topology.height, topology.width) or coherence.shape != wrapped.shape:
        raise InvalidRaster(
            f"scene {wrapped.shape}/{coherence.shape} does not match topology {(topology.height, topology.width)}"
        )
    if mode not in ("one_shot", "propagating"):
        raise ValueError(f"unknown mode {mode!r}")
    params = topology.params
    dp = params.decision
    M, N, K = topology.height, topology.width, topology.K
    encoded = encode_scene(wrapped, coherence, params.encoder)
    proc = run_processing(topology, encoded, coherence)
    drive = None

    if mode == "one_shot":
        dec = run_decision(topology, proc.spikes, record_membrane=record_membrane)
        first = _first_spikes(dec.spikes, params.window).reshape(M, N, K)
        counts = dec.spikes[: params.window].sum(axis=0).reshape(M, N, K)
        kidx, decided, latency = select_k(first, counts, dp)
        k = np.asarray(dp.k_values)[kidx]
        bias = None
    else:
        drive = decision_drive(topology, proc.spikes)
        k, decided, latency, first, bias, _ = propagate(
            wrapped.values, coherence.values, drive.reshape(-1, M, N, K), params, order
        )
        dec = run_decision(topology, proc.spikes, bias=bias.reshape(-1), record_membrane=record_membrane)

    membrane = None
    mem_index = None
    if record_membrane:
        membrane = dec.membrane
        mem_index = dec.membrane_index + topology.n_pixels
    record = SpikeRecord(
        np.concatenate([proc.spikes, dec.spikes], axis=1), params.lif.dt, sources=proc.sources,
        membrane=membrane, membrane_index=mem_index,
    )
    trace = DecisionTrace(k=k, latency=latency, decided=decided, first_spikes=first, mode=mode,
                          untrained=topology.trained_epochs == 0, bias=bias)
    max_abs = max(abs(v) for v in dp.k_values)
    return InferenceResult(WrapCountRaster(k, max_abs_k=max_abs), record, trace, encoded, drive)


def decision_histogram(trace: DecisionTrace, k_values=None) -> dict:
    """Per-k pixel counts, undecided count and mean latency over decided pixels."""
    ks = trace.k.ravel()
    values = sorted(set(ks.tolist()) | set(k_values or ()))
    counts = {int(v): int(np.count_nonzero(ks == v)) for v in values}
    lat = trace.latency[trace.decided]
    return {
        "counts": counts,
        "no_decision": int(np.count_nonzero(~trace.decided)),
        "mean_latency_steps": float(lat.mean()) if lat.size else None,
        "n_pixels": int(ks.size),
    }


def permute_pixels(topology: NetworkTopology, perm: np.ndarray) -> NetworkTopology:
    """Relabel pixels: new pixel ``perm[p]`` carries the weights of old pixel ``p``.

    Only meaningful for permutations that preserve the grid neighbourhood
    (e.g. a vertical flip) when the lateral table is rebuilt by position.
    """
    perm = np.asarray(perm, dtype=np.int64)
    n = topology.n_pixels
    K = topology.K
    maps = topology.params.encoder.n_maps
    e = topology.enc_to_proc
    enc = SynapseTable((e.pre // n) * n + perm[e.pre % n], perm[e.post], e.weight, e.n_pre, e.n_post)
    d = topology.proc_to_dec
    dec = SynapseTable(perm[d.pre], perm[d.post // K] * K + d.post % K, d.weight, d.n_pre, d.n_post)
    l = topology.lateral
    lat = SynapseTable(perm[l.pre], perm[l.post], l.weight, l.n_pre, l.n_post)
    assert maps * n == e.n_pre
    return replace(topology, enc_to_proc=enc, lateral=lat, proc_to_dec=dec)


# ---------------------------------------------------------------------------
# SNUT v1 snapshot
#
#   0  4s  magic "SNUT"
#   4  u16 version (1)
#   6  u16 table count
#   8  u32 metadata length L
#   12 L bytes UTF-8 JSON metadata (grid, params, seed, trained epochs)
#   then per table: u64 n_pre, u64 n_post, u64 count, i64[count] pre,
#                   i64[count] post, f64[count] weight

SNUT_MAGIC = b"SNUT"
SNUT_VERSION = 1
_SNUT_HEAD = struct.Struct("<4sHHI")
_TABLE_HEAD = struct.Struct("<QQQ")
_TABLES = ("enc_to_proc", "lateral", "proc_to_dec")


def snapshot_bytes(topology: NetworkTopology) -> bytes:
    meta = {
        "height": topology.height,
        "width": topology.width,
        "rng_seed": topology.rng_seed,
        "trained_epochs": topology.trained_epochs,
        "params": topology.params.to_dict(),
    }
    meta_b = json.dumps(meta, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(_SNUT_HEAD.pack(SNUT_MAGIC, SNUT_VERSION, len(_TABLES), len(meta_b)))
    buf.write(meta_b)
    for name in _TABLES:
        t: SynapseTable = getattr(topology, name)
        buf.write(_TABLE_HEAD.pack(t.n_pre, t.n_post, len(t)))
        buf.write(t.pre.astype("<i8").tobytes())
        buf.write(t.post.astype("<i8").tobytes())
        buf.write(t.weight.astype("<f8").tobytes())
    return buf.getvalue()


def load_snapshot_bytes(data: bytes) -> NetworkTopology:
    if len(data) < _SNUT_HEAD.size:
        raise Truncated("snapshot shorter than header")
    magic, version, n_tables, meta_len = _SNUT_HEAD.unpack_from(data)
    if magic != SNUT_MAGIC:
        raise BadMagic(f"bad magic {magic!r}")
    if version != SNUT_VERSION:
        raise VersionMismatch(f"unsupported SNUT version {version}")
    if n_tables != len(_TABLES):
        raise FormatError(f"expected {len(_TABLES)} tables, found {n_tables}")
    off = _SNUT_HEAD.size
    if len(data) < off + meta_len:
        raise Truncated("metadata block truncated")
    meta = json.loads(data[off : off + meta_len].decode("utf-8"))
    off += meta_len
    tables = {}
    for name in _TABLES:
        if len(data) < off + _TABLE_HEAD.size:
            raise Truncated(f"table {name} header truncated")
        n_pre, n_post, count = _TABLE_HEAD.unpack_from(data, off)
        off += _TABLE_HEAD.size
        need = 24 * count
        if len(data) < off + need:
            raise Truncated(f"table {name} payload truncated")
        pre = np.frombuffer(data, "<i8", count, off)
        post = np.frombuffer(data, "<i8", count, off + 8 * count)
        w = np.frombuffer(data, "<f8", count, off + 16 * count)
        off += need
        tables[name] = SynapseTable(pre, post, w, n_pre, n_post)
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes after snapshot")
    return NetworkTopology(
        meta["height"], meta["width"], NetworkParams.from_dict(meta["params"]),
        tables["enc_to_proc"], tables["lateral"], tables["proc_to_dec"],
        rng_seed=meta["rng_seed"], trained_epochs=meta["trained_epochs"],
    )


def save_snapshot(topology: NetworkTopology, path) -> None:
    with open(path, "wb") as fh:
        fh.write(snapshot_bytes(topology))


def load_snapshot(path) -> NetworkTopology:
    with open(path, "rb") as fh:
        return load_snapshot_bytes(fh.read())
