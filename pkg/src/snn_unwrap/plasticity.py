"""Hybrid learning: STDP on the feedforward tables plus a supervised,
surrogate-gradient term on the processing -> decision synapses.

Per update the learnable weights move by

    dw = eta1 * STDP + eta2 * e - eta2 * lambda * w

and are clipped to ``weight_clip``.  The lateral table never changes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidDataset, TraceIncomplete
from .lif import LifParams, SpikeRecord, SynapseTable
from .network import NetworkTopology, infer
from .raster_io import CoherenceRaster, PhaseRaster, WrapCountRaster


@dataclass(frozen=True)
class StdpParams:
    a_plus: float = 0.01
    a_minus: float = 0.012
    tau_plus: float = 20e-3
    tau_minus: float = 20e-3
    window: int = 60  # steps
    dt: float = 1e-3

    def __post_init__(self):
        for name in ("a_plus", "a_minus", "tau_plus", "tau_minus", "window", "dt"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.window * self.dt < 3.0 * max(self.tau_plus, self.tau_minus) - 1e-12:
            raise ValueError("STDP window must cover at least three time constants")


@dataclass(frozen=True)
class LearnParams:
    eta1: float = 1e-3
    eta2: float = 1e-2
    beta: float = 1.0
    lam: float = 1e-4
    epochs: int = 50
    batch: int = 4
    weight_clip: tuple[float, float] = (-1.0, 1.0)
    rng_seed: int = 0
    stdp: StdpParams = field(default_factory=StdpParams)

    def __post_init__(self):
        if self.eta1 < 0 or self.eta2 < 0:
            raise ValueError("learning rates must be non-negative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.epochs < 0 or self.batch < 1:
            raise ValueError("epochs >= 0 and batch >= 1 required")
        lo, hi = self.weight_clip
        if not lo < hi:
            raise ValueError("weight_clip needs w_min < w_max")
        object.__setattr__(self, "weight_clip", (float(lo), float(hi)))


def stdp_kernel(delta_t, p: StdpParams):
    """Weight change for ``delta_t = t_post - t_pre`` in steps.

    Positive (pre before post) potentiates, negative depresses, zero gives 0.
    Pairs further apart than ``window`` contribute nothing.
    """
    d = np.asarray(delta_t, dtype=np.float64)
    inside = np.abs(d) <= p.window
    d = np.where(inside, d, 0.0)
    out = np.where(
        d > 0,
        p.a_plus * np.exp(-d * p.dt / p.tau_plus),
        np.where(d < 0, -p.a_minus * np.exp(d * p.dt / p.tau_minus), 0.0),
    )
    out = np.where(inside, out, 0.0)
    return out.item() if out.ndim == 0 else out


def _expand(ptr: np.ndarray, ids: np.ndarray):
    """For CSR-style ``ptr`` and row ids, return (row position, slot) per slot."""
    counts = ptr[ids + 1] - ptr[ids]
    rep = np.repeat(np.arange(ids.size), counts)
    first = np.repeat(np.cumsum(counts) - counts, counts)
    return rep, ptr[ids][rep] + np.arange(rep.size) - first


def stdp_deltas(pre_spikes: np.ndarray, post_spikes: np.ndarray, table: SynapseTable, p: StdpParams) -> np.ndarray:
    """Summed STDP change per synapse of ``table`` (entry order).

    Nearest-neighbour pairing: every post spike pairs with the closest pre
    spike of the same synapse within the window.  A post spike equidistant
    from two pre spikes splits the pairing evenly between them.
    """
    out = np.zeros(len(table))
    tp, ip = np.nonzero(np.asarray(post_spikes, dtype=bool))
    tq, jq = np.nonzero(np.asarray(pre_spikes, dtype=bool))
    if len(table) == 0 or tp.size == 0 or tq.size == 0:
        return out
    rep, ent = _expand(table.indptr, ip)
    t = tp[rep]
    j = table.pre[ent]
    stride = np.int64(max(post_spikes.shape[0], pre_spikes.shape[0]) + 1)
    keys = np.sort(jq * stride + tq)
    q = j * stride + t
    far = np.int64(1) << 40
    i_prev = np.searchsorted(keys, q, side="right") - 1
    kp = keys[np.maximum(i_prev, 0)]
    before = np.where((i_prev >= 0) & (kp // stride == j), t - kp % stride, far)
    i_next = np.searchsorted(keys, q, side="left")
    kn = keys[np.minimum(i_next, keys.size - 1)]
    after = np.where((i_next < keys.size) & (kn // stride == j), t - kn % stride, -far)
    tie = before == -after
    d = np.where(before < -after, before, after)
    dw = stdp_kernel(d, p)
    dw = np.where(tie, 0.5 * (stdp_kernel(before, p) + stdp_kernel(np.where(tie, after, 0), p)), dw)
    return np.bincount(ent, weights=dw, minlength=len(table)).astype(np.float64)


def surrogate_factor(v, p: LearnParams, lif: LifParams | None = None):
    """``1 / (1 + beta * |v - V_th|)``: 1 at threshold, decaying away from it."""
    v_th = (lif or LifParams()).v_threshold
    out = 1.0 / (1.0 + p.beta * np.abs(np.asarray(v, dtype=np.float64) - v_th))
    return out.item() if out.ndim == 0 else out


def surrogate_gradient(membrane: np.ndarray, pre_spikes: np.ndarray, table: SynapseTable, p: LearnParams,
                       lif: LifParams | None = None, post_spikes: np.ndarray | None = None) -> np.ndarray:
    """Per-synapse ``sum_t surrogate(v_post(t)) * [pre spiked at t-1]``.

    ``membrane`` is ``(T, n_post)``, ``pre_spikes`` is ``(T, n_pre)``.  When
    ``post_spikes`` is given the sum stops at each postsynaptic neuron's
    first spike: later input cannot move the spike the readout uses.
    """
    membrane = np.asarray(membrane, dtype=np.float64)
    tq, jq = np.nonzero(np.asarray(pre_spikes, dtype=bool)[:-1])
    if len(table) == 0 or tq.size == 0:
        return np.zeros(len(table))
    rep, slot = _expand(table._pre_ptr, jq)
    ent = table._by_pre[slot]
    t_arr = tq[rep] + 1
    post = table.post[ent]
    if post_spikes is not None:
        post_spikes = np.asarray(post_spikes, dtype=bool)
        first = np.where(post_spikes.any(axis=0), np.argmax(post_spikes, axis=0), post_spikes.shape[0])
        keep = t_arr <= first[post]
        t_arr, post, ent = t_arr[keep], post[keep], ent[keep]
    vals = surrogate_factor(membrane[t_arr, post], p, lif)
    return np.bincount(ent, weights=np.atleast_1d(vals), minlength=len(table)).astype(np.float64)


def _decision_membrane(record: SpikeRecord, topology: NetworkTopology) -> np.ndarray:
    n_pix = topology.n_pixels
    n_dec = topology.K * n_pix
    if record.membrane is None or record.membrane_index is None:
        raise TraceIncomplete("decision-layer membrane history was not recorded")
    idx = np.asarray(record.membrane_index) - n_pix
    if idx.size == n_dec and np.array_equal(idx, np.arange(n_dec)):
        return record.membrane
    full = np.full((record.membrane.shape[0], n_dec), np.nan)
    ok = (idx >= 0) & (idx < n_dec)
    full[:, idx[ok]] = record.membrane[:, ok]
    if np.isnan(full[0]).any():
        raise TraceIncomplete("membrane history does not cover every decision neuron")
    return full


def supervised_error(k_target: WrapCountRaster, trace, record: SpikeRecord, topology: NetworkTopology,
                     p: LearnParams) -> np.ndarray:
    """Error term per processing -> decision synapse (table entry order).

    For a pixel with ``dk = k_target - k_pred != 0`` the synapses onto the
    target-k neuron receive ``+|dk| * g`` and those onto the neuron that won
    (if any fired) receive ``-|dk| * g``, where ``g`` is the surrogate
    gradient of the synapse up to the postsynaptic neuron's first spike.  Target values outside ``k_values`` are skipped.
    """
    n_pix = topology.n_pixels
    K = topology.K
    kvals = list(topology.params.decision.k_values)
    membrane = _decision_membrane(record, topology)
    proc_spikes = record.spikes[:, :n_pix]
    table = topology.proc_to_dec
    g = surrogate_gradient(membrane, proc_spikes, table, p, topology.params.lif,
                           post_spikes=record.spikes[:, n_pix:])

    kt = np.asarray(k_target.values).ravel()
    kp = np.asarray(trace.k).ravel()
    decided = np.asarray(trace.decided).ravel()
    dk = kt - kp
    sign = np.zeros(K * n_pix)
    lookup = {kv: i for i, kv in enumerate(kvals)}
    for pix in np.flatnonzero(dk):
        mag = abs(int(dk[pix]))
        ti = lookup.get(int(kt[pix]))
        if ti is not None:
            sign[pix * K + ti] += mag
        if decided[pix]:
            sign[pix * K + lookup[int(kp[pix])]] -= mag
    return sign[table.post] * g


def apply_update(topology: NetworkTopology, stdp, e, p: LearnParams) -> NetworkTopology:
    """New topology with ``dw = eta1*stdp + eta2*e - eta2*lambda*w`` clipped.

    ``stdp`` and ``e`` are indexed over the learnable weights
    (``[enc_to_proc | proc_to_dec]``); either may be ``None`` for zero.
    """
    w = topology.learnable_weights()
    stdp = np.zeros_like(w) if stdp is None else np.asarray(stdp, dtype=np.float64)
    e = np.zeros_like(w) if e is None else np.asarray(e, dtype=np.float64)
    if stdp.shape != w.shape or e.shape != w.shape:
        raise ValueError(f"updates must have shape {w.shape}")
    if p.eta1 == 0 and p.eta2 == 0:
        return topology
    new = w + p.eta1 * stdp + p.eta2 * e - p.eta2 * p.lam * w
    new = np.clip(new, *p.weight_clip)
    n_enc = len(topology.enc_to_proc)
    return topology.with_learnable(new[:n_enc], new[n_enc:])


@dataclass
class EpochRecord:
    epoch: int  # 1-based
    energy: float
    accuracy: float
    total_spikes: int
    weight_norm: float


@dataclass
class TrainingTrace:
    records: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def energy(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def accuracy(self) -> np.ndarray:
        return np.array([r.accuracy for r in self.records])

    def moving_average(self, window: int = 5) -> np.ndarray:
        e = self.energy
        if e.size < window:
            return np.zeros(0)
        return np.convolve(e, np.ones(window) / window, mode="valid")

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["epoch", "energy", "accuracy", "total_spikes", "weight_norm"])
            for r in self.records:
                w.writerow([r.epoch, repr(r.energy), repr(r.accuracy), r.total_spikes, repr(r.weight_norm)])

    @classmethod
    def from_csv(cls, path) -> "TrainingTrace":
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([EpochRecord(int(r["epoch"]), float(r["energy"]), float(r["accuracy"]),
                                int(r["total_spikes"]), float(r["weight_norm"])) for r in rows])

    def __eq__(self, other):
        if not isinstance(other, TrainingTrace):
            return NotImplemented
        return self.records == other.records


def _check_dataset(dataset, topology: NetworkTopology):
    if not dataset:
        raise InvalidDataset("training dataset is empty")
    shape = (topology.height, topology.width)
    out = []
    for i, item in enumerate(dataset):
        wrapped, coherence, k_truth = item
        if not (isinstance(wrapped, PhaseRaster) and isinstance(coherence, CoherenceRaster)
                and isinstance(k_truth, WrapCountRaster)):
            raise InvalidDataset(f"scene {i} is not a (PhaseRaster, CoherenceRaster, WrapCountRaster) triple")
        if wrapped.shape != shape or coherence.shape != shape or k_truth.shape != shape:
            raise InvalidDataset(f"scene {i} does not match the {shape[0]}x{shape[1]} topology")
        out.append((wrapped, coherence, k_truth))
    return out


def scene_gradients(topology: NetworkTopology, wrapped, coherence, k_truth, p: LearnParams):
    """One forward pass and its learning signals.

    Returns ``(stdp, e, sq_error, correct, spikes)`` with ``stdp`` and ``e``
    over the learnable weights.
    """
    res = infer(wrapped, coherence, topology, mode="one_shot", record_membrane=True)
    n_pix = topology.n_pixels
    proc = res.record.spikes[:, :n_pix]
    dec = res.record.spikes[:, n_pix:]
    stdp_enc = stdp_deltas(res.record.sources, proc, topology.enc_to_proc, p.stdp)
    stdp_dec = stdp_deltas(proc, dec, topology.proc_to_dec, p.stdp)
    e_dec = supervised_error(k_truth, res.trace, res.record, topology, p)
    stdp = np.concatenate([stdp_enc, stdp_dec])
    e = np.concatenate([np.zeros(len(topology.enc_to_proc)), e_dec])
    diff = res.k.values - k_truth.values
    sq = int(np.sum(diff * diff))
    correct = int(np.count_nonzero(diff == 0))
    return stdp, e, sq, correct, res.record.total_with_sources


def objective(sq_error: float, topology: NetworkTopology, p: LearnParams) -> float:
    """``sum (k - k_true)^2 + lambda * 0.5 * ||w||^2`` over the learnable weights."""
    w = topology.learnable_weights()
    return float(sq_error) + p.lam * 0.5 * math.fsum(w * w)


def train(dataset, topology: NetworkTopology, p: LearnParams | None = None, trace: TrainingTrace | None = None,
          epochs: int | None = None, on_epoch=None):
    """Train for ``epochs`` more epochs (default ``p.epochs`` minus those done).

    Each epoch visits the scenes in an order drawn from
    ``default_rng([rng_seed, epoch])``, so resuming from a checkpoint
    reproduces an uninterrupted run.  Per epoch the trace records the summed
    squared wrap-count error of that epoch's forward passes plus the
    regulariser at the epoch's final weights.  ``on_epoch(topology, record)``
    is called after each epoch.
    """
    p = p or LearnParams()
    scenes = _check_dataset(dataset, topology)
    trace = trace if trace is not None else TrainingTrace()
    start = topology.trained_epochs
    if epochs is None:
        epochs = max(0, p.epochs - start)
    n_pix = topology.n_pixels
    n_w = len(topology.enc_to_proc) + len(topology.proc_to_dec)
    for epoch in range(start + 1, start + epochs + 1):
        order = np.random.default_rng([p.rng_seed, epoch]).permutation(len(scenes))
        sq_total = correct_total = spikes_total = 0
        for lo in range(0, len(order), p.batch):
            stdp = np.zeros(n_w)
            e = np.zeros(n_w)
            for i in order[lo : lo + p.batch]:
                s, g, sq, correct, spikes = scene_gradients(topology, *scenes[i], p)
                stdp += s
                e += g
                sq_total += sq
                correct_total += correct
                spikes_total += spikes
            topology = apply_update(topology, stdp, e, p)
        topology = _with_epochs(topology, epoch)
        w = topology.learnable_weights()
        rec = EpochRecord(
            epoch=epoch,
            energy=objective(sq_total, topology, p),
            accuracy=correct_total / (n_pix * len(scenes)),
            total_spikes=int(spikes_total),
            weight_norm=math.sqrt(math.fsum(w * w)),
        )
        trace.records.append(rec)
        if on_epoch is not None:
            on_epoch(topology, rec)
    return topology, trace


def _with_epochs(topology: NetworkTopology, epochs: int) -> NetworkTopology:
    return replace(topology, trained_epochs=epochs)
