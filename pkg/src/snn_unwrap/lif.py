"""Fixed-timestep leaky integrate-and-fire simulation.

Update rule for a non-refractory neuron over one step::

    v <- v + (dt / tau_m) * (-v + I_ext) + I_syn

``I_syn`` is the weighted sum of presynaptic spikes from the previous step.
Each spike is an impulse integrated exactly, so a weight is the membrane jump
one spike produces.  Neurons reaching ``v_threshold`` fire, are set to
``v_reset`` and ignore input for ``refractory_steps`` steps.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NumericalError


@dataclass(frozen=True)
class LifParams:
    tau_m: float = 10e-3
    v_threshold: float = 1.0
    v_reset: float = 0.0
    refractory_steps: int = 2
    dt: float = 1e-3

    def __post_init__(self):
        if self.tau_m <= 0 or self.dt <= 0:
            raise ValueError("tau_m and dt must be positive")
        if self.dt > self.tau_m:
            raise ValueError("dt must not exceed tau_m for explicit integration")
        if not self.v_threshold > self.v_reset:
            raise ValueError("v_threshold must exceed v_reset")
        if self.refractory_steps < 0:
            raise ValueError("refractory_steps must be >= 0")

    @property
    def leak(self) -> float:
        return self.dt / self.tau_m


@dataclass
class NeuronPopulation:
    v: np.ndarray
    refractory_remaining: np.ndarray
    spike_count: np.ndarray

    @classmethod
    def create(cls, size: int, v0=0.0) -> "NeuronPopulation":
        v = np.zeros(size, dtype=np.float64)
        v[:] = v0
        return cls(v, np.zeros(size, dtype=np.int64), np.zeros(size, dtype=np.int64))

    @property
    def size(self) -> int:
        return self.v.size

    def copy(self) -> "NeuronPopulation":
        return NeuronPopulation(self.v.copy(), self.refractory_remaining.copy(), self.spike_count.copy())


class SynapseTable:
    """Sparse synapses ``pre -> post`` with a fixed one-step delay.

    Entries are kept sorted by ``(post, pre)`` so the weight vector doubles as
    the data array of a CSR matrix of shape ``(n_post, n_pre)``; fan-in of a
    neuron is a contiguous slice and fan-out goes through a precomputed
    column permutation.
    """

    def __init__(self, pre, post, weight, n_pre: int, n_post: int):
        pre = np.asarray(pre, dtype=np.int64).ravel()
        post = np.asarray(post, dtype=np.int64).ravel()
        weight = np.asarray(weight, dtype=np.float64).ravel()
        if not (pre.size == post.size == weight.size):
            raise ValueError("pre, post and weight must have equal length")
        if pre.size and (pre.min() < 0 or pre.max() >= n_pre or post.min() < 0 or post.max() >= n_post):
            raise ValueError("synapse index out of range")
        if not np.all(np.isfinite(weight)):
            raise ValueError("synaptic weights must be finite")
        order = np.lexsort((pre, post))
        pre, post, weight = pre[order], post[order], weight[order]
        if pre.size > 1:
            dup = (np.diff(post) == 0) & (np.diff(pre) == 0)
            if dup.any():
                raise ValueError("duplicate (pre, post) synapse")
        self.pre = pre
        self.post = post
        self.weight = weight
        self.n_pre = int(n_pre)
        self.n_post = int(n_post)
        self.indptr = np.concatenate(([0], np.cumsum(np.bincount(post, minlength=self.n_post))))
        self._by_pre = np.lexsort((post, pre))
        self._pre_ptr = np.concatenate(([0], np.cumsum(np.bincount(pre, minlength=self.n_pre))))
        self._matrix = None

    @classmethod
    def empty(cls, n_pre: int, n_post: int) -> "SynapseTable":
        return cls([], [], [], n_pre, n_post)

    def __len__(self) -> int:
        return self.weight.size

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            self._matrix = sp.csr_matrix(
                (self.weight, self.pre.astype(np.int32), self.indptr.astype(np.int32)),
                shape=(self.n_post, self.n_pre),
            )
        return self._matrix

    def with_weights(self, weight) -> "SynapseTable":
        """Same structure, new weights (given in this table's entry order)."""
        weight = np.asarray(weight, dtype=np.float64)
        if weight.shape != self.weight.shape:
            raise ValueError("weight vector does not match table size")
        if not np.all(np.isfinite(weight)):
            raise ValueError("synaptic weights must be finite")
        new = object.__new__(SynapseTable)
        new.__dict__.update(self.__dict__)
        new.weight = weight.copy()
        new._matrix = None
        return new

    def fan_in(self, post: int) -> np.ndarray:
        """Entry indices targeting ``post``."""
        return np.arange(self.indptr[post], self.indptr[post + 1])

    def fan_out(self, pre: int) -> np.ndarray:
        """Entry indices leaving ``pre``."""
        return self._by_pre[self._pre_ptr[pre] : self._pre_ptr[pre + 1]]

    def out_degree(self) -> np.ndarray:
        return np.diff(self._pre_ptr)

    def in_degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def lookup(self, pre: int, post: int):
        idx = self.fan_in(post)
        hit = idx[self.pre[idx] == pre]
        return float(self.weight[hit[0]]) if hit.size else None

    def propagate(self, spikes) -> np.ndarray:
        """Weighted sum of ``spikes`` (length ``n_pre``) per postsynaptic neuron."""
        return self.matrix @ np.asarray(spikes, dtype=np.float64)

    def __eq__(self, other):
        if not isinstance(other, SynapseTable):
            return NotImplemented
        return (self.n_pre == other.n_pre and self.n_post == other.n_post
                and np.array_equal(self.pre, other.pre) and np.array_equal(self.post, other.post)
                and np.array_equal(self.weight, other.weight))


def _advance(pop: NeuronPopulation, p: LifParams, i_ext, i_syn, v_pre_out=None) -> np.ndarray:
    """In-place single step; returns the boolean fired mask."""
    active = pop.refractory_remaining == 0
    v_pre = np.where(active, pop.v + p.leak * (i_ext - pop.v) + i_syn, p.v_reset)
    fired = active & (v_pre >= p.v_threshold)
    if v_pre_out is not None:
        v_pre_out[...] = v_pre
    pop.v = np.where(fired, p.v_reset, v_pre)
    pop.refractory_remaining = np.where(active, 0, pop.refractory_remaining - 1)
    pop.refractory_remaining[fired] = p.refractory_steps
    pop.spike_count += fired
    return fired


def _check_finite(x, what, t=None):
    if not np.all(np.isfinite(x)):
        raise NumericalError(f"non-finite {what}", timestep=t)


def step(pop: NeuronPopulation, p: LifParams, input_current=0.0, incoming_spikes=0.0):
    """Advance ``pop`` by one step without mutating it.

    ``incoming_spikes`` is the already-weighted synaptic input per neuron.
    Returns ``(new_population, fired_indices)`` with indices ascending.
    """
    i_ext = np.broadcast_to(np.asarray(input_current, dtype=np.float64), pop.v.shape)
    i_syn = np.broadcast_to(np.asarray(incoming_spikes, dtype=np.float64), pop.v.shape)
    _check_finite(i_ext, "input current")
    _check_finite(i_syn, "synaptic input")
    new = pop.copy()
    fired = _advance(new, p, i_ext, i_syn)
    return new, np.flatnonzero(fired)


@dataclass(eq=False)
class SpikeRecord:
    """Spikes of a simulated population, ``spikes[t, neuron]``.

    ``sources`` holds the external spike sources that fed the run (e.g. the
    encoding layer) and ``membrane`` the pre-reset membrane potentials of
    the neurons listed in ``membrane_index`` when they were recorded.
    """

    spikes: np.ndarray
    dt: float
    sources: np.ndarray | None = None
    membrane: np.ndarray | None = None
    membrane_index: np.ndarray | None = None

    @classmethod
    def from_spikes(cls, spikes, dt: float = 1e-3) -> "SpikeRecord":
        s = np.asarray(spikes, dtype=bool)
        return cls(s.reshape(s.shape[0], -1), dt)

    @property
    def T_sim(self) -> int:
        return self.spikes.shape[0]

    @property
    def n_neurons(self) -> int:
        return self.spikes.shape[1]

    @property
    def spike_count(self) -> np.ndarray:
        return self.spikes.sum(axis=0)

    @property
    def step_totals(self) -> np.ndarray:
        return self.spikes.sum(axis=1)

    @property
    def total_spikes(self) -> int:
        return int(self.spikes.sum())

    @property
    def total_with_sources(self) -> int:
        return self.total_spikes + (int(self.sources.sum()) if self.sources is not None else 0)

    def events(self) -> list[tuple[int, int]]:
        """(neuron, t) pairs sorted by time then neuron."""
        t, n = np.nonzero(self.spikes)
        return list(zip(n.tolist(), t.tolist()))

    def first_spike_times(self) -> np.ndarray:
        """Step of each neuron's first spike, -1 if silent."""
        fired = self.spikes.any(axis=0)
        first = np.argmax(self.spikes, axis=0)
        return np.where(fired, first, -1)

    def __eq__(self, other):
        if not isinstance(other, SpikeRecord):
            return NotImplemented
        return self.dt == other.dt and np.array_equal(self.spikes, other.spikes)


def _schedule(input_schedule, n: int, T_sim: int):
    if input_schedule is None:
        zero = np.zeros(n)
        return lambda t: zero
    if callable(input_schedule):
        return input_schedule
    arr = np.asarray(input_schedule, dtype=np.float64)
    if arr.ndim == 0 or arr.shape == (n,):
        const = np.broadcast_to(arr, (n,))
        return lambda t: const
    if arr.ndim == 2 and arr.shape[1] == n and arr.shape[0] >= T_sim:
        return lambda t: arr[t]
    raise ValueError(f"input schedule of shape {arr.shape} does not cover {T_sim} steps x {n} neurons")


def run(pop: NeuronPopulation, p: LifParams, T_sim: int, input_schedule=None, synapses=None,
        sources=None, record_membrane=None) -> SpikeRecord:
    """Simulate ``T_sim`` steps, mutating ``pop`` in place.

    Presynaptic indices of ``synapses`` address ``[sources | population]``:
    the first ``sources.shape[1]`` ids are external spike sources (a
    ``(T_sim, n_src)`` bool array), the rest the population itself.  Spikes
    emitted at step ``t`` arrive at step ``t + 1``.  ``synapses`` may be a
    :class:`SynapseTable` or a ready ``(n, n_src + n)`` sparse matrix.
    """
    n = pop.size
    n_src = 0 if sources is None else sources.shape[1]
    if sources is not None and sources.shape[0] < T_sim:
        raise ValueError("source spikes do not cover the simulation window")
    W = None
    if synapses is not None:
        W = synapses.tocsr() if sp.issparse(synapses) else synapses.matrix
        if W.shape != (n, n_src + n):
            raise ValueError(f"synapse matrix is {W.shape}, expected {(n, n_src + n)}")
        if W.nnz == 0:
            W = None
    drive = _schedule(input_schedule, n, T_sim)
    spikes = np.zeros((T_sim, n), dtype=bool)

    mem_index = None
    membrane = None
    if record_membrane is not None and record_membrane is not False:
        mem_index = np.arange(n) if record_membrane is True else np.asarray(record_membrane, dtype=np.int64)
        membrane = np.zeros((T_sim, mem_index.size))
    v_pre = np.empty(n) if membrane is not None else None

    prev = np.zeros(n_src + n)
    for t in range(T_sim):
        i_ext = np.broadcast_to(np.asarray(drive(t), dtype=np.float64), (n,))
        _check_finite(i_ext, "input current", t)
        i_syn = W @ prev if W is not None else 0.0
        if W is not None:
            _check_finite(i_syn, "synaptic input", t)
        fired = _advance(pop, p, i_ext, i_syn, v_pre)
        if membrane is not None:
            membrane[t] = v_pre[mem_index]
        spikes[t] = fired
        if W is not None:
            if n_src:
                prev[:n_src] = sources[t]
            prev[n_src:] = fired
    src = None if sources is None else np.asarray(sources[:T_sim], dtype=bool)
    return SpikeRecord(spikes, p.dt, sources=src, membrane=membrane, membrane_index=mem_index)


def activity_stats(record: SpikeRecord) -> dict:
    """Mean rate (Hz), mean spikes per neuron and fraction of neurons that spiked."""
    n = record.n_neurons
    if n == 0 or record.T_sim == 0:
        return {"total_spikes": 0, "mean_rate_hz": 0.0, "spikes_per_neuron": 0.0, "active_fraction": 0.0}
    total = record.total_spikes
    return {
        "total_spikes": total,
        "mean_rate_hz": total / (n * record.T_sim * record.dt),
        "spikes_per_neuron": total / n,
        "active_fraction": float(np.count_nonzero(record.spike_count) / n),
    }


def export_record(record: SpikeRecord, csv_path, json_path=None) -> dict:
    """CSV ``neuron_id,timestep`` plus an optional JSON activity summary."""
    t, n = np.nonzero(record.spikes)
    order = np.lexsort((t, n))
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["neuron_id", "timestep"])
        for i in order:
            writer.writerow([int(n[i]), int(t[i])])
    summary = activity_stats(record)
    if json_path is not None:
        with open(json_path, "w") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
    return summary
