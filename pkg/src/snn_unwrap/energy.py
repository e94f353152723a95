"""Spike-count energy model, a power-envelope GPU baseline and operation counts.

SNN energy is ``N_spikes * e_spike + n_neurons * T * e_leak``; the GPU
figure is ``p_gpu * t_process``.  Both are models, not measurements.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from .lif import SpikeRecord

CAVEAT = (
    "model-based estimate: the GPU figure is a power-envelope model "
    "(p_gpu x t_process), not a measurement, and the SNN figure assumes "
    "per-spike and per-neuron-step hardware constants"
)
SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class HardwareProfile:
    e_spike: float = 23e-12  # J per spike
    e_leak: float = 1e-13  # J per neuron per timestep
    label: str = "neuromorphic (Loihi 2 class)"

    def __post_init__(self):
        if not (self.e_spike > 0 and self.e_leak > 0):
            raise ValueError("hardware energies must be positive")


@dataclass(frozen=True)
class GpuBaseline:
    p_gpu: float = 300.0  # W
    t_process: float = 0.0  # s
    label: str = "user-supplied"

    def __post_init__(self):
        if not self.p_gpu > 0:
            raise ValueError("p_gpu must be positive")
        if not self.t_process >= 0:
            raise ValueError("t_process must be non-negative")


def snn_energy(record, n_neurons: int, T: int, hw: HardwareProfile | None = None) -> float:
    """Joules for a run; ``record`` is a SpikeRecord (sources included) or a spike count."""
    hw = hw or HardwareProfile()
    n_spikes = record.total_with_sources if isinstance(record, SpikeRecord) else int(record)
    return n_spikes * hw.e_spike + n_neurons * T * hw.e_leak


def gpu_energy(b: GpuBaseline) -> float:
    return b.p_gpu * b.t_process


def measure_baseline(fn, *args, p_gpu: float = 300.0, repeats: int = 3) -> GpuBaseline:
    """Baseline whose ``t_process`` is the best host wall time of ``fn(*args)``."""
    best = math.inf
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return GpuBaseline(p_gpu=p_gpu, t_process=best, label="host-measured classical oracle wall time")


@dataclass(frozen=True)
class ComplexityReport:
    M: int
    N: int
    r: float  # mean rate of presynaptic neurons, Hz
    T: int  # timesteps
    C: float  # mean synaptic fan-out of presynaptic neurons
    S: float  # mean spikes per neuron
    op_count_snn: int  # counted spike-synapse events
    op_count_classical: float  # MN log2(MN)
    op_formula_snn: float  # n_pre * r * T * dt * C
    n_pre: int = 0
    dt: float = 1e-3

    @property
    def relative_gap(self) -> float:
        if self.op_formula_snn == 0:
            return 0.0 if self.op_count_snn == 0 else math.inf
        return abs(self.op_count_snn - self.op_formula_snn) / self.op_formula_snn

    def to_dict(self) -> dict:
        d = asdict(self)
        d["relative_gap"] = self.relative_gap
        return d


def count_events(spike_counts, out_degree) -> int:
    """Spike-synapse propagation events: each spike is delivered once per outgoing synapse."""
    return int(np.dot(np.asarray(spike_counts, dtype=np.int64), np.asarray(out_degree, dtype=np.int64)))


def complexity_report(spike_counts, out_degree, M: int, N: int, T: int, dt: float = 1e-3) -> ComplexityReport:
    """Counted events next to the ``n * r * T * C`` estimate for one presynaptic population."""
    counts = np.asarray(spike_counts, dtype=np.int64)
    deg = np.asarray(out_degree, dtype=np.int64)
    if counts.shape != deg.shape:
        raise ValueError("spike_counts and out_degree must align")
    n = counts.size
    S = float(counts.sum() / n) if n else 0.0
    r = S / (T * dt) if T and n else 0.0
    C = float(deg.sum() / n) if n else 0.0
    mn = M * N
    return ComplexityReport(
        M=M, N=N, r=r, T=T, C=C, S=S,
        op_count_snn=count_events(counts, deg),
        op_count_classical=mn * math.log2(mn) if mn > 1 else 0.0,
        op_formula_snn=n * r * T * dt * C,
        n_pre=n, dt=dt,
    )


def network_complexity(result, topology, coherence) -> ComplexityReport:
    """Complexity of an inference run over every presynaptic neuron (encoding + processing).

    Lateral synapses gated to zero weight by low coherence still count as
    connections.
    """
    n_pix = topology.n_pixels
    enc_counts = result.record.sources.sum(axis=0)
    proc_counts = result.record.spikes[:, :n_pix].sum(axis=0)
    enc_deg = topology.enc_to_proc.out_degree()
    lat = topology.lateral_for(coherence)
    proc_deg = lat.out_degree() + topology.proc_to_dec.out_degree()
    return complexity_report(
        np.concatenate([enc_counts, proc_counts]),
        np.concatenate([enc_deg, proc_deg]),
        topology.height, topology.width, result.record.T_sim, result.record.dt,
    )


@dataclass
class EnergyLedger:
    """Additive tally of spikes, neuron-steps and synaptic events over runs."""

    n_spikes: int = 0
    neuron_steps: int = 0
    synaptic_events: int = 0
    runs: int = 0

    @classmethod
    def from_run(cls, record: SpikeRecord, n_neurons: int, T: int | None = None, synaptic_events: int = 0):
        T = record.T_sim if T is None else T
        return cls(record.total_with_sources, n_neurons * T, int(synaptic_events), 1)

    def add(self, record: SpikeRecord, n_neurons: int, T: int | None = None, synaptic_events: int = 0) -> None:
        other = EnergyLedger.from_run(record, n_neurons, T, synaptic_events)
        self.n_spikes += other.n_spikes
        self.neuron_steps += other.neuron_steps
        self.synaptic_events += other.synaptic_events
        self.runs += 1

    def __add__(self, other: "EnergyLedger") -> "EnergyLedger":
        if not isinstance(other, EnergyLedger):
            return NotImplemented
        return EnergyLedger(self.n_spikes + other.n_spikes, self.neuron_steps + other.neuron_steps,
                            self.synaptic_events + other.synaptic_events, self.runs + other.runs)

    def energy(self, hw: HardwareProfile | None = None) -> float:
        hw = hw or HardwareProfile()
        return self.n_spikes * hw.e_spike + self.neuron_steps * hw.e_leak

    def to_dict(self, hw: HardwareProfile | None = None) -> dict:
        d = asdict(self)
        d["joules"] = self.energy(hw)
        return d


@dataclass
class EfficiencyReport:
    snn_joules: float
    gpu_joules: float
    ratio: float | None  # gpu / snn; None when snn == 0
    ratio_unbounded: bool
    caveat: str
    complexity: ComplexityReport | None = None
    hardware: HardwareProfile | None = None
    baseline: GpuBaseline | None = None

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "snn_joules": self.snn_joules,
            "gpu_joules": self.gpu_joules,
            "ratio": self.ratio,
            "ratio_unbounded": self.ratio_unbounded,
            "caveat": self.caveat,
            "complexity": None if self.complexity is None else self.complexity.to_dict(),
            "hardware": None if self.hardware is None else asdict(self.hardware),
            "baseline": None if self.baseline is None else asdict(self.baseline),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        ratio = "unbounded (SNN energy is zero)" if self.ratio_unbounded else f"{self.ratio:.6g}"
        lines = [
            f"SNN energy (J)      {self.snn_joules:.6g}",
            f"GPU energy (J)      {self.gpu_joules:.6g}",
            f"GPU/SNN ratio       {ratio}",
        ]
        if self.complexity is not None:
            c = self.complexity
            lines += [
                f"counted SNN ops     {c.op_count_snn}",
                f"formula SNN ops     {c.op_formula_snn:.6g}",
                f"classical ops       {c.op_count_classical:.6g}",
                f"mean rate (Hz)      {c.r:.6g}",
                f"mean fan-out        {c.C:.6g}",
                f"spikes per neuron   {c.S:.6g}",
            ]
        lines.append(f"note: {self.caveat}")
        return "\n".join(lines)


def efficiency_report(snn: float, gpu: float, complexity: ComplexityReport | None = None,
                      hardware: HardwareProfile | None = None, baseline: GpuBaseline | None = None) -> EfficiencyReport:
    if snn < 0 or gpu < 0:
        raise ValueError("energies must be non-negative")
    unbounded = snn == 0
    ratio = None if unbounded else gpu / snn
    return EfficiencyReport(snn, gpu, ratio, unbounded, CAVEAT, complexity, hardware, baseline)
