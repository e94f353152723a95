"""Two-neuron micro-network used by the surrogate sign-agreement checks.

One presynaptic source drives one LIF neuron through weight ``w``; the
neuron also receives a constant current so that it always crosses
threshold.  The first crossing is located to sub-step precision by linear
interpolation of the recorded membrane, which makes the finite-difference
response to a 1e-3 weight change visible despite the discrete clock.
"""

import numpy as np

from snn_unwrap.lif import LifParams, NeuronPopulation, SynapseTable, run
from snn_unwrap.plasticity import LearnParams, surrogate_gradient

T_MICRO = 60


def simulate(pre: np.ndarray, w: float, i_ext: float, lif: LifParams):
    syn = SynapseTable([0], [0], [w], 2, 1)
    return run(NeuronPopulation.create(1), lif, pre.shape[0], input_schedule=i_ext, synapses=syn,
               sources=pre, record_membrane=True)


def crossing_time(rec, lif: LifParams) -> float | None:
    f = int(rec.first_spike_times()[0])
    if f < 0:
        return None
    v = rec.membrane[:, 0]
    prev = v[f - 1] if f > 0 else 0.0
    return f - 1 + (lif.v_threshold - prev) / (v[f] - prev)


def trial(rng: np.random.Generator, lif: LifParams | None = None, p: LearnParams | None = None, dw: float = 1e-3):
    """Returns ``(sign of g_hat, sign of finite-difference advancement)`` or None if no spike."""
    lif = lif or LifParams()
    p = p or LearnParams()
    pre = (rng.random(T_MICRO) < rng.uniform(0.05, 0.5))[:, None]
    w = rng.uniform(-0.3, 0.3)
    i_ext = rng.uniform(1.05, 3.0)
    rec = simulate(pre, w, i_ext, lif)
    t0 = crossing_time(rec, lif)
    t1 = crossing_time(simulate(pre, w + dw, i_ext, lif), lif)
    if t0 is None or t1 is None:
        return None
    table = SynapseTable([0], [0], [w], 1, 1)
    g = surrogate_gradient(rec.membrane, pre, table, p, lif, post_spikes=rec.spikes)[0]
    fd = (t0 - t1) / dw  # advancement of the first spike per unit weight
    sg = 0 if g == 0 else int(np.sign(g))
    sf = 0 if abs(fd) < 1e-9 else int(np.sign(fd))
    return sg, sf


def agreement(n_trials: int, seed: int = 0) -> tuple[float, int]:
    rng = np.random.default_rng(seed)
    hits = total = 0
    for _ in range(n_trials):
        out = trial(rng)
        if out is None:
            continue
        total += 1
        hits += out[0] == out[1]
    return hits / total, total
