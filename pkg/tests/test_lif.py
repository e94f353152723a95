import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snn_unwrap.errors import NumericalError
from snn_unwrap.lif import (
    LifParams,
    NeuronPopulation,
    SpikeRecord,
    SynapseTable,
    activity_stats,
    export_record,
    run,
    step,
)


def euler_trace(i_ext, steps, tau=10e-3, dt=1e-3, v0=0.0):
    """Scalar sub-threshold recurrence, written without numpy."""
    out, v = [], v0
    for _ in range(steps):
        v = v + (dt / tau) * (i_ext - v)
        out.append(v)
    return out


def first_passage(i_ext, v_th=1.0, tau=10e-3, dt=1e-3):
    n, v = 0, 0.0
    while True:
        n += 1
        v = v + (dt / tau) * (i_ext - v)
        if v >= v_th:
            return n


def test_fixed_point():
    pop = NeuronPopulation.create(3)
    new, fired = step(pop, LifParams(), 0.0, 0.0)
    assert np.all(new.v == 0) and fired.size == 0


def test_euler_vs_closed_form():
    p = LifParams(v_threshold=5.0)
    pop = NeuronPopulation.create(1)
    for _ in range(10):
        pop, _ = step(pop, p, 1.0)
    expected = euler_trace(1.0, 10)[-1]
    assert pop.v[0] == expected
    assert pop.v[0] == pytest.approx(1 - 0.9 ** 10, abs=1e-12)
    assert pop.v[0] == pytest.approx(0.6513, abs=1e-4)
    assert abs(pop.v[0] - (1 - math.exp(-1))) < 0.05


def test_first_spike_step_seven():
    rec = run(NeuronPopulation.create(1), LifParams(), 20, input_schedule=2.0)
    # step index t corresponds to the (t+1)-th update
    assert rec.first_spike_times()[0] + 1 == 7
    assert first_passage(2.0) == 7


def test_step_does_not_mutate_and_orders_fired():
    pop = NeuronPopulation.create(4, v0=[0.95, 0.0, 0.99, 0.5])
    new, fired = step(pop, LifParams(), [2.0, 0.0, 2.0, 0.0])
    assert fired.tolist() == [0, 2]
    assert pop.v.tolist() == [0.95, 0.0, 0.99, 0.5]
    assert new.v[0] == 0.0 and new.refractory_remaining[0] == 2


def test_non_finite_current():
    with pytest.raises(NumericalError):
        step(NeuronPopulation.create(2), LifParams(), [0.0, np.nan])
    sched = np.zeros((10, 2))
    sched[4, 1] = np.inf
    with pytest.raises(NumericalError) as exc:
        run(NeuronPopulation.create(2), LifParams(), 10, input_schedule=sched)
    assert exc.value.timestep == 4


def test_params_validation():
    with pytest.raises(ValueError):
        LifParams(tau_m=1e-3, dt=2e-3)
    with pytest.raises(ValueError):
        LifParams(v_threshold=0.0, v_reset=0.0)


def test_empty_run():
    rec = run(NeuronPopulation.create(3), LifParams(), 0)
    assert rec.T_sim == 0 and rec.total_spikes == 0


def test_one_step_delay():
    syn = SynapseTable([0], [1], [0.7], 2, 2)
    rec = run(NeuronPopulation.create(2), LifParams(v_threshold=1.0), 10,
              input_schedule=lambda t: np.array([100.0, 0.0]) if t == 3 else np.zeros(2),
              synapses=syn, record_membrane=True)
    assert rec.spikes[3, 0]
    # neuron 1 sees nothing before t=4, then exactly the weight
    assert np.all(rec.membrane[:4, 1] == 0.0)
    assert rec.membrane[4, 1] == pytest.approx(0.7)


def test_sources_feed_population():
    src = np.zeros((6, 1), dtype=bool)
    src[2, 0] = True
    syn = SynapseTable([0], [0], [1.5], 2, 1)  # source 0 -> neuron 0 (index 1 is the neuron itself)
    rec = run(NeuronPopulation.create(1), LifParams(), 6, synapses=syn, sources=src)
    assert rec.spikes[:, 0].tolist() == [False, False, False, True, False, False]
    assert rec.total_with_sources == 2


def test_determinism():
    rng = np.random.default_rng(0)
    n = 20
    pre, post = np.nonzero(rng.random((n, n)) < 0.2)
    syn = SynapseTable(pre, post, rng.normal(0, 0.5, pre.size), n, n)
    sched = rng.uniform(0, 2, (50, n))
    a = run(NeuronPopulation.create(n), LifParams(), 50, sched, syn)
    b = run(NeuronPopulation.create(n), LifParams(), 50, sched, syn)
    assert a == b and a.total_spikes > 0


def test_record_totals():
    rec = run(NeuronPopulation.create(5), LifParams(), 40, input_schedule=np.linspace(0.5, 3, 5))
    assert rec.total_spikes == int(rec.spike_count.sum()) == int(rec.step_totals.sum())
    assert len(rec.events()) == rec.total_spikes


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=0.0, max_value=0.999), st.floats(min_value=-3, max_value=3))
def test_sub_threshold_never_fires(i_ext, v0):
    pop = NeuronPopulation.create(1, v0=min(v0, 0.999))
    rec = run(pop, LifParams(), 200, input_schedule=i_ext)
    assert rec.total_spikes == 0


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=1.01, max_value=20.0))
def test_periodic_firing_matches_first_passage(i_ext):
    p = LifParams()
    rec = run(NeuronPopulation.create(1), p, 300, input_schedule=i_ext)
    times = np.nonzero(rec.spikes[:, 0])[0]
    n = first_passage(i_ext)
    assert times[0] == n - 1
    # after reset, refractory steps pass, then the same climb repeats
    assert np.all(np.diff(times) == n + p.refractory_steps)


@settings(max_examples=60, deadline=None)
@given(st.floats(min_value=-5, max_value=0.99))
def test_decay_is_monotone(v0):
    rec = run(NeuronPopulation.create(1, v0=v0), LifParams(), 50, record_membrane=True)
    v = np.abs(rec.membrane[:, 0])
    assert np.all(np.diff(v) <= 0) and np.all(v <= abs(v0))


def test_refractory_contract_on_random_network():
    rng = np.random.default_rng(3)
    n = 30
    pre, post = np.nonzero(rng.random((n, n)) < 0.3)
    syn = SynapseTable(pre, post, rng.uniform(0, 1.0, pre.size), n, n)
    p = LifParams(refractory_steps=3)
    rec = run(NeuronPopulation.create(n), p, 200, rng.uniform(0, 3, (200, n)), syn)
    for i in range(n):
        t = np.nonzero(rec.spikes[:, i])[0]
        assert np.all(np.diff(t) > p.refractory_steps)


@settings(max_examples=40, deadline=None)
@given(st.floats(min_value=0.05, max_value=3.0))
def test_linearity_below_threshold(alpha):
    rng = np.random.default_rng(1)
    sched = rng.uniform(0, 0.3, (40, 4))
    p = LifParams(v_threshold=1e6)
    a = run(NeuronPopulation.create(4), p, 40, sched, record_membrane=True).membrane
    b = run(NeuronPopulation.create(4), p, 40, alpha * sched, record_membrane=True).membrane
    assert np.allclose(b, alpha * a, rtol=1e-12, atol=1e-15)


def test_permutation_invariance():
    rng = np.random.default_rng(5)
    n = 12
    pre, post = np.nonzero(rng.random((n, n)) < 0.3)
    w = rng.normal(0.3, 0.4, pre.size)
    sched = rng.uniform(0, 2.5, (60, n))
    perm = rng.permutation(n)
    inv = np.argsort(perm)
    a = run(NeuronPopulation.create(n), LifParams(), 60, sched, SynapseTable(pre, post, w, n, n))
    b = run(NeuronPopulation.create(n), LifParams(), 60, sched[:, perm],
            SynapseTable(inv[pre], inv[post], w, n, n))
    assert np.array_equal(a.spikes[:, perm], b.spikes)


def test_synapse_table_contracts():
    with pytest.raises(ValueError):
        SynapseTable([0, 0], [1, 1], [0.1, 0.2], 2, 2)
    with pytest.raises(ValueError):
        SynapseTable([0], [1], [np.nan], 2, 2)
    t = SynapseTable([2, 0, 1], [0, 1, 1], [0.5, -0.2, 0.3], 3, 2)
    assert t.lookup(1, 1) == 0.3 and t.lookup(2, 1) is None
    assert sorted(t.pre[t.fan_in(1)].tolist()) == [0, 1]
    assert t.post[t.fan_out(2)].tolist() == [0]
    assert t.out_degree().tolist() == [1, 1, 1]
    assert t.in_degree().tolist() == [1, 2]
    assert np.allclose(t.propagate([1, 1, 1]), [0.5, 0.1])


def test_activity_stats():
    silent = SpikeRecord.from_spikes(np.zeros((10, 4), dtype=bool))
    assert activity_stats(silent) == {"total_spikes": 0, "mean_rate_hz": 0.0, "spikes_per_neuron": 0.0,
                                      "active_fraction": 0.0}
    full = activity_stats(SpikeRecord.from_spikes(np.ones((100, 1), dtype=bool)))
    assert full["mean_rate_hz"] == pytest.approx(1000.0)
    assert full["spikes_per_neuron"] == 100


def test_export_record(tmp_path):
    s = np.zeros((5, 3), dtype=bool)
    s[1, 2] = s[3, 0] = True
    summary = export_record(SpikeRecord.from_spikes(s), tmp_path / "r.csv", tmp_path / "r.json")
    assert (tmp_path / "r.csv").read_text().splitlines() == ["neuron_id,timestep", "0,3", "2,1"]
    assert summary["active_fraction"] == pytest.approx(2 / 3)
    assert (tmp_path / "r.json").exists()
