import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snn_unwrap.energy import (
    CAVEAT,
    ComplexityReport,
    EnergyLedger,
    GpuBaseline,
    HardwareProfile,
    complexity_report,
    count_events,
    efficiency_report,
    gpu_energy,
    measure_baseline,
    network_complexity,
    snn_energy,
)
from snn_unwrap.lif import SpikeRecord, activity_stats
from snn_unwrap.network import build_network, infer
from snn_unwrap.raster_io import SceneSpec, synthesize_scene


def test_hardware_constants():
    hw = HardwareProfile()
    assert hw.e_spike == 23e-12 and hw.e_leak == 1e-13
    assert GpuBaseline().p_gpu == 300.0


def test_leak_only_example():
    assert snn_energy(0, 3 * 64 * 64, 200) == pytest.approx(12288 * 200 * 1e-13, rel=1e-15)
    assert snn_energy(0, 12288, 200) == pytest.approx(2.4576e-7, rel=1e-12)


def test_million_spike_example():
    e = snn_energy(1_000_000, 12288, 200)
    assert e == pytest.approx(1e6 * 23e-12 + 12288 * 200 * 1e-13, rel=1e-15)
    # hand arithmetic: 2.3e-5 + 2.4576e-7; the quoted 2.32458e-5 is this to six figures
    assert e == pytest.approx(2.324576e-5, rel=1e-9)
    assert float(f"{e:.5e}") == 2.32458e-5


def test_spike_term_linear():
    base = snn_energy(0, 100, 50)
    a = snn_energy(1000, 100, 50) - base
    b = snn_energy(2000, 100, 50) - base
    assert b == pytest.approx(2 * a, rel=1e-12)


def test_record_counts_sources():
    s = np.zeros((10, 3), dtype=bool)
    s[0, 0] = True
    src = np.ones((10, 2), dtype=bool)
    rec = SpikeRecord(s, 1e-3, sources=src)
    assert snn_energy(rec, 5, 10) == pytest.approx(21 * 23e-12 + 50 * 1e-13)


@pytest.mark.parametrize("p,t,expected", [(300.0, 0.1, 30.0), (300.0, 0.0, 0.0), (300.0, 1.0, 300.0)])
def test_gpu_energy(p, t, expected):
    assert gpu_energy(GpuBaseline(p_gpu=p, t_process=t)) == pytest.approx(expected)


def test_baseline_validation():
    with pytest.raises(ValueError):
        GpuBaseline(p_gpu=0.0)
    with pytest.raises(ValueError):
        GpuBaseline(t_process=-1.0)
    with pytest.raises(ValueError):
        HardwareProfile(e_spike=0.0)


def test_measured_baseline_label():
    b = measure_baseline(sum, range(1000), repeats=2)
    assert b.t_process > 0 and "host-measured" in b.label


def test_ratio_and_caveat():
    r = efficiency_report(2.3e-5, 30.0)
    assert r.ratio == pytest.approx(30.0 / 2.3e-5)
    assert r.ratio == pytest.approx(1.30e6, rel=5e-3)
    assert "model-based" in r.caveat
    assert "model-based" in r.to_text()
    assert "model-based" in json.loads(r.to_json())["caveat"]


def test_zero_snn_energy_is_unbounded():
    r = efficiency_report(0.0, 30.0)
    assert r.ratio is None and r.ratio_unbounded
    assert "unbounded" in r.to_text()
    with pytest.raises(ValueError):
        efficiency_report(-1.0, 1.0)


def test_uniform_network_counts_match_formula():
    n, T, C, per = 400, 100, 8, 10
    counts = np.full(n, per)
    deg = np.full(n, C)
    c = complexity_report(counts, deg, 20, 20, T)
    assert c.op_count_snn == n * per * C
    assert c.r == pytest.approx(per / (T * 1e-3))
    assert c.relative_gap <= 0.10
    assert c.op_count_classical == pytest.approx(400 * math.log2(400))


def test_count_events_oracle():
    rng = np.random.default_rng(0)
    counts = rng.integers(0, 20, 50)
    deg = rng.integers(0, 30, 50)
    assert count_events(counts, deg) == sum(int(a) * int(b) for a, b in zip(counts, deg))


def test_report_dict_has_both_counts():
    c = complexity_report([3, 1], [2, 4], 2, 2, 10)
    d = efficiency_report(1e-6, 1.0, c).to_dict()
    assert d["complexity"]["op_count_snn"] == 10
    assert "op_formula_snn" in d["complexity"] and "op_count_classical" in d["complexity"]
    assert d["schema_version"] == "1"


def test_ledger_additive():
    rng = np.random.default_rng(1)
    a = SpikeRecord(rng.random((20, 5)) < 0.3, 1e-3)
    b = SpikeRecord(rng.random((30, 5)) < 0.3, 1e-3)
    la = EnergyLedger.from_run(a, 5, synaptic_events=7)
    lb = EnergyLedger.from_run(b, 5, synaptic_events=3)
    both = EnergyLedger()
    both.add(a, 5, synaptic_events=7)
    both.add(b, 5, synaptic_events=3)
    assert both == la + lb
    assert both.energy() == pytest.approx(la.energy() + lb.energy(), rel=1e-15)
    assert (la + lb) == (lb + la)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=10**7), st.integers(min_value=0, max_value=10**7),
       st.integers(min_value=1, max_value=500), st.integers(min_value=1, max_value=500))
def test_energy_monotone(s1, s2, t1, t2):
    lo, hi = sorted((s1, s2))
    assert snn_energy(lo, 100, t1) <= snn_energy(hi, 100, t1)
    ta, tb = sorted((t1, t2))
    assert snn_energy(s1, 100, ta) <= snn_energy(s1, 100, tb)


def scene(level, profile="uniform"):
    return synthesize_scene(SceneSpec(shape="gaussian_bump", amplitude=10.0, width=16, height=16,
                                      coherence_profile=profile, coherence_level=level, rng_seed=0))


def test_low_coherence_scene_is_cheaper():
    topo = build_network(16, 16)
    lo, hi = scene(0.3), scene(1.0)
    rlo = infer(lo.wrapped, lo.coherence, topo)
    rhi = infer(hi.wrapped, hi.coherence, topo)
    n = sum(topo.layer_sizes)
    assert rlo.record.total_with_sources < rhi.record.total_with_sources
    assert snn_energy(rlo.record, n, 100) < snn_energy(rhi.record, n, 100)


def test_active_fraction_of_thirty_percent_scene():
    sc = scene(0.3)
    res = infer(sc.wrapped, sc.coherence, build_network(16, 16))
    enc = SpikeRecord(res.encoded.channels(), 1e-3)
    stats = activity_stats(enc)
    assert 0 < stats["active_fraction"] <= 1
    ledger = EnergyLedger.from_run(enc, enc.n_neurons)
    assert ledger.n_spikes == res.encoded.channels().sum()


def test_network_complexity_counts_real_events():
    sc = scene(0.6)
    topo = build_network(16, 16)
    res = infer(sc.wrapped, sc.coherence, topo)
    c = network_complexity(res, topo, sc.coherence)
    n_pix = topo.n_pixels
    enc_counts = res.record.sources.sum(axis=0)
    proc_counts = res.record.spikes[:, :n_pix].sum(axis=0)
    lat = topo.lateral_for(sc.coherence)
    # independent tally: walk every spike through every outgoing synapse
    events = 0
    for j, cnt in enumerate(enc_counts):
        events += int(cnt) * int(np.count_nonzero(topo.enc_to_proc.pre == j))
    for j, cnt in enumerate(proc_counts):
        events += int(cnt) * (int(np.count_nonzero(lat.pre == j)) + int(np.count_nonzero(topo.proc_to_dec.pre == j)))
    assert c.op_count_snn == events
    assert c.n_pre == enc_counts.size + n_pix
    assert isinstance(c, ComplexityReport)
