import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from snn_unwrap.encoding import (
    EncoderConfig,
    PopulationParams,
    RateParams,
    SpikeTrain,
    TemporalParams,
    active_count,
    decode_temporal,
    dump_spikes_csv,
    encode_population,
    encode_rate,
    encode_scene,
    encode_temporal,
    load_spikes_csv,
    phase_rate,
    population_summary,
    regular_spikes,
    temporal_spike_times,
    wrapped_gradient,
)
from snn_unwrap.errors import InvalidRaster
from snn_unwrap.raster_io import (
    CoherenceRaster,
    PhaseRaster,
    RasterKind,
    SceneSpec,
    synthesize_scene,
)


def wrapped(values):
    return PhaseRaster(np.asarray(values, dtype=float), RasterKind.WRAPPED)


def oracle_regular_times(rate_hz, dt, T):
    """Spike steps floor(n / (r dt)) by plain enumeration."""
    if rate_hz <= 0:
        return []
    out, n = [], 1
    while True:
        t = math.floor(n / (rate_hz * dt) + 1e-9)
        if t >= T:
            return out
        out.append(t)
        n += 1


# ---------------------------------------------------------------------------
# gradient


def test_gradient_constant():
    assert np.all(wrapped_gradient(wrapped(np.full((4, 4), 2.0)), "x") == 0)
    assert np.all(wrapped_gradient(wrapped(np.full((4, 4), 2.0)), "y") == 0)


def test_gradient_wraps_difference():
    g = wrapped_gradient(wrapped([[3.0, -3.0], [3.0, -3.0]]), "x")
    assert g[0, 0] == pytest.approx(-6.0 + 2 * math.pi, abs=1e-12)
    assert g[0, 0] == pytest.approx(0.28319, abs=1e-5)
    assert np.all(g[:, -1] == 0)


def test_gradient_matches_absolute_where_small():
    s = synthesize_scene(SceneSpec(shape="gaussian_bump", amplitude=10.0, coherence_level=1.0, width=20, height=16))
    for axis, ax in (("x", 1), ("y", 0)):
        g = wrapped_gradient(s.wrapped, axis)
        d = np.diff(s.absolute.values, axis=ax)
        gi = g[:, :-1] if axis == "x" else g[:-1, :]
        ok = np.abs(d) < math.pi
        assert ok.all()
        assert np.allclose(gi[ok], d[ok], atol=1e-9)


def test_gradient_rejects_absolute():
    with pytest.raises(InvalidRaster):
        wrapped_gradient(PhaseRaster(np.zeros((2, 2)), RasterKind.ABSOLUTE))


# ---------------------------------------------------------------------------
# rate code


def test_rate_zero_at_minus_pi():
    # -pi itself is not a legal wrapped value, so the encoder is fed the raw number
    assert phase_rate(-math.pi, 100.0) == 0.0
    assert not encode_rate(np.array([[-math.pi]]), RateParams()).any()


def test_rate_max_at_pi():
    assert phase_rate(math.pi, 100.0) == pytest.approx(100.0)
    s = encode_rate(wrapped(np.full((2, 2), math.pi)), RateParams())
    # steps 10, 20, ..., 90; the 10th spike would land on step 100
    assert np.all(s.sum(axis=0) == 9)
    assert np.all(s.sum(axis=0) == len(oracle_regular_times(100.0, 1e-3, 100)))


def test_rate_three_quarter():
    r = phase_rate(math.pi / 2, 100.0)
    assert r == pytest.approx(100.0 * (1.5 * math.pi) / (2 * math.pi))
    assert r == pytest.approx(75.0)
    n = int(encode_rate(wrapped(np.full((2, 2), math.pi / 2)), RateParams())[:, 0, 0].sum())
    assert n in (7, 8)
    assert n == len(oracle_regular_times(r, 1e-3, 100))


@settings(max_examples=200, deadline=None)
@given(st.one_of(st.just(0.0), st.floats(min_value=1e-3, max_value=1000.0)), st.integers(min_value=1, max_value=300))
def test_regular_spikes_match_enumeration(rate, T):
    times = np.nonzero(regular_spikes(rate, 1e-3, T))[0].tolist()
    assert times == oracle_regular_times(rate, 1e-3, T)
    assert abs(len(times) - rate * 1e-3 * T) <= 1


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-math.pi, max_value=math.pi), st.floats(min_value=-math.pi, max_value=math.pi))
def test_rate_affine(a, b):
    diff = phase_rate(a, 100.0) - phase_rate(b, 100.0)
    assert diff == pytest.approx(100.0 * (abs(a + math.pi) - abs(b + math.pi)) / (2 * math.pi), abs=1e-9)


def test_poisson_mode_seeded():
    p = RateParams(mode="poisson", rng_seed=7)
    phi = wrapped(np.linspace(-3, 3, 16).reshape(4, 4))
    a, b = encode_rate(phi, p), encode_rate(phi, p)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, encode_rate(phi, RateParams(mode="poisson", rng_seed=8)))


def test_rate_params_validation():
    with pytest.raises(ValueError):
        RateParams(r_max=2000.0)
    with pytest.raises(ValueError):
        RateParams(T_sim=0)


# ---------------------------------------------------------------------------
# temporal code


def test_temporal_examples():
    p = TemporalParams(t_ref=50, delta_t=40)
    assert temporal_spike_times(0.0, p) == 50
    assert temporal_spike_times(math.pi, p) == 10
    assert temporal_spike_times(-math.pi / 2, p) == 70
    assert temporal_spike_times(10.0, p) == 10  # clamped


def test_temporal_one_spike_each():
    g = np.linspace(-math.pi, math.pi, 30).reshape(5, 6)
    s = encode_temporal(g, TemporalParams(), 100)
    assert np.all(s.sum(axis=0) == 1)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-4, max_value=4), st.floats(min_value=-4, max_value=4))
def test_temporal_monotone(a, b):
    p = TemporalParams()
    ta, tb = temporal_spike_times(a, p), temporal_spike_times(b, p)
    if a < b:
        assert ta >= tb
    gap = p.grad_max / p.delta_t
    if abs(a - b) >= gap + 1e-9 and max(abs(a), abs(b)) <= p.grad_max:
        assert ta != tb


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=-math.pi, max_value=math.pi))
def test_temporal_decode_within_quantum(g):
    p = TemporalParams()
    back = decode_temporal(temporal_spike_times(g, p), p)
    assert abs(back - g) <= 0.5 * p.grad_max / p.delta_t + 1e-12


def test_temporal_window_validation():
    with pytest.raises(ValueError):
        TemporalParams(t_ref=10, delta_t=40)
    with pytest.raises(ValueError):
        EncoderConfig(rate=RateParams(T_sim=80))


# ---------------------------------------------------------------------------
# population code


@pytest.mark.parametrize("gamma,expected", [(0.0, 0), (1.0, 10), (0.73, 7), (0.57, 5)])
def test_active_counts(gamma, expected):
    assert active_count(gamma, 10) == expected


def test_active_count_guard():
    assert active_count(0.57, 100) == 57


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0, max_value=1), st.floats(min_value=0, max_value=1))
def test_active_count_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert active_count(lo, 10) <= active_count(hi, 10)


def test_population_layout():
    coh = CoherenceRaster(np.array([[0.0, 0.73], [1.0, 0.35]]))
    pop = encode_population(coh, PopulationParams(), RateParams())
    assert pop.shape == (100, 2, 2, 10)
    active = pop.any(axis=0)
    assert active[0, 1].tolist() == [True] * 7 + [False] * 3
    assert active[1, 0].all() and not active[0, 0].any()
    assert pop[:, 1, 0, 0].sum() == len(oracle_regular_times(100.0, 1e-3, 100))


def test_population_summary_rate():
    coh = CoherenceRaster(np.array([[0.73, 1.0], [0.0, 0.5]]))
    s = population_summary(coh, PopulationParams(), RateParams())
    assert s[:, 0, 1].sum() == len(oracle_regular_times(100.0, 1e-3, 100))
    assert s[:, 1, 0].sum() == 0
    assert s[:, 0, 0].sum() == len(oracle_regular_times(70.0, 1e-3, 100))


# ---------------------------------------------------------------------------
# whole scene


def test_scene_channel_count():
    s = encode_scene(wrapped(np.zeros((4, 4))), CoherenceRaster(np.ones((4, 4))))
    assert s.n_channels == 48
    assert s.channels().shape == (100, 48)
    xy = encode_scene(wrapped(np.zeros((4, 4))), CoherenceRaster(np.ones((4, 4))), EncoderConfig(gradient_axes="xy"))
    assert xy.n_channels == 64


def test_zero_scene_composition():
    s = encode_scene(wrapped(np.zeros((4, 4))), CoherenceRaster(np.ones((4, 4))))
    ch = s.channels()
    grad = ch[:, 16:32]
    assert grad[50].all()
    assert not np.delete(grad, 50, axis=0).any()
    phase = ch[:, :16]
    expected = len(oracle_regular_times(50.0, 1e-3, 100))
    assert np.all(phase.sum(axis=0) == expected)


def test_scene_determinism_and_mismatch():
    sc = synthesize_scene(SceneSpec(width=8, height=6, coherence_profile="patchy", coherence_level=0.6, rng_seed=2))
    cfg = EncoderConfig(rate=RateParams(mode="poisson", rng_seed=3))
    assert encode_scene(sc.wrapped, sc.coherence, cfg) == encode_scene(sc.wrapped, sc.coherence, cfg)
    with pytest.raises(InvalidRaster):
        encode_scene(sc.wrapped, CoherenceRaster(np.ones((3, 3))))


def test_total_spikes_monotone_in_coherence():
    w = wrapped(np.zeros((4, 4)))
    totals = [encode_scene(w, CoherenceRaster(np.full((4, 4), g))).total_spikes() for g in np.linspace(0, 1, 11)]
    assert all(a <= b for a, b in zip(totals, totals[1:]))


def test_total_spikes_monotone_in_phase():
    c = CoherenceRaster(np.ones((3, 3)))
    totals = [encode_scene(wrapped(np.full((3, 3), v)), c).total_spikes() for v in np.linspace(-3.1, 3.1, 12)]
    assert all(a <= b for a, b in zip(totals, totals[1:]))


def test_spike_train_invariants():
    with pytest.raises(ValueError):
        SpikeTrain(0, (3, 3))
    t = SpikeTrain(0, (1, 2))
    with pytest.raises(ValueError):
        t.check(100, refractory_steps=2)
    s = encode_scene(wrapped(np.full((2, 2), 1.0)), CoherenceRaster(np.ones((2, 2))))
    for train in s.trains():
        train.check(s.T_sim)


def test_csv_roundtrip(tmp_path):
    s = encode_scene(wrapped(np.full((3, 3), 0.3)), CoherenceRaster(np.full((3, 3), 0.5))).channels()
    n = dump_spikes_csv(s, tmp_path / "s.csv")
    assert n == s.sum()
    assert np.array_equal(load_spikes_csv(tmp_path / "s.csv", s.shape[1], s.shape[0]), s)
