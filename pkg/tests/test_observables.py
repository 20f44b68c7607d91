import math

import numpy as np
import pytest

from kinlab.geometry import ConservationMode, ManifoldSpec, sample_uniform_batch
from kinlab.master_sim import EnsembleSnapshot, SimConfig, run_ensemble
from kinlab.observables import (
    ObservableSeries,
    chaos_distance,
    decay_rate_fit,
    get_observable,
    ks_quantile_99,
    marginal_histogram,
    moment_series,
    radial_ks_statistic,
)


def _snap(spec, velocities):
    return EnsembleSnapshot(0.0, spec, velocities)


def test_series_validation():
    with pytest.raises(ValueError):
        ObservableSeries("x", [0, 1], [1.0], [0.0], 4)
    with pytest.raises(ValueError):
        ObservableSeries("x", [0, 1], [1.0, 2.0], [0.0, np.inf], 4)
    with pytest.raises(ValueError):
        ObservableSeries("x", [1, 0], [1.0, 2.0], [0.0, 0.0], 4)


def test_unknown_observable_rejected():
    with pytest.raises(ValueError):
        get_observable("nope")


def test_moment_series_lookup(spec_c1):
    cfg = SimConfig(dt=1e-3, t_end=1e-3, n_replicas=2, seed=0)
    res = run_ensemble(spec_c1, cfg, ["energy_per_particle"])
    s = moment_series(res, "energy_per_particle")
    np.testing.assert_allclose(s.means, 1.0, atol=1e-12)
    with pytest.raises(ValueError):
        moment_series(res, "sum_v1")


def test_conserved_series_exact(rng):
    spec = ManifoldSpec(8, ConservationMode.ENERGY_MOMENTUM, eps=1.5, u=[1, 0, 0])
    cfg = SimConfig(dt=1e-3, t_end=0.02, n_replicas=8, seed=5)
    res = run_ensemble(spec, cfg, ["energy_per_particle", "momentum_per_particle_1"])
    np.testing.assert_allclose(res.series["energy_per_particle"].means, 1.5,
                               atol=1e-12)
    np.testing.assert_allclose(res.series["momentum_per_particle_1"].means, 1.0,
                               atol=1e-12)


def test_histogram_counts_sum_to_one(spec_c1, rng):
    vel = sample_uniform_batch(spec_c1, 100, rng)
    edges = np.linspace(-4, 4, 17)
    h = marginal_histogram(_snap(spec_c1, vel), 1, edges)
    assert h.total() == pytest.approx(1.0, abs=1e-12)
    h1 = marginal_histogram(_snap(spec_c1, vel), 1, edges, component=0)
    assert h1.total() == pytest.approx(1.0, abs=1e-12)


def test_histogram_two_pooled_points(rng):
    spec = ManifoldSpec(2, ConservationMode.ENERGY_ONLY, eps=1.0)
    vel = sample_uniform_batch(spec, 1, rng)
    edges = np.linspace(-3, 3, 7)
    h = marginal_histogram(_snap(spec, vel), 1, edges, component=0)
    counts = np.asarray(h.counts)
    assert h.n_samples == 2
    assert counts[counts > 0].min() >= 0.5 - 1e-12


def test_histogram_permutation_invariance(spec_c1, rng):
    vel = sample_uniform_batch(spec_c1, 50, rng)
    perm = rng.permutation(spec_c1.n_particles)
    edges = np.linspace(-4, 4, 17)
    h_a = marginal_histogram(_snap(spec_c1, vel), 1, edges)
    h_b = marginal_histogram(_snap(spec_c1, vel[:, perm]), 1, edges)
    np.testing.assert_array_equal(np.asarray(h_a.counts), np.asarray(h_b.counts))
    h2a = marginal_histogram(_snap(spec_c1, vel), 2, edges, component=0)
    h2b = marginal_histogram(_snap(spec_c1, vel[:, perm]), 2, edges, component=0)
    np.testing.assert_array_equal(np.asarray(h2a.counts), np.asarray(h2b.counts))


def test_chaos_distance_exact_product():
    edges = np.linspace(-1, 1, 5)
    c1 = np.array([0.1, 0.2, 0.3, 0.4])
    from kinlab.observables import MarginalHistogram
    h1 = MarginalHistogram(1, (edges,), c1, 0, 100)
    h2 = MarginalHistogram(2, (edges, edges), np.outer(c1, c1), 0, 100)
    assert chaos_distance(h2, h1) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        chaos_distance(h2, MarginalHistogram(1, (edges[:-1],), c1[:-1] / c1[:-1].sum(), 0, 10))


def test_chaos_distance_sparse_6d(rng):
    spec = ManifoldSpec(8, ConservationMode.ENERGY_ONLY, eps=1.0)
    vel = sample_uniform_batch(spec, 400, rng)
    edges = np.linspace(-4, 4, 7)
    h2 = marginal_histogram(_snap(spec, vel), 2, edges, max_pairs=5000, rng=rng)
    h1 = marginal_histogram(_snap(spec, vel), 1, edges)
    d = chaos_distance(h2, h1)
    assert 0.0 <= d <= 2.0


def test_chaos_distance_decreases_with_n_uniform(rng):
    # equilibrium ensembles factorize better as N grows
    edges = np.linspace(-4 * math.sqrt(2 / 3), 4 * math.sqrt(2 / 3), 13)
    dists = []
    for n in (8, 128):
        spec = ManifoldSpec(n, ConservationMode.ENERGY_ONLY, eps=1.0)
        n_rep = max(8, 400000 // (n * (n - 1)))
        vel = sample_uniform_batch(spec, n_rep, rng)
        snap = _snap(spec, vel)
        h2 = marginal_histogram(snap, 2, edges, component=0,
                                max_pairs=400000, rng=rng)
        h1 = marginal_histogram(snap, 1, edges, component=0)
        dists.append(chaos_distance(h2, h1))
    assert dists[1] < dists[0]


def test_radial_ks_uniform_ensemble(rng):
    spec = ManifoldSpec(8, ConservationMode.ENERGY_ONLY, eps=1.0)
    vel = sample_uniform_batch(spec, 25000, rng)
    ks, n = radial_ks_statistic(vel, spec)
    assert n == 200000
    assert ks < ks_quantile_99(n)


def test_decay_fit_exact_synthetic():
    t = np.linspace(0, 2, 21)
    s = ObservableSeries("x", t, 3.0 * np.exp(-2.0 * t), np.zeros_like(t), 100)
    fit = decay_rate_fit(s)
    assert fit.rate == pytest.approx(2.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert not fit.low_r2_warning


def test_decay_fit_noisy_synthetic(rng):
    t = np.linspace(0, 2, 41)
    amp = 3.0 * np.exp(-2.0 * t)
    noise = 0.01 * amp[0]
    means = amp + rng.normal(0, noise, len(t))
    s = ObservableSeries("x", t, means, np.full_like(t, noise), 100)
    fit = decay_rate_fit(s)
    assert fit.rate == pytest.approx(2.0, abs=0.1)


def test_decay_fit_constant_series():
    t = np.linspace(0, 1, 11)
    s = ObservableSeries("x", t, np.full_like(t, 0.7), np.zeros_like(t), 10)
    fit = decay_rate_fit(s)
    assert fit.rate == pytest.approx(0.0, abs=1e-12)
    assert fit.ci_low <= 0.0 <= fit.ci_high


def test_decay_fit_scale_invariance(rng):
    t = np.linspace(0, 2, 31)
    means = 2.0 * np.exp(-1.3 * t) * (1 + 0.01 * rng.standard_normal(len(t)))
    errs = np.full_like(t, 0.02)
    s = ObservableSeries("x", t, means, errs, 50)
    f1 = decay_rate_fit(s)
    f2 = decay_rate_fit(s.scaled(137.0))
    assert f2.rate == pytest.approx(f1.rate, rel=1e-10)


def test_decay_fit_low_r2_warning_flag(rng):
    t = np.linspace(0, 1, 30)
    means = 1.0 + 0.5 * np.sin(20 * t)
    s = ObservableSeries("x", t, means, np.full_like(t, 0.01), 10)
    fit = decay_rate_fit(s, window=(0.0, 1.0))
    assert fit.low_r2_warning


def test_decay_fit_sign_change_rejected():
    t = np.linspace(0, 1, 5)
    s = ObservableSeries("x", t, np.array([1.0, 0.5, -0.5, -1.0, -2.0]),
                         np.zeros(5), 10)
    with pytest.raises(ValueError):
        decay_rate_fit(s, window=(0.0, 1.0))


def test_decay_fit_window_trims_noise_floor():
    t = np.linspace(0, 3, 31)
    means = np.exp(-2.0 * t)
    errs = np.full_like(t, 0.02)     # floor crosses 5x stderr around t ~ 1.15
    s = ObservableSeries("x", t, means, errs, 10)
    fit = decay_rate_fit(s)
    assert fit.window[1] <= 1.2
    assert fit.rate == pytest.approx(2.0, rel=1e-6)
