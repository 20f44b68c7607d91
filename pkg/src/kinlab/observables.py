"""Estimators over ensembles: moment series, histograms, decay-rate fits,
and the marginal-factorization (chaos) diagnostic."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import betainc

from .geometry import ConservationMode, ManifoldSpec


@dataclass
class ObservableSeries:
    """Time-indexed ensemble averages of one named observable."""

    name: str
    times: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray
    n_replicas: int

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.stderrs = np.asarray(self.stderrs, dtype=float)
        if not (len(self.times) == len(self.means) == len(self.stderrs)):
            raise ValueError("times/means/stderrs must have equal length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(~np.isfinite(self.stderrs)) or np.any(self.stderrs < 0):
            raise ValueError("stderrs must be finite and nonnegative")

    def scaled(self, factor: float) -> "ObservableSeries":
        return ObservableSeries(self.name, self.times, factor * self.means,
                                abs(factor) * self.stderrs, self.n_replicas)


# ---------------------------------------------------------------------------
# observable catalog: name -> fn(states (R, N, 3), spec) -> (R,)


def _sum_component(sigma):
    return lambda v, spec: v[:, :, sigma].sum(axis=1)


def _sum_product(sigma, tau):
    return lambda v, spec: (v[:, :, sigma] * v[:, :, tau]).sum(axis=1)


def _tagged(sigma):
    return lambda v, spec: v[:, 0, sigma]


def _momentum_pp(sigma):
    return lambda v, spec: v[:, :, sigma].mean(axis=1)


OBSERVABLES: dict[str, Callable[[np.ndarray, ManifoldSpec], np.ndarray]] = {
    "sum_v1": _sum_component(0),
    "sum_v2": _sum_component(1),
    "sum_v3": _sum_component(2),
    "sum_v1v2": _sum_product(0, 1),
    "sum_v1v3": _sum_product(0, 2),
    "sum_v2v3": _sum_product(1, 2),
    "sum_v1sq_minus_v2sq":
        lambda v, spec: (v[:, :, 0] ** 2 - v[:, :, 1] ** 2).sum(axis=1),
    # the axial quadrupole v1^2 + v2^2 - 2 v3^2 summed over particles
    "sum_axial_quadrupole":
        lambda v, spec: (v[:, :, 0] ** 2 + v[:, :, 1] ** 2
                         - 2.0 * v[:, :, 2] ** 2).sum(axis=1),
    "mean_v1v2": lambda v, spec: (v[:, :, 0] * v[:, :, 1]).mean(axis=1),
    "tagged_v1": _tagged(0),
    "tagged_v2": _tagged(1),
    "tagged_v3": _tagged(2),
    "energy_per_particle":
        lambda v, spec: 0.5 * (v * v).sum(axis=(1, 2)) / v.shape[1],
    "momentum_per_particle_1": _momentum_pp(0),
    "momentum_per_particle_2": _momentum_pp(1),
    "momentum_per_particle_3": _momentum_pp(2),
}


def get_observable(name: str):
    try:
        return OBSERVABLES[name]
    except KeyError:
        raise ValueError(f"unknown observable {name!r}; "
                         f"catalog: {sorted(OBSERVABLES)}") from None


def moment_series(result, name: str) -> ObservableSeries:
    """Pull one recorded observable series out of a run result."""
    try:
        return result.series[name]
    except KeyError:
        raise ValueError(f"observable {name!r} was not recorded; "
                         f"available: {sorted(result.series)}") from None


# ---------------------------------------------------------------------------
# histograms


@dataclass
class MarginalHistogram:
    """Empirical n-velocity marginal on a regular grid.

    order 1 histograms are dense (1D for a single component, 3D for the full
    velocity); order 2 histograms are dense 2D for a component pair and a
    sparse dict {flat bin index: mass} for the full 6D grid. Counts are
    normalized to total mass 1; samples outside the grid are dropped before
    normalization.
    """

    order: int
    edges: tuple
    counts: object
    component: int | None
    n_samples: int

    def total(self) -> float:
        if isinstance(self.counts, dict):
            return float(sum(self.counts.values()))
        return float(np.sum(self.counts))

    def __post_init__(self):
        if abs(self.total() - 1.0) > 1e-12:
            raise ValueError("normalized counts must sum to 1")


def _pooled(velocities: np.ndarray) -> np.ndarray:
    return np.asarray(velocities, dtype=float).reshape(-1, 3)


def _sample_ordered_pairs(velocities, max_pairs, rng):
    """(n_pairs, 2, 3) array of velocities of distinct ordered pairs."""
    r, n, _ = velocities.shape
    if max_pairs is None:
        rep = np.repeat(np.arange(r), n * (n - 1))
        k, l = np.nonzero(~np.eye(n, dtype=bool))
        k = np.tile(k, r)
        l = np.tile(l, r)
    else:
        if rng is None:
            raise ValueError("subsampling pairs requires an rng")
        rep = rng.integers(0, r, size=max_pairs)
        k = rng.integers(0, n, size=max_pairs)
        l = (k + rng.integers(1, n, size=max_pairs)) % n
    return np.stack([velocities[rep, k], velocities[rep, l]], axis=1)


def marginal_histogram(snapshot, n: int, edges: np.ndarray,
                       component: int | None = None,
                       max_pairs: int | None = None,
                       rng: np.random.Generator | None = None) -> MarginalHistogram:
    """Pooled empirical n-velocity marginal of an ensemble snapshot.

    Pools over replicas and (by exchangeability) over particles / ordered
    particle pairs. ``edges`` is a single shared 1D edge array applied to
    every axis; ``component`` restricts to one velocity component (1D
    histogram for n=1, 2D for n=2), otherwise the full 3D / sparse 6D
    histogram is built. ``max_pairs`` subsamples ordered pairs for n=2.
    """
    velocities = np.asarray(snapshot.velocities, dtype=float)
    if velocities.size == 0:
        raise ValueError("empty snapshot")
    edges = np.asarray(edges, dtype=float)
    if n == 1:
        pooled = _pooled(velocities)
        if component is not None:
            counts, _ = np.histogram(pooled[:, component], bins=edges)
            tot = counts.sum()
            return MarginalHistogram(1, (edges,), counts / tot, component,
                                     pooled.shape[0])
        counts, _ = np.histogramdd(pooled, bins=(edges, edges, edges))
        return MarginalHistogram(1, (edges, edges, edges),
                                 counts / counts.sum(), None, pooled.shape[0])
    if n == 2:
        pairs = _sample_ordered_pairs(velocities, max_pairs, rng)
        if component is not None:
            x, y = pairs[:, 0, component], pairs[:, 1, component]
            counts, _, _ = np.histogram2d(x, y, bins=(edges, edges))
            return MarginalHistogram(2, (edges, edges), counts / counts.sum(),
                                     component, pairs.shape[0])
        nb = len(edges) - 1
        idx = np.searchsorted(edges, pairs.reshape(-1, 6), side="right") - 1
        ok = np.all((idx >= 0) & (idx < nb), axis=1)
        idx = idx[ok]
        flat = np.ravel_multi_index(idx.T, (nb,) * 6)
        uniq, cnt = np.unique(flat, return_counts=True)
        tot = cnt.sum()
        counts = {int(i): c / tot for i, c in zip(uniq, cnt)}
        return MarginalHistogram(2, (edges,) * 6, counts, None, pairs.shape[0])
    raise ValueError("marginal order must be 1 or 2")


def chaos_distance(h2: MarginalHistogram, h1: MarginalHistogram) -> float:
    """L1 distance between a 2-marginal and the product of 1-marginals.

    Zero iff the empirical pair distribution factorizes on the grid.
    """
    if h2.order != 2 or h1.order != 1:
        raise ValueError("need a 2-marginal and a 1-marginal")
    if h2.component != h1.component:
        raise ValueError("histograms use different component reductions")
    if not all(np.array_equal(e, h1.edges[i % len(h1.edges)])
               for i, e in enumerate(h2.edges)):
        raise ValueError("grid mismatch between the marginals")
    if isinstance(h2.counts, dict):
        c1 = np.asarray(h1.counts)
        nb = c1.shape[0]
        flat1 = c1.ravel()
        dist = 0.0
        covered = 0.0
        for key, mass in h2.counts.items():
            i1, rem = divmod(key, nb ** 3)
            p = flat1[i1] * flat1[rem]
            dist += abs(mass - p)
            covered += p
        return float(dist + (1.0 - covered))
    prod = np.multiply.outer(np.asarray(h1.counts), np.asarray(h1.counts))
    return float(np.abs(np.asarray(h2.counts) - prod).sum())


# ---------------------------------------------------------------------------
# radial goodness of fit


def pooled_speeds(velocities: np.ndarray, spec: ManifoldSpec) -> np.ndarray:
    """Pooled |v - u| over all particles and replicas."""
    pooled = _pooled(velocities) - spec.u
    return np.linalg.norm(pooled, axis=1)


def radial_ks_statistic(velocities: np.ndarray, spec: ManifoldSpec) -> tuple[float, int]:
    """KS distance between pooled speeds and the exact stationary radial law.

    Under the uniform measure, s = r^2 / (2 N eps_eff) follows a
    Beta(3/2, (3N-3)/2) law, which gives the radial CDF in closed form.
    Returns (statistic, pooled sample count).
    """
    n = spec.n_particles
    eps_eff = spec.eps if spec.mode is ConservationMode.ENERGY_ONLY else spec.eps0
    r = np.sort(pooled_speeds(velocities, spec))
    s = np.clip(r ** 2 / (2.0 * n * eps_eff), 0.0, 1.0)
    cdf = betainc(1.5, 1.5 * (n - 1), s)
    m = len(r)
    grid = np.arange(1, m + 1) / m
    d_plus = np.max(grid - cdf)
    d_minus = np.max(cdf - (np.arange(m) / m))
    return float(max(d_plus, d_minus)), m


def ks_quantile_99(n_samples: int) -> float:
    """Asymptotic 99% Kolmogorov quantile for n samples."""
    return 1.6276 / math.sqrt(n_samples)


# ---------------------------------------------------------------------------
# decay-rate fits


@dataclass
class DecayFit:
    rate: float
    rate_stderr: float
    ci_low: float
    ci_high: float
    r_squared: float
    low_r2_warning: bool
    n_points: int
    window: tuple[float, float]


def decay_rate_fit(series: ObservableSeries,
                   window: tuple[float, float] | None = None,
                   min_snr: float = 5.0) -> DecayFit:
    """Weighted linear regression of ln|mean| against time.

    The default window keeps points with |mean| > min_snr * stderr
    (trimming the noise floor); the mean must be sign-constant there.
    Weights are the inverse variances of ln|mean| propagated from the
    standard errors; the returned rate is the negated slope with a 95%
    confidence interval. A weighted R^2 below 0.9 sets
    ``low_r2_warning`` (profile not exponential) rather than failing.

    The interval treats the points as independent; ensemble-mean series
    share replicas across times, so the true rate spread is somewhat
    wider than the propagated one.
    """
    t, m, e = series.times, series.means, series.stderrs
    if window is not None:
        keep = (t >= window[0]) & (t <= window[1])
    else:
        keep = np.abs(m) > min_snr * e
    t, m, e = t[keep], m[keep], e[keep]
    if len(t) < 2:
        raise ValueError("fewer than 2 usable points in the fit window")
    if not (np.all(m > 0) or np.all(m < 0)):
        raise ValueError("mean changes sign on the fit window")
    y = np.log(np.abs(m))
    var_y = (e / np.abs(m)) ** 2
    if np.all(var_y == 0):
        w = np.ones_like(y)
        known_sigma = False
    else:
        floor = var_y[var_y > 0].min() * 1e-6
        w = 1.0 / np.maximum(var_y, floor)
        known_sigma = True
    wsum = w.sum()
    t_bar = (w * t).sum() / wsum
    y_bar = (w * y).sum() / wsum
    s_tt = (w * (t - t_bar) ** 2).sum()
    slope = (w * (t - t_bar) * (y - y_bar)).sum() / s_tt
    resid = y - (y_bar + slope * (t - t_bar))
    if known_sigma:
        var_slope = 1.0 / s_tt
    else:
        dof = max(len(t) - 2, 1)
        var_slope = (resid ** 2).sum() / dof / ((t - t_bar) ** 2).sum()
    ss_tot = (w * (y - y_bar) ** 2).sum()
    r2 = 1.0 if ss_tot == 0 else 1.0 - (w * resid ** 2).sum() / ss_tot
    se = math.sqrt(var_slope)
    rate = -slope
    return DecayFit(rate=rate, rate_stderr=se,
                    ci_low=rate - 1.96 * se, ci_high=rate + 1.96 * se,
                    r_squared=float(r2), low_r2_warning=bool(r2 < 0.9),
                    n_points=len(t), window=(float(t[0]), float(t[-1])))
