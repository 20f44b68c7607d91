"""Exact sphere-Laplacian spectra, symmetric eigenfunction observables, and
the variational spectral-gap machinery for the pairwise diffusion.

Eigenvalues: the unit D-sphere Laplacian has spectrum j(j + D - 1); on our
manifolds (D = 3N-1 or 3N-4, radius^2 = 2N eps or 2N eps0) the scaled
eigenvalues are j(j + 3N - 2)/(2N eps) and j(j + 3N - 5)/(2N eps0), with the
N -> infinity limit 3j/(2 eps_eff): the harmonic-oscillator ladder.

The variational side evaluates the quadratic form of the pairwise generator
on the mean-field trial function psi = A (sum_i v_{i,1}^2 / 2 - C) by Monte
Carlo over equilibrium samples; by permutation symmetry the form reduces to
a single-pair integral
    (N/2) * E[ w_12 * |P_perp (d_2 - d_1) psi|^2 ],   w_12 = |v_2-v_1|^{2+gamma}.

Normalization bookkeeping (fixed once, documented here): expectations are
over the probability measure dtau/|M|, so the stored ``a_const`` is the
probability-normalized constant (3/2N) sqrt(3N-1) with E[psi^2] = 1. The
surface-measure constant of the L2(dtau) convention is a_const/sqrt(|M|)
(kept as ``log_a_l2``; |M|^(-1/2) underflows for large N). The quadratic
form is identical in both conventions: the |M| in A^2 cancels against the
|M| from converting the dtau integral to an expectation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import (
    ConservationMode,
    ManifoldSpec,
    VelocityState,
    manifold_log_area,
    sample_uniform_batch,
)
from .master_sim import KernelSpec


# ---------------------------------------------------------------------------
# exact spectra


def eigenvalue_unscaled(spec: ManifoldSpec, j: int) -> float:
    """Unit-sphere eigenvalue j(j + 3N - 2) or j(j + 3N - 5)."""
    if j < 0:
        raise ValueError("j must be >= 0")
    n = spec.n_particles
    if spec.mode is ConservationMode.ENERGY_ONLY:
        return float(j * (j + 3 * n - 2))
    return float(j * (j + 3 * n - 5))


def eigenvalue_scaled(spec: ManifoldSpec, j: int) -> float:
    """Eigenvalue on the physical manifold (unit-sphere value / radius^2)."""
    return eigenvalue_unscaled(spec, j) / spec.radius_sq


def limit_eigenvalue(j: int, eps_eff: float) -> float:
    """N -> infinity eigenvalue 3j/(2 eps_eff)."""
    if j < 0:
        raise ValueError("j must be >= 0")
    if not eps_eff > 0:
        raise ValueError("eps_eff must be positive")
    return 1.5 * j / eps_eff


@dataclass
class SpectrumTable:
    """Rows (j, unscaled, scaled, limit) for j = 0..j_max."""

    spec: ManifoldSpec
    eps_eff: float
    rows: list[tuple[int, float, float, float]]


def spectrum_table(spec: ManifoldSpec, j_max: int) -> SpectrumTable:
    eps_eff = spec.eps if spec.mode is ConservationMode.ENERGY_ONLY else spec.eps0
    rows = [
        (j, eigenvalue_unscaled(spec, j), eigenvalue_scaled(spec, j),
         limit_eigenvalue(j, eps_eff))
        for j in range(j_max + 1)
    ]
    return SpectrumTable(spec=spec, eps_eff=eps_eff, rows=rows)


# ---------------------------------------------------------------------------
# symmetric eigenfunction observables


@dataclass(frozen=True)
class EigenfunctionFamily:
    """A symmetric sum sum_k p(v_k) of a harmonic polynomial p of given degree."""

    name: str
    degree: int
    fn: Callable[[np.ndarray], np.ndarray]

    def is_constant_on(self, spec: ManifoldSpec) -> bool:
        # Degree-1 sums equal N*u_sigma on momentum-conserving manifolds.
        return self.degree == 1 and spec.mode is ConservationMode.ENERGY_MOMENTUM


def _family(name, degree, fn):
    return name, EigenfunctionFamily(name, degree, fn)


FAMILIES: dict[str, EigenfunctionFamily] = dict([
    _family("deg1_1", 1, lambda v: v[..., :, 0].sum(-1)),
    _family("deg1_2", 1, lambda v: v[..., :, 1].sum(-1)),
    _family("deg1_3", 1, lambda v: v[..., :, 2].sum(-1)),
    _family("deg2_12", 2, lambda v: (v[..., :, 0] * v[..., :, 1]).sum(-1)),
    _family("deg2_13", 2, lambda v: (v[..., :, 0] * v[..., :, 2]).sum(-1)),
    _family("deg2_23", 2, lambda v: (v[..., :, 1] * v[..., :, 2]).sum(-1)),
    _family("deg2_11m22", 2,
            lambda v: (v[..., :, 0] ** 2 - v[..., :, 1] ** 2).sum(-1)),
    _family("deg2_22m33", 2,
            lambda v: (v[..., :, 1] ** 2 - v[..., :, 2] ** 2).sum(-1)),
    # the axial quadrupole v1^2 + v2^2 - 2 v3^2 (harmonic but NOT constant
    # on the energy sphere: it equals 2 N eps - 3 sum_k v_{k,3}^2)
    _family("deg2_axial", 2,
            lambda v: (v[..., :, 0] ** 2 + v[..., :, 1] ** 2
                       - 2.0 * v[..., :, 2] ** 2).sum(-1)),
    _family("deg3_123", 3,
            lambda v: (v[..., :, 0] * v[..., :, 1] * v[..., :, 2]).sum(-1)),
    _family("deg3_1_22m33", 3,
            lambda v: (v[..., :, 0]
                       * (v[..., :, 1] ** 2 - v[..., :, 2] ** 2)).sum(-1)),
])


def get_family(name: str) -> EigenfunctionFamily:
    try:
        return FAMILIES[name]
    except KeyError:
        raise ValueError(f"unknown eigenfunction family {name!r}; "
                         f"catalog: {sorted(FAMILIES)}") from None


def symmetric_eigenfunction(state: VelocityState, family: str) -> float:
    """Evaluate a symmetric eigenfunction sum on one state.

    Raises ValueError when the family is constant on the state's manifold
    (degree-1 families on momentum-conserving manifolds).
    """
    fam = get_family(family)
    if fam.is_constant_on(state.spec):
        raise ValueError(
            f"family {family!r} is constant (= N u) on ENERGY_MOMENTUM manifolds"
        )
    return float(fam.fn(state.particles))


def family_decay_rate(spec: ManifoldSpec, family: str) -> float:
    """Predicted relaxation rate of the family under the sphere diffusion."""
    return eigenvalue_scaled(spec, get_family(family).degree)


# ---------------------------------------------------------------------------
# variational trial function


def _require_standard(spec: ManifoldSpec):
    if (spec.mode is not ConservationMode.ENERGY_MOMENTUM
            or spec.eps != 1.0 or np.any(spec.u != 0.0)):
        raise ValueError(
            "trial machinery is defined for the standard case u=0, eps=1 on "
            "the energy-momentum manifold; map other cases with "
            "geometry.state_from_standard first"
        )


@dataclass(frozen=True)
class TrialFunction:
    """Mean-field trial function psi = a_const (sum_i v_{i,1}^2/2 - c_const).

    c_const = N/3 makes it mean-zero; a_const = (3/2N) sqrt(3N-1) makes
    E[psi^2] = 1 under uniform sampling (standard case u=0, eps=1).
    ``log_a_l2`` is the log of the surface-measure constant
    a_const / sqrt(|M|).
    """

    n_particles: int
    c_const: float
    a_const: float
    log_a_l2: float


def standard_trial_function(n_particles: int) -> TrialFunction:
    if n_particles < 2:
        raise ValueError("need N >= 2")
    spec = ManifoldSpec(n_particles, ConservationMode.ENERGY_MOMENTUM, eps=1.0)
    a = 1.5 / n_particles * math.sqrt(3 * n_particles - 1)
    return TrialFunction(
        n_particles=n_particles,
        c_const=n_particles / 3.0,
        a_const=a,
        log_a_l2=math.log(a) - 0.5 * manifold_log_area(spec),
    )


def trial_eval(tf: TrialFunction, state: VelocityState) -> float:
    """Evaluate the trial function at a state (standard case only)."""
    _require_standard(state.spec)
    if state.spec.n_particles != tf.n_particles:
        raise ValueError("trial function and state have different N")
    p = state.particles
    return tf.a_const * (0.5 * (p[:, 0] ** 2).sum() - tf.c_const)


def _trial_eval_batch(tf: TrialFunction, velocities: np.ndarray) -> np.ndarray:
    return tf.a_const * (0.5 * (velocities[:, :, 0] ** 2).sum(axis=1) - tf.c_const)


def rayleigh_quotient_mc(spec: ManifoldSpec, tf: TrialFunction,
                         kernel: KernelSpec, n_samples: int,
                         rng: np.random.Generator,
                         chunk: int = 20000) -> tuple[float, float]:
    """Monte Carlo estimate of the quadratic form of the trial function.

    Averages (N/2) w_12 |P_perp (d_2 - d_1) psi|^2 over uniform samples;
    the difference gradient is A (v_{2,1} - v_{1,1}) e_1 in closed form.
    Returns (estimate, standard error).
    """
    _require_standard(spec)
    if tf.n_particles != spec.n_particles:
        raise ValueError("trial function and manifold have different N")
    if n_samples < 1000:
        raise ValueError("n_samples must be >= 1000")
    n = spec.n_particles
    cutoff = kernel.resolve_cutoff(spec)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(chunk, n_samples - done)
        v = sample_uniform_batch(spec, m, rng)
        d = v[:, 1] - v[:, 0]
        beta = np.maximum(np.linalg.norm(d, axis=1), cutoff)
        w = beta ** (2.0 + kernel.gamma)
        grad_sq = (tf.a_const * d[:, 0]) ** 2 * (1.0 - (d[:, 0] / beta) ** 2)
        vals = 0.5 * n * w * grad_sq
        total += vals.sum()
        total_sq += (vals ** 2).sum()
        done += m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean ** 2, 0.0)
    return float(mean), float(math.sqrt(var / n_samples))


def conserved_quadratic_form_mc(spec: ManifoldSpec, which: str,
                                kernel: KernelSpec, n_samples: int,
                                rng: np.random.Generator) -> tuple[float, float]:
    """Quadratic form evaluated on a conserved quantity (mass, energy,
    momentum component): the projected difference gradient vanishes
    identically, so the estimate is exactly zero.

    mass and momentum have difference gradient 0; for the energy it equals
    v_2 - v_1, which the perpendicular projector annihilates. Evaluated
    numerically for the energy to exercise the annihilation.
    """
    if which in ("mass", "momentum"):
        return 0.0, 0.0
    if which != "energy":
        raise ValueError("which must be 'mass', 'momentum' or 'energy'")
    n = spec.n_particles
    cutoff = kernel.resolve_cutoff(spec)
    v = sample_uniform_batch(spec, n_samples, rng)
    d = v[:, 1] - v[:, 0]
    beta = np.maximum(np.linalg.norm(d, axis=1), cutoff)
    nhat = d / beta[:, None]
    resid = d - nhat * (nhat * d).sum(axis=1, keepdims=True)
    vals = 0.5 * n * beta ** (2.0 + kernel.gamma) * (resid ** 2).sum(axis=1)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(n_samples))


def lambda1_bound(n_particles: int) -> float:
    """Printed variational upper-bound formula 9/(5 sqrt(pi)) / sqrt(3N-4)."""
    if n_particles <= 1:
        raise ValueError("need N > 1")
    return 9.0 / (5.0 * math.sqrt(math.pi)) / math.sqrt(3 * n_particles - 4)


# ---------------------------------------------------------------------------
# N-scaling study


@dataclass
class GapScanResult:
    n_values: list[int]
    estimates: np.ndarray
    stderrs: np.ndarray
    bounds: np.ndarray
    exponent: float
    exponent_stderr: float


def gap_scan(n_list: Sequence[int], kernel: KernelSpec, n_samples: int,
             rng: np.random.Generator) -> GapScanResult:
    """Rayleigh estimates across N plus a weighted log-log power-law fit.

    Standard case (u=0, eps=1) at every N. Requires >= 3 ascending N.
    """
    n_list = list(n_list)
    if len(n_list) < 3 or any(b <= a for a, b in zip(n_list, n_list[1:])):
        raise ValueError("need at least 3 strictly ascending N values")
    est, err, bnd = [], [], []
    for n in n_list:
        spec = ManifoldSpec(n, ConservationMode.ENERGY_MOMENTUM, eps=1.0)
        tf = standard_trial_function(n)
        e, s = rayleigh_quotient_mc(spec, tf, kernel, n_samples, rng)
        est.append(e)
        err.append(s)
        bnd.append(lambda1_bound(n))
    est = np.asarray(est)
    err = np.asarray(err)
    x = np.log(np.asarray(n_list, dtype=float))
    y = np.log(est)
    var_y = (err / est) ** 2
    w = 1.0 / np.maximum(var_y, var_y[var_y > 0].min() * 1e-6) \
        if np.any(var_y > 0) else np.ones_like(y)
    x_bar = (w * x).sum() / w.sum()
    y_bar = (w * y).sum() / w.sum()
    s_xx = (w * (x - x_bar) ** 2).sum()
    slope = (w * (x - x_bar) * (y - y_bar)).sum() / s_xx
    return GapScanResult(
        n_values=n_list,
        estimates=est,
        stderrs=err,
        bounds=np.asarray(bnd),
        exponent=float(slope),
        exponent_stderr=float(math.sqrt(1.0 / s_xx)),
    )
