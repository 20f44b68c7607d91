"""Closed-form limit objects: drifting Maxwellian, exact finite-N stationary
marginals, relative entropy, and the moment flows of the limiting linear
Fokker-Planck equation and of the Maxwell-molecule (gamma = 0) collision
flow.

Moment flows are handled at the moment level (closed linear ODEs with exact
exponential solutions) rather than as 3D grid PDEs: every target here is a
moment or a closed-form density.

Derivations used as oracles (committed here and exercised in the tests):

* Linear Fokker-Planck  df = d.(df + (3/2 eps0)(v-u) f):
  integrating against v gives  m' = -(3/2 eps0)(m - u); against v (x) v and
  centering gives  S' = 2 I - (3/eps0) S  for S = M2 - m (x) m. Hence m
  relaxes to u at rate 3/(2 eps0) and S to (2 eps0/3) I at rate 3/eps0.

* Maxwell-molecule collision flow (kernel |v-w|^2 P_perp): integrating the
  collision integral against v_a v_b and symmetrizing gives
      M2' = E_{f f'}[ 2|d|^2 delta_ab - 6 d_a d_b ],  d = v - w,
  and with E[|d|^2] = 2 tr S, E[d (x) d] = 2 S this closes to
      M2' = 4 tr(S) I - 12 S.
  The mean and tr S are conserved and the anisotropic part
  A = S - (tr S/3) I obeys A' = -12 A: exponential decay at rate 12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import ConservationMode, ManifoldSpec, log_sphere_area
from .master_sim import KernelSpec
from .observables import MarginalHistogram
from .spectral import eigenvalue_scaled, limit_eigenvalue


@dataclass(frozen=True)
class LimitParams:
    """Drift u and co-moving energy per particle eps0 of the limit objects."""

    eps0: float
    u: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float).reshape(3))
        if not self.eps0 > 0:
            raise ValueError("eps0 must be positive")

    @property
    def sigma(self) -> float:
        """Per-component standard deviation sqrt(2 eps0 / 3)."""
        return math.sqrt(2.0 * self.eps0 / 3.0)


@dataclass
class MomentState:
    """Mean and second moment matrix M2 = int v (x) v f."""

    mean: np.ndarray
    second: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float).reshape(3)
        self.second = np.asarray(self.second, dtype=float).reshape(3, 3)

    @property
    def centered(self) -> np.ndarray:
        return self.second - np.outer(self.mean, self.mean)

    @property
    def energy(self) -> float:
        return 0.5 * float(np.trace(self.second))

    @property
    def anisotropy(self) -> np.ndarray:
        s = self.centered
        return s - np.trace(s) / 3.0 * np.eye(3)


def maxwellian_eval(p: LimitParams, v) -> np.ndarray | float:
    """Drifting Maxwellian (3/(4 pi eps0))^(3/2) exp(-3|v-u|^2/(4 eps0))."""
    v = np.asarray(v, dtype=float)
    dv = v - p.u
    r2 = (dv * dv).sum(axis=-1)
    norm = (3.0 / (4.0 * math.pi * p.eps0)) ** 1.5
    out = norm * np.exp(-3.0 * r2 / (4.0 * p.eps0))
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# exact stationary marginals of the uniform measure (energy-only manifold)


def _marginal_log_prefactor(spec: ManifoldSpec, n: int) -> float:
    big_n = spec.n_particles
    return (log_sphere_area(3 * (big_n - n) - 1)
            - log_sphere_area(3 * big_n - 1)
            - 1.5 * n * math.log(spec.radius_sq))


def stationary_marginal_eval(spec: ManifoldSpec, n: int, velocities) -> np.ndarray | float:
    """Exact n-velocity marginal of the uniform measure on the energy sphere.

    Density at (v_1..v_n):
        (|S^{3(N-n)-1}| / |S^{3N-1}|) (2 N eps)^{-3n/2}
            (1 - sum |v_k|^2 / (2 N eps))^{(3(N-n)-2)/2}
    for sum |v_k|^2 < 2 N eps, zero outside. The exponent carries the co-area
    Jacobian of the surface-measure disintegration, which makes the density
    integrate to exactly 1 (checked by quadrature in the tests).

    ``velocities`` has shape (..., n, 3); returns shape (...).
    """
    if spec.mode is not ConservationMode.ENERGY_ONLY:
        raise ValueError("stationary marginal is for the energy-only manifold")
    if not 1 <= n < spec.n_particles:
        raise ValueError("need 1 <= n < N")
    v = np.asarray(velocities, dtype=float)
    if v.shape[-2:] != (n, 3):
        raise ValueError(f"velocities must have shape (..., {n}, 3)")
    s = (v * v).sum(axis=(-1, -2)) / spec.radius_sq
    expo = 0.5 * (3 * (spec.n_particles - n) - 2)
    pref = math.exp(_marginal_log_prefactor(spec, n))
    out = np.where(s < 1.0, pref * np.maximum(1.0 - s, 0.0) ** expo, 0.0)
    return float(out) if out.ndim == 0 else out


def stationary_radial_pdf(spec: ManifoldSpec, r) -> np.ndarray:
    """Radial density 4 pi r^2 F1(r) of one velocity's magnitude."""
    r = np.asarray(r, dtype=float)
    v = np.zeros(r.shape + (1, 3))
    v[..., 0, 0] = r
    return 4.0 * math.pi * r ** 2 * stationary_marginal_eval(spec, 1, v)


# ---------------------------------------------------------------------------
# relative entropy


def entropy_grid_edges(p: LimitParams, bins: int = 24, half_width: float = 5.0):
    """Per-axis cubic-bin edges over [u - 5 sigma, u + 5 sigma]^3."""
    h = half_width * p.sigma
    return tuple(np.linspace(p.u[i] - h, p.u[i] + h, bins + 1) for i in range(3))


def velocity_histogram3d(velocities: np.ndarray, edges) -> MarginalHistogram:
    """Dense 3D histogram of pooled velocities (mass-normalized)."""
    pooled = np.asarray(velocities, dtype=float).reshape(-1, 3)
    counts, _ = np.histogramdd(pooled, bins=edges)
    tot = counts.sum()
    if tot == 0:
        raise ValueError("no samples fall inside the grid")
    return MarginalHistogram(1, tuple(np.asarray(e) for e in edges),
                             counts / tot, None, pooled.shape[0])


def relative_entropy(hist: MarginalHistogram, p: LimitParams) -> float:
    """S(f | f_M) = -sum_bins f ln(f / f_M) dv, with 0 ln 0 = 0.

    Nonpositive (Gibbs), zero iff the histogram coincides with the
    bin-discretized Maxwellian. ``hist`` must be a full 3D order-1
    histogram.
    """
    if hist.order != 1 or hist.component is not None:
        raise ValueError("relative entropy needs a full 3D one-velocity histogram")
    counts = np.asarray(hist.counts, dtype=float)
    if counts.sum() == 0:
        raise ValueError("empty histogram")
    ex, ey, ez = hist.edges
    cx, cy, cz = [(e[1:] + e[:-1]) / 2.0 for e in (ex, ey, ez)]
    vol = np.einsum("i,j,k->ijk", np.diff(ex), np.diff(ey), np.diff(ez))
    centers = np.stack(np.meshgrid(cx, cy, cz, indexing="ij"), axis=-1)
    fm = maxwellian_eval(p, centers)
    mask = counts > 0
    # counts are bin masses; compare against the Maxwellian bin mass fm*vol
    ratio = counts[mask] / (fm[mask] * vol[mask])
    return float(-(counts[mask] * np.log(ratio)).sum())


# ---------------------------------------------------------------------------
# moment flows


def fpe_moment_flow(p: LimitParams, m0, second0, t: float) -> MomentState:
    """Exact moment solution of the limiting linear Fokker-Planck flow.

    m(t) = u + (m0 - u) exp(-3t/(2 eps0));
    S(t) = (2 eps0/3) I + (S0 - (2 eps0/3) I) exp(-3t/eps0), S = M2 - m m.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    m0 = np.asarray(m0, dtype=float).reshape(3)
    second0 = np.asarray(second0, dtype=float).reshape(3, 3)
    kappa = 1.5 / p.eps0
    m_t = p.u + (m0 - p.u) * math.exp(-kappa * t)
    s0 = second0 - np.outer(m0, m0)
    s_inf = (2.0 * p.eps0 / 3.0) * np.eye(3)
    s_t = s_inf + (s0 - s_inf) * math.exp(-2.0 * kappa * t)
    return MomentState(mean=m_t, second=s_t + np.outer(m_t, m_t))


def landau_moment_flow(kernel: KernelSpec, m0, second0, t: float) -> MomentState:
    """Exact second-moment relaxation of the Maxwell-molecule collision flow.

    Only gamma = 0 closes at second-moment level. Mean and tr S are
    conserved; the anisotropy S - (tr S/3) I decays as exp(-12 t) (rate
    derived in the module docstring).
    """
    if kernel.gamma != 0.0:
        raise ValueError("moment closure requires gamma = 0")
    if t < 0:
        raise ValueError("t must be >= 0")
    m0 = np.asarray(m0, dtype=float).reshape(3)
    second0 = np.asarray(second0, dtype=float).reshape(3, 3)
    s0 = second0 - np.outer(m0, m0)
    iso = np.trace(s0) / 3.0 * np.eye(3)
    s_t = iso + (s0 - iso) * math.exp(-12.0 * t)
    return MomentState(mean=m0, second=s_t + np.outer(m0, m0))


LANDAU_ANISOTROPY_RATE = 12.0


# ---------------------------------------------------------------------------
# finite-N marginal relaxation rates (n = 1 catalog)


@dataclass(frozen=True)
class MarginalRate:
    observable: str
    degree: int | None
    rate: float
    limit_rate: float


def finite_n_marginal_rates(spec: ManifoldSpec) -> list[MarginalRate]:
    """Exact decay rates of low-order one-particle moments under the sphere
    diffusion, with the corresponding limit Fokker-Planck rates.

    Rates follow from the generator acting on the symmetric polynomial
    lifts (degree-j harmonic sums are exact eigenfunctions), so each rate
    equals ``eigenvalue_scaled`` at the matching degree. On the
    momentum-conserving manifold the exchangeable one-particle mean is
    pinned at u (rate 0). Limit rates are those of the limiting
    Fokker-Planck equation.
    """
    eps_eff = spec.eps if spec.mode is ConservationMode.ENERGY_ONLY else spec.eps0
    rows = []
    if spec.mode is ConservationMode.ENERGY_ONLY:
        rows.append(MarginalRate("mean_component", 1,
                                 eigenvalue_scaled(spec, 1),
                                 limit_eigenvalue(1, eps_eff)))
    else:
        rows.append(MarginalRate("mean_component", None, 0.0, 0.0))
    for name in ("offdiag_second_moment", "diagonal_difference_second_moment"):
        rows.append(MarginalRate(name, 2, eigenvalue_scaled(spec, 2),
                                 limit_eigenvalue(2, eps_eff)))
    return rows
