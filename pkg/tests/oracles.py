"""Independent oracles used by the test suite.

Everything here is derived by a route independent of the implementation it
checks: Beta-moment identities on spheres, finite differences, and plain
Monte Carlo over Gaussians.
"""

import math

import numpy as np
from scipy.special import betaln


def rayleigh_quotient_exact(n: int, gamma: float) -> float:
    """Exact quadratic form of the standard trial function (u=0, eps=1).

    Derivation: with d = v_2 - v_1 on the energy-momentum manifold,
    |d|^2 = 4N B with B ~ Beta(3/2, (3N-6)/2) (squared projection of a
    uniform sphere point onto the 3-dimensional pair-difference subspace),
    and the direction of d is uniform on S^2, independent of |d|. The
    integrand (N/2) w_12 A^2 d_1^2 (1 - n_1^2) then factorizes:
        (N/2) A^2 E[|d|^{4+gamma}] E[n_1^2 (1 - n_1^2)]
      = (9 (3N-1) / (8N)) * (2/15) * E[|d|^{4+gamma}].
    At N=2 the Beta degenerates to the constant |d|^2 = 8.
    """
    s = 0.5 * (4.0 + gamma)
    if n == 2:
        moment = 8.0 ** s
    else:
        a, b = 1.5, 1.5 * (n - 2)
        moment = math.exp(s * math.log(4.0 * n) + betaln(a + s, b) - betaln(a, b))
    return (9.0 * (3 * n - 1) / (8.0 * n)) * (2.0 / 15.0) * moment


def _pair_projected_gradient(vflat, k, l, grad):
    """Ambient field P_B(V) grad for the pair (k, l)."""
    n = len(vflat) // 3
    v = vflat.reshape(n, 3)
    g = grad.reshape(n, 3)
    d = v[k] - v[l]
    nh = d / np.linalg.norm(d)
    c = 0.5 * (g[k] - g[l])
    cp = c - nh * (nh @ c)
    out = np.zeros_like(v)
    out[k] = cp
    out[l] = -cp
    return out.ravel()


def _poly_gradient(phi, vflat, n):
    v = vflat.reshape(n, 3)
    g = np.zeros_like(v)
    if phi.kind == "coord":
        g[phi.k, phi.sigma] = 1.0
    elif phi.kind == "quad":
        g[phi.k, phi.sigma] += v[phi.m, phi.tau]
        g[phi.m, phi.tau] += v[phi.k, phi.sigma]
    elif phi.kind == "energy":
        g = v.copy()
    elif phi.kind == "momentum":
        g[:, phi.sigma] = 1.0
    return g.ravel()


def generator_apply_fd(state, kernel, phi, h: float = 1e-5) -> float:
    """Finite-difference evaluation of the pairwise generator.

    sum over pairs of a_kl * div(P_B grad phi) with the divergence taken by
    central differences of the projected-gradient field.
    """
    spec = state.spec
    n = spec.n_particles
    vflat = state.v
    p = state.particles
    total = 0.0
    for k in range(n):
        for l in range(k + 1, n):
            beta = float(np.linalg.norm(p[k] - p[l]))
            a = 2.0 * beta ** (2.0 + kernel.gamma) / (n - 1)
            div = 0.0
            for idx in range(3 * n):
                vp = vflat.copy()
                vp[idx] += h
                vm = vflat.copy()
                vm[idx] -= h
                up = _pair_projected_gradient(vp, k, l, _poly_gradient(phi, vp, n))
                um = _pair_projected_gradient(vm, k, l, _poly_gradient(phi, vm, n))
                div += (up[idx] - um[idx]) / (2.0 * h)
            total += a * div
    return total


def landau_second_moment_rhs_mc(mean, cov, n_samples, rng):
    """Monte Carlo evaluation of the Maxwell-molecule second-moment flow.

    Direct average of the collision-integral moment identity
    E_{f f'}[2 |d|^2 I - 6 d (x) d], d = v - w, for f Gaussian(mean, cov);
    independent check of the closed form 4 tr(S) I - 12 S.
    """
    chol = np.linalg.cholesky(cov)
    v = mean + rng.standard_normal((n_samples, 3)) @ chol.T
    w = mean + rng.standard_normal((n_samples, 3)) @ chol.T
    d = v - w
    dsq = (d * d).sum(axis=1)
    term = 2.0 * dsq[:, None, None] * np.eye(3) \
        - 6.0 * np.einsum("na,nb->nab", d, d)
    return term.mean(axis=0)


def fpe_mean_rhs_quadrature(p, m0):
    """Mean drift of the linear Fokker-Planck flow by 1D Gaussian quadrature.

    Integrates v against d.(df + (3/2 eps0)(v-u) f) for a Gaussian f with
    mean m0; integration by parts gives -(3/2 eps0)(m0 - u), and this
    helper evaluates the same object numerically on a grid.
    """
    from scipy.integrate import quad

    kappa = 1.5 / p.eps0
    out = np.zeros(3)
    sigma = p.sigma
    for axis in range(3):
        def integrand(x, axis=axis):
            # d/dx (f' + kappa (x - u) f) against x reduces, after parts,
            # to -(f' + kappa (x - u) f)
            mu = m0[axis]
            f = math.exp(-0.5 * (x - mu) ** 2 / sigma ** 2) / (sigma * math.sqrt(2 * math.pi))
            fp = -(x - mu) / sigma ** 2 * f
            return -(fp + kappa * (x - p.u[axis]) * f)
        val, _ = quad(integrand, m0[axis] - 12 * sigma, m0[axis] + 12 * sigma, limit=200)
        out[axis] = val
    return out
