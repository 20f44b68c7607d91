#!/usr/bin/env python3
"""Variational machinery for the pairwise diffusion's spectral gap.

The mean-field trial function psi = A (sum_i v_{i,1}^2/2 - N/3) gives a
Monte Carlo upper bound on the symmetric spectral gap. Its quadratic form
has an exact Beta-moment closed form, reproduced here by the estimator.

Honest finding (documented in README "Known red criteria"): the printed
bound formula 9/(5 sqrt(pi))/sqrt(3N-4) lies BELOW the trial function's
exact quadratic form (at N=2 the exact value is 3 sqrt(2)/4 ~ 1.0607, an
exact eigenvalue, vs bound 0.718), and the quadratic form tends to an
N-independent constant for every kernel exponent, so no soft/hard scaling
dichotomy is visible through this trial function.
"""

import numpy as np

from kinlab import ConservationMode, KernelSpec, ManifoldSpec
from kinlab.spectral import (gap_scan, lambda1_bound, rayleigh_quotient_mc,
                             standard_trial_function)

rng = np.random.default_rng(5)

print("Coulomb weight (gamma = -3):")
print(f"{'N':>4} {'estimate':>12} {'bound formula':>14}")
for n in (2, 4, 8, 16, 32):
    spec = ManifoldSpec(n, ConservationMode.ENERGY_MOMENTUM, eps=1.0)
    est, err = rayleigh_quotient_mc(spec, standard_trial_function(n),
                                    KernelSpec(-3.0), 50000, rng)
    print(f"{n:>4} {est:>9.4f}+-{err:.4f} {lambda1_bound(n):>14.4f}")

print("\nlog-log scaling of the quadratic form across kernel exponents:")
for gamma in (-3.0, -2.0, 0.0, 3.0):
    res = gap_scan([8, 16, 32, 64], KernelSpec(gamma), 50000, rng)
    print(f"  gamma={gamma:+.0f}: exponent {res.exponent:+.4f} "
          f"+- {res.exponent_stderr:.4f}   estimates "
          f"{np.round(res.estimates, 3).tolist()}")
