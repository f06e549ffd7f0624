"""Gronwall envelope and the semigroup perturbation bound.

Run: python3 demos/04_bounds.py
"""

import numpy as np
import scipy.linalg

from fracstab.stability import GronwallInstance, fit_growth_bound, gronwall_bound, perturbation_bound

# %% a(t) = Z + u int_0^t (t-s)^(alpha-1) a(s) ds is solved exactly by Z E_alpha(Gamma(alpha) u t^alpha)
print("   t   alpha=0.3   alpha=0.5   alpha=0.8")
for t in np.linspace(0, 2, 5):
    row = [gronwall_bound(GronwallInstance(1.0, 1.0, a), t) for a in (0.3, 0.5, 0.8)]
    print(f"{t:4.1f}  " + "  ".join(f"{v:10.4g}" for v in row))

# %% Fit ||e^{At}|| <= M e^{wt}, then bound a perturbed semigroup
A = np.array([[-1.0, 4.0, 0.0], [0.0, -1.5, 1.0], [0.0, 0.0, -0.5]])
M, w = fit_growth_bound(A, 40.0)
print(f"\nM = {M:.4f}, w = {w:.4f}")
rng = np.random.default_rng(0)
B = rng.normal(size=(3, 3))
B *= 0.05 / np.linalg.norm(B, 2)
print("   t   ||e^{(A+B)t}||   bound")
for t in (0.0, 1.0, 2.5, 5.0):
    lhs = np.linalg.norm(scipy.linalg.expm((A + B) * t), 2)
    print(f"{t:4.1f}   {lhs:12.5f}   {perturbation_bound(M, w, 0.05, t):10.5f}")
