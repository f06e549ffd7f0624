"""Gamma and Mittag-Leffler values, with the series diagnostics.

Run: python3 demos/01_special_functions.py
"""

import math

from fracstab.specfun import MLDomainError, MLParams, gamma_fn, ml_exp_ratio, mittag_leffler

# %% Gamma constants used by the power rule
print("2 / Gamma(7/3) =", 2 / gamma_fn(7 / 3))
print("1 / Gamma(7/5) =", 1 / gamma_fn(7 / 5))

# %% E_{1,1} is the exponential, E_{2,1}(z^2) is cosh(z)
for z in (-3.0, 0.5, 4.0):
    r = mittag_leffler(MLParams(1.0), z)
    print(f"E_1({z:5.1f}) = {r.value:.15g}  exp = {math.exp(z):.15g}  terms = {r.terms_used}")
print("E_2(4) =", mittag_leffler(MLParams(2.0), 4.0).value, " cosh(2) =", math.cosh(2.0))

# %% Slow decay for alpha < 1: E_alpha(-t^alpha) against exp(-t)
print("\n   t   E_0.5(-t^0.5)   exp(-t)")
for t in (0.5, 1.0, 4.0, 16.0):
    e = mittag_leffler(MLParams(0.5), -(t**0.5)).value
    print(f"{t:5.1f}  {e:.6e}   {math.exp(-t):.6e}")
ratio = ml_exp_ratio(0.5, -1.0, [0.5 * k for k in range(1, 21)])
print("max ratio E/exp on t <= 10:", ratio, "(grows with the horizon)")

# %% Outside the supported range the evaluator refuses rather than guess
try:
    mittag_leffler(MLParams(0.5), 100.0)
except MLDomainError as exc:
    print("\nz = 100:", exc)
