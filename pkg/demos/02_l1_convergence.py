"""L1 discretization of the Caputo derivative and its convergence order.

Run: python3 demos/02_l1_convergence.py
"""

import numpy as np

from fracstab.fracderiv import CaputoOrder, SampledFn, caputo_l1_track, caputo_power_rule, empirical_order

order = CaputoOrder(2 / 3)
c, p = caputo_power_rule(order, 2.0)
print(f"D^(2/3) t^2 = {c:.6f} t^{p:.6f}")

# %% Max error over [0, 1] as the step halves
pts = []
print("\n      h       max error")
for m in range(6, 11):
    n = 2**m
    f = SampledFn.from_function(lambda t: t**2, 1.0 / n, n)
    err = float(np.max(np.abs(caputo_l1_track(f, order).values - c * f.times**p)))
    pts.append((1.0 / n, err))
    print(f"  2^-{m:<3d}  {err:.3e}")
print("empirical order:", round(empirical_order(pts), 4), " expected 2 - alpha =", round(2 - 2 / 3, 4))

# %% Constants have zero derivative; near alpha = 1 the operator approaches d/dt
print("\nconstant:", np.abs(caputo_l1_track(SampledFn(0.01, np.full(101, 7.0)), order).values).max())
n = 2000
f = SampledFn.from_function(np.sin, 1.0 / n, n)
near = caputo_l1_track(f, CaputoOrder(0.999)).values[-1]
print(f"D^0.999 sin at t=1: {near:.4f}, cos(1) = {np.cos(1.0):.4f}")
