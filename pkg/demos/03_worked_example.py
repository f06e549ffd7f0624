"""Three-state feedback example: certificate, simulations and SVG plots.

Run: python3 demos/03_worked_example.py [output-dir]
Writes open_loop.svg, closed_loop.svg and closed_loop.csv to output-dir
(default: current directory).
"""

import sys
from pathlib import Path

import numpy as np

from fracstab.model import PRINTED, builtin_example, close_loop
from fracstab.plotting import write_trajectory_svg
from fracstab.sim import SimConfig, check_envelope, integrate
from fracstab.stability import certify, compare_with_printed

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
out.mkdir(parents=True, exist_ok=True)

open_cls = close_loop(builtin_example("open"))
closed_cls = close_loop(builtin_example("closed"))

# %% Spectra before and after feedback
print("open-loop eigenvalues:  ", np.round(np.linalg.eigvals(open_cls.M_inv_A), 4))
print("closed-loop eigenvalues:", np.round(np.linalg.eigvals(closed_cls.M_inv_A), 6))
print("(I-K)^-1 =\n", closed_cls.M_inv)

# %% Certificate, spectral reading plus the replay with M3 = 1/2
cert = certify(closed_cls, literal_M3=PRINTED["M3"])
print(f"\nverdict {cert.verdict}: omega={cert.omega:.6g}, M={cert.M:.4g}, M1={cert.M1:.4g}, "
      f"M2={cert.M2:.4g}, M3={cert.M3:.4g}")
print(f"literal replay: {cert.omega:.4g} > {cert.literal_gain:.4g} is {cert.literal_holds}")
for note in compare_with_printed(cert, PRINTED, closed_cls.M_inv):
    print("  note:", note)
print("open loop verdict:", certify(open_cls).verdict)

# %% Simulations from x0 = (0.5, 0.5, 0.5)
opn = integrate(open_cls, SimConfig(t_end=1.0, dt=1e-4))
print(f"\nopen loop: {opn.outcome} at t={opn.final_time:.4f}")
cl = integrate(closed_cls, SimConfig(t_end=40.0, dt=1e-3))
print(f"closed loop: {cl.outcome}, |x(40)| = {np.linalg.norm(cl.final_state):.3e}")
env = check_envelope(cl, cert, 1.1)
print("decay envelope holds at slack 1.1:", env.holds)

write_trajectory_svg(opn, out / "open_loop.svg", "open loop")
write_trajectory_svg(cl, out / "closed_loop.svg", "closed loop")
cl.to_csv(out / "closed_loop.csv")
print("wrote", ", ".join(str(out / f) for f in ("open_loop.svg", "closed_loop.svg", "closed_loop.csv")))
