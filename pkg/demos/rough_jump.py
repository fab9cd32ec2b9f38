"""LLG from a smoothed jump between two directions.

The jump is taken between the limit vectors A+ and A- of the expander
with c = 0.1, alpha = 0.5. Evolving to t = 1 and fitting a rotated
profile R m_c(., 1) over c should give back c = 0.1 and R = I.
A Picard run on the integral equation shows the contraction rate
growing with the size of the data.

    python demos/rough_jump.py [OUTDIR]
"""

import os

import numpy as np

from _common import out_dir
from llkit.frenet_profiles import EXPANDER, ProfileParams, integrate_profile, limit_vectors, limit_x_max
from llkit.io import write_csv, write_json
from llkit.numerics import Grid1D
from llkit.rough_data import JumpData, audit_smallness, bmo_seminorm, duhamel_solve, jump_experiment

c, alpha = 0.1, 0.5
out = out_dir("rough_jump")

P = ProfileParams(c, alpha)
lim = limit_vectors(integrate_profile(EXPANDER, P, limit_x_max(P), tol=1e-11))
res = jump_experiment(JumpData(lim.A_plus, lim.A_minus), alpha)
print(f"jump angle {res['angle']:.5f}: fitted c = {res['c_fit']:.7f}, "
      f"|R - I| = {np.max(np.abs(res['R_fit'] - np.eye(3))):.1e}, residual {res['residual']:.1e}")
write_json(os.path.join(out, "jump.json"), res)

g = Grid1D.pinned(-20, 20, 0.05)
rows = []
print("\n amplitude   BMO      audit   converged   rate")
for amp in (0.5, 1.0, 2.0, 4.0, 8.0):
    u0 = amp * np.exp(-g.x ** 2)
    b = bmo_seminorm(u0, g.x)
    r = duhamel_solve(u0, alpha, 1.0, g, tol=1e-10, n_t=60, max_iter=40)
    rows.append((amp, b, audit_smallness(b)[0], r.converged, r.rate))
    print(f"{amp:8g}   {b:.4f}   {str(rows[-1][2]):5s}   {str(r.converged):5s}     {r.rate:.3f}")
write_csv(os.path.join(out, "picard.csv"), ["amplitude", "bmo", "audit", "converged", "rate"], rows)
print(f"wrote {out}")
