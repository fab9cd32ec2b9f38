"""LLG started from a self-similar profile stays self-similar.

The expander m(x/t^(1/2)) at t = 1 is evolved to t = 2 and compared with
the profile at x/2^(1/2). The energy 1/2 int |m_x|^2 is tracked along
the way against c^2 (pi / (2 alpha t))^(1/2), the value obtained by
integrating |m_x| = c t^(-1/2) exp(-alpha x^2 / (4t)) directly.

    python demos/self_similar_llg.py [OUTDIR]
"""

import os

import numpy as np

from _common import out_dir
from llkit.evolution import SolverConfig, SpinField, evolve_llg, self_similar_energy
from llkit.frenet_profiles import EXPANDER, ProfileParams, integrate_profile
from llkit.io import svg_plot, write_csv
from llkit.numerics import Grid1D, observed_order

c, alpha = 0.5, 0.5
out = out_dir("self_similar_llg")
prof = integrate_profile(EXPANDER, ProfileParams(c, alpha), 25.0, tol=1e-12)

errs = []
for h in (0.2, 0.1, 0.05):
    g = Grid1D.pinned(-24, 24, h)
    tr = evolve_llg(SpinField(g, prof.m_at(g.x)), alpha, 2.0, SolverConfig(t0=1.0, n_snapshots=5))
    errs.append(np.max(np.abs(tr.final - prof.m_at(g.x / np.sqrt(2)))))
    print(f"h = {h:<5g} sup error at t = 2: {errs[-1]:.3e}")
print(f"observed orders: {np.round(observed_order(errs), 2)}")

t = np.asarray(tr.t)
E = np.asarray(tr.diagnostics.energy)
law = self_similar_energy(c, alpha, t)
print("\n   t     E(t)        law        ratio")
for a, b, d in zip(t, E, law):
    print(f"{a:5.2f}  {b:.6f}  {d:.6f}  {b / d:.6f}")
write_csv(os.path.join(out, "energy.csv"), ["t", "E", "law"], zip(t, E, law))
svg_plot(os.path.join(out, "energy.svg"), [("measured", t, E), ("c^2 (pi/(2 alpha t))^(1/2)", t, law, "dash")],
         title="energy decay", xlabel="t", ylabel="E")
print(f"wrote {out}")
