"""The set of (rho, eps) with C (rho + eps)^2 <= rho.

This is the admissible region of the fixed-point argument for rough
data: rho is the radius of the ball, eps the size of the data. Its
upper boundary is eps = (rho / C)^(1/2) - rho, so rho <= 1/C and
eps <= 1/(4C), and the region shrinks as C grows.

    python demos/smallness_set.py [OUTDIR]
"""

import os

import numpy as np

from _common import out_dir
from llkit.io import svg_plot, write_csv
from llkit.rough_data import DEFAULT_AUDIT_C, audit_smallness

out = out_dir("smallness_set")
series, rows = [], []
for C in (1.0, 2.0, 4.0):
    rho = np.linspace(0, 1 / C, 401)
    top = np.sqrt(rho / C) - rho
    series.append((f"C={C:g}", rho, top))
    i = np.argmax(top)
    rows.append((C, rho[i], top[i], 1 / (4 * C)))
    print(f"C = {C:g}: largest eps {top[i]:.4f} at rho = {rho[i]:.4f} (1/(4C) = {1 / (4 * C):.4f})")

write_csv(os.path.join(out, "peaks.csv"), ["C", "rho_at_peak", "eps_peak", "one_over_4C"], rows)
svg_plot(os.path.join(out, "set.svg"), series, title="boundary of the admissible set",
         xlabel="rho", ylabel="eps")

# the solver's audit uses the same shape with 8C in place of C
ok, eps_max, rho = audit_smallness(0.5)
print(f"audit with calibrated C = {DEFAULT_AUDIT_C}: eps_max = {eps_max:.4f}, eps = 0.5 passes: {ok}")
print(f"wrote {out}")
