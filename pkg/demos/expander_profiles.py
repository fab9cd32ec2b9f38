"""Expander profiles for c = 0.8 and three damping values.

Damping pulls the profile onto its limit directions much faster: the
speed |m'(x)| = c exp(-alpha x^2 / 4) is the whole story, and the
distance to A+ falls off on the same scale.

    python demos/expander_profiles.py [OUTDIR]
"""

import os
import time

import numpy as np

from _common import out_dir
from llkit.frenet_profiles import EXPANDER, ProfileParams, integrate_profile, limit_vectors, limit_x_max
from llkit.io import svg_plot, svg_sphere_curves, write_csv

c = 0.8
alphas = (0.01, 0.2, 0.4)
out = out_dir("expander_profiles")

curves, rows, dist_series = [], [], []
for a in alphas:
    t0 = time.perf_counter()
    P = ProfileParams(c, a)
    prof = integrate_profile(EXPANDER, P, limit_x_max(P), tol=1e-11)
    lim = limit_vectors(prof)
    keep = np.abs(prof.x) <= 10
    curves.append((f"alpha={a:g}", prof.m[keep]))
    pos = prof.x >= 0
    d = np.linalg.norm(prof.m[pos] - lim.A_plus, axis=1)
    dist_series.append((f"alpha={a:g}", prof.x[pos][1:], d[1:]))
    for x in (2.0, 5.0, 10.0):
        rows.append((a, x, d[np.argmin(np.abs(prof.x[pos] - x))], c * np.exp(-a * x * x / 4)))
    print(f"alpha={a:<5g} A+ = {np.round(lim.A_plus, 4)}  angle(A+, A-) = {lim.angle:.4f}"
          f"  (x_max {prof.x[-1]:.1f}, {time.perf_counter() - t0:.1f} s)")

write_csv(os.path.join(out, "distance_to_limit.csv"), ["alpha", "x", "dist_to_A_plus", "speed"], rows)
svg_sphere_curves(os.path.join(out, "profiles.svg"), curves, title="expander profiles, c = 0.8")
svg_plot(os.path.join(out, "distance.svg"), dist_series, title="|m(x) - A+|", xlabel="x",
         ylabel="distance", logy=True)

print("\n alpha     x   |m - A+|     c exp(-alpha x^2/4)")
for a, x, d, s in rows:
    print(f"{a:6g} {x:5g}   {d:.3e}    {s:.3e}")
print(f"\nwrote {out}")
