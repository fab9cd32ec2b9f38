"""The limit angle theta(c) between A+ and A-, and what it implies for uniqueness.

At alpha = 1 the angle is arccos(cos(2 c pi^(1/2))), a zigzag that hits
every value in [0, pi] infinitely often. So one jump initial datum admits
many self-similar solutions. Slightly below alpha = 1 the zigzag survives
for a few periods, which is enough to see two or more speeds per angle.

    python demos/limit_angle_map.py [OUTDIR]
"""

import os

import numpy as np

from _common import out_dir
from llkit.frenet_profiles import ProfileParams, limit_angle
from llkit.io import svg_plot, write_csv
from llkit.rough_data import multiplicity_scan

out = out_dir("limit_angle_map")
cs = np.linspace(0.05, 3.0, 40)

closed = np.arccos(np.cos(2 * cs * np.sqrt(np.pi)))
computed = np.array([limit_angle(ProfileParams(c, 1.0)) for c in cs])
print(f"alpha = 1: max |computed - closed form| = {np.max(np.abs(computed - closed)):.2e}")

near = np.array([limit_angle(ProfileParams(c, 0.95)) for c in cs])
write_csv(os.path.join(out, "angle_map.csv"), ["c", "theta_alpha1", "closed_form", "theta_alpha095"],
          zip(cs, computed, closed, near))
svg_plot(os.path.join(out, "angle_map.svg"),
         [("alpha = 1", cs, computed), ("closed form", cs, closed, "dash"), ("alpha = 0.95", cs, near)],
         title="limit angle", xlabel="c", ylabel="theta")

theta = 1.0
for a in (1.0, 0.95):
    roots, note = multiplicity_scan(theta, a, k_wanted=3, c_max=3.0, n_scan=40)
    print(f"alpha = {a:<4g} speeds with theta = {theta}: {np.round(roots, 6)} {note}")
print(f"wrote {out}")
