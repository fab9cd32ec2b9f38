"""Shrinker profile for c = 0.5, alpha = 0.5 and its two limit circles.

For large |x| the profile winds ever faster around great circles with
normals B+ and B-. The caption numbers to compare with are
B+ ~ (-0.72, -0.3, 0.63) and an angle of about 1.5951 between the circles.

    python demos/shrinker_circles.py [OUTDIR]
"""

import os

import numpy as np

from _common import out_dir
from llkit.frenet_profiles import (SHRINKER, ProfileParams, circle_distance_check, integrate_profile,
                                   shrinker_limit_circles)
from llkit.io import svg_plot, svg_sphere_curves, write_json

c, alpha = 0.5, 0.5
out = out_dir("shrinker_circles")

# the winding phase grows like x^2, hence the small step
prof = integrate_profile(SHRINKER, ProfileParams(c, alpha), 20.0, tol=1e-11, h=2e-4)
circ = shrinker_limit_circles(prof)
worst, xs, ratio = circle_distance_check(prof, circ)
print(f"x reached      {prof.x[-1]:.2f} (shrinker cap)")
print(f"B+             {np.round(circ.B_plus, 4)}")
print(f"B-             {np.round(circ.B_minus, 4)}")
print(f"angle          {circ.angle:.6f}")
print(f"dist / bound   max {worst:.3e}, far field {ratio[-1]:.3e} "
      f"(alpha^2 / (30 sqrt 2) = {alpha ** 2 / (30 * np.sqrt(2)):.3e})")

# great circles with the fitted normals, for the picture
s = np.linspace(0, 2 * np.pi, 400)


def circle(B):
    e1 = np.cross(B, [0.0, 0.0, 1.0])
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(B, e1)
    return np.outer(np.cos(s), e1) + np.outer(np.sin(s), e2)


pos = prof.x >= 0
step = 5
svg_sphere_curves(os.path.join(out, "profile_positive.svg"),
                  [("f, x >= 0", prof.m[pos][::step]), ("C+", circle(circ.B_plus))],
                  title="shrinker, x >= 0")
svg_sphere_curves(os.path.join(out, "profile_full.svg"),
                  [("f", prof.m[::step]), ("C+", circle(circ.B_plus)), ("C-", circle(circ.B_minus))],
                  title="shrinker, both circles")
svg_plot(os.path.join(out, "projection.svg"),
         [("C+", circle(circ.B_plus)[:, 0], circle(circ.B_plus)[:, 1]),
          ("C-", circle(circ.B_minus)[:, 0], circle(circ.B_minus)[:, 1], "dash")],
         title="limit circles projected on the (f1, f2) plane", xlabel="f1", ylabel="f2")
write_json(os.path.join(out, "circles.json"), {"B_plus": circ.B_plus, "B_minus": circ.B_minus,
                                               "angle": circ.angle, "max_ratio": worst})
print(f"wrote {out}")
