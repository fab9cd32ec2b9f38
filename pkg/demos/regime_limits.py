"""Three asymptotic regimes of the anisotropic LL equation, measured.

Easy-plane, small eps: the rescaled system approaches Sine-Gordon,
with errors scaling like eps^2. Easy-plane, weak anisotropy: long-wave
data approach the free wave equation at rate sigma^(1/2). Easy-axis:
NLS-eps approaches cubic NLS at rate eps. Each study prints its table
and the fitted log-log slope.

    python demos/regime_limits.py [OUTDIR]
"""

import os

from _common import out_dir
from llkit.io import svg_plot, write_json
from llkit.regimes import cls_convergence_study, sg_convergence_study, wave_regime_study

out = out_dir("regime_limits")
studies = {
    "sine-gordon": sg_convergence_study(),
    "free-wave": wave_regime_study(),
    "cubic-nls": cls_convergence_study(),
}
for name, rep in studies.items():
    pname = "sigma" if name == "free-wave" else "eps"
    print(f"\n{name}: slope {rep.slope:.3f}")
    for p, e, size in rep.table():
        print(f"  {pname} = {p:<8g} error {e:.3e}   size {size:.3f}")
    for note in rep.notes:
        print(f"  note: {note}")
    svg_plot(os.path.join(out, f"{name}.svg"), [("error", rep.eps, rep.errors[rep.norm])],
             title=f"{name}: slope {rep.slope:.3f}", xlabel=pname, ylabel="error", logx=True, logy=True)
    write_json(os.path.join(out, f"{name}.json"), {"param": rep.eps, "errors": rep.errors,
                                                    "slope": rep.slope, "notes": rep.notes})
print(f"\nfree wave in eps (sigma = 0): slope {studies['free-wave'].extra['eps_slope']:.3f}")
print(f"wrote {out}")
