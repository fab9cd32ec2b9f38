"""Deterministic CSV/JSON writers, native SVG plots and run manifests."""

import json
import os

import numpy as np

__all__ = [
    "write_csv",
    "read_csv",
    "write_json",
    "to_jsonable",
    "svg_plot",
    "svg_sphere_curves",
    "Manifest",
]


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    return "%.17g" % float(v)


def write_csv(path, header, rows):
    """Comma-separated, one header row, 17 significant digits."""
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_csv(path):
    """Header list and a float array (non-numeric cells become nan)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = []
        for line in fh:
            vals = []
            for cell in line.strip().split(","):
                try:
                    vals.append(float(cell))
                except ValueError:
                    vals.append(float("nan"))
            rows.append(vals)
    return header, np.array(rows, dtype=float).reshape(-1, len(header))


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if np.isnan(f):
            return "nan"
        if np.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    return obj


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_jsonable(obj), fh, sort_keys=True, indent=2, ensure_ascii=False)
        fh.write("\n")
    return path


# ------------------------------------------------------------------ SVG

_COLORS = ["#1f4e9c", "#c0392b", "#1e8449", "#7d3c98", "#b9770e", "#2e4053"]


def _esc(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _polyline(xs, ys, color, width=1.5, dash=None):
    pts = " ".join("%.3f,%.3f" % (a, b) for a, b in zip(xs, ys) if np.isfinite(a) and np.isfinite(b))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} points="{pts}"/>'


def svg_plot(path, series, title="", xlabel="", ylabel="", logx=False, logy=False,
             width=640, height=420):
    """Line plot; ``series`` is a list of (label, x, y) or (label, x, y, style) with style 'dash'."""
    ml, mr, mt, mb = 70, 150, 40, 50
    pw, ph = width - ml - mr, height - mt - mb
    tx = np.log10 if logx else (lambda v: v)
    ty = np.log10 if logy else (lambda v: v)
    allx, ally = [], []
    for s in series:
        x = np.asarray(s[1], dtype=float)
        y = np.asarray(s[2], dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        allx.append(tx(x[ok]))
        ally.append(ty(y[ok]))
    ax = np.concatenate(allx) if allx else np.array([0.0, 1.0])
    ay = np.concatenate(ally) if ally else np.array([0.0, 1.0])
    if ax.size == 0:
        ax = np.array([0.0, 1.0])
    if ay.size == 0:
        ay = np.array([0.0, 1.0])
    x0, x1 = float(ax.min()), float(ax.max())
    y0, y1 = float(ay.min()), float(ay.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + ph - (v - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        lx = ("1e%.2g" % fx) if logx else "%.3g" % fx
        ly = ("1e%.2g" % fy) if logy else "%.3g" % fy
        out.append(f'<text x="{X(fx):.1f}" y="{mt + ph + 16}" text-anchor="middle">{lx}</text>')
        out.append(f'<text x="{ml - 6}" y="{Y(fy) + 4:.1f}" text-anchor="end">{ly}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 10}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="16" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {mt + ph / 2})">{_esc(ylabel)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="22" text-anchor="middle" font-size="14">{_esc(title)}</text>')
    for i, s in enumerate(series):
        color = _COLORS[i % len(_COLORS)]
        dash = "5,4" if len(s) > 3 and s[3] == "dash" else None
        x = tx(np.where(np.asarray(s[1], float) > 0, s[1], np.nan)) if logx else np.asarray(s[1], float)
        y = ty(np.where(np.asarray(s[2], float) > 0, s[2], np.nan)) if logy else np.asarray(s[2], float)
        out.append(_polyline(X(x), Y(y), color, dash=dash))
        ly = mt + 14 + 18 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly - 4}" x2="{ml + pw + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 34}" y="{ly}">{_esc(s[0])}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path


def svg_sphere_curves(path, curves, title="", view=(1.0, 0.8, 0.6), size=420):
    """Orthographic projection of curves on the unit sphere; back-facing parts are dashed.

    ``curves`` is a list of (label, points) with points of shape (n, 3).
    """
    v = np.asarray(view, dtype=float)
    v /= np.linalg.norm(v)
    up = np.array([0.0, 0.0, 1.0])
    e1 = np.cross(up, v)
    e1 = e1 / np.linalg.norm(e1) if np.linalg.norm(e1) > 1e-12 else np.array([1.0, 0.0, 0.0])
    e2 = np.cross(v, e1)
    r = 0.4 * size
    cx, cy = size / 2, size / 2 + 10
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size + 160}" height="{size + 20}" '
           f'viewBox="0 0 {size + 160} {size + 20}" font-family="sans-serif" font-size="12">',
           f'<rect x="0" y="0" width="{size + 160}" height="{size + 20}" fill="white"/>',
           f'<circle cx="{cx}" cy="{cy}" r="{r}" fill="none" stroke="#999"/>',
           f'<text x="{cx}" y="18" text-anchor="middle" font-size="14">{_esc(title)}</text>']
    for i, (label, pts) in enumerate(curves):
        p = np.asarray(pts, dtype=float)
        color = _COLORS[i % len(_COLORS)]
        X = cx + r * (p @ e1)
        Y = cy - r * (p @ e2)
        front = p @ v >= 0
        # split into runs of constant visibility
        start = 0
        for j in range(1, p.shape[0] + 1):
            if j == p.shape[0] or front[j] != front[start]:
                lo = max(start - 1, 0)
                out.append(_polyline(X[lo:j], Y[lo:j], color, 1.5, None if front[start] else "3,3"))
                start = j
        ly = 40 + 18 * i
        out.append(f'<line x1="{size + 10}" y1="{ly - 4}" x2="{size + 30}" y2="{ly - 4}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{size + 34}" y="{ly}">{_esc(label)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
    return path


# ------------------------------------------------------------------ manifest

class Manifest:
    """Collects the outputs of one command run and writes manifest.json.

    Wall-clock timing is deliberately left out so identical configs give
    byte-identical manifests.
    """

    def __init__(self, out_dir, command, config, figure=None):
        from . import __version__

        self.out_dir = out_dir
        self.data = {"command": command, "config": config, "version": __version__,
                     "files": [], "runs": [], "tolerances": {}, "calibrated_defaults": {}}
        if figure:
            self.data["figure"] = figure
        os.makedirs(out_dir, exist_ok=True)

    def path(self, name):
        if name in self.data["files"]:
            raise ValueError(f"output {name!r} registered twice")
        self.data["files"].append(name)
        return os.path.join(self.out_dir, name)

    def run(self, name, status, **info):
        if status not in ("completed", "guard-aborted", "failed"):
            raise ValueError(f"bad status {status!r}")
        self.data["runs"].append({"name": name, "status": status, **info})

    def status(self):
        st = [r["status"] for r in self.data["runs"]]
        if "failed" in st:
            return "failed"
        if "guard-aborted" in st:
            return "guard-aborted"
        return "completed"

    def write(self):
        self.data["status"] = self.status()
        self.data["files"] = sorted(self.data["files"])
        return write_json(os.path.join(self.out_dir, "manifest.json"), self.data)
