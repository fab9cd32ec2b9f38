import json

import numpy as np
import pytest

from llkit.io import Manifest, read_csv, svg_plot, svg_sphere_curves, to_jsonable, write_csv, write_json
from llkit.numerics import (Grid1D, fd_derivative, fit_loglog_slope, observed_order,
                            periodic_primitive, sobolev_norm, spectral_derivative)


def test_grid_shapes():
    g = Grid1D.periodic(0, 1, 64)
    assert g.x[-1] == pytest.approx(1 - 1 / 64)
    p = Grid1D.pinned(-1, 1, 0.125)
    assert p.n == 17 and p.x[-1] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        Grid1D(0, 1, 8)


def test_fd_derivative_order():
    errs = []
    for n in (41, 81, 161):
        x = np.linspace(0, 2, n)
        d = fd_derivative(np.sin(x), x[1] - x[0], 1, 4)
        errs.append(np.max(np.abs(d - np.cos(x[2:-2]))))
    assert np.all(observed_order(errs) > 3.9)


def test_spectral_derivative_exact_on_modes():
    g = Grid1D.periodic(0, 2 * np.pi, 32)
    assert np.allclose(spectral_derivative(np.sin(3 * g.x), g.length, 2), -9 * np.sin(3 * g.x), atol=1e-12)


def test_sobolev_norm_of_mode():
    # |cos(kx)|_{H^s}^2 on [0, 2 pi) is pi (1 + k^2)^s
    g = Grid1D.periodic(0, 2 * np.pi, 64)
    assert sobolev_norm(np.cos(2 * g.x), g.length, 1) == pytest.approx(np.sqrt(5 * np.pi))
    assert sobolev_norm(np.cos(2 * g.x), g.length, 1, homogeneous=True) == pytest.approx(np.sqrt(4 * np.pi))


def test_periodic_primitive():
    g = Grid1D.periodic(0, 2 * np.pi, 64)
    p = periodic_primitive(np.cos(g.x) + 0.5, g.length)
    assert np.allclose(p, np.sin(g.x) + 0.5 * g.x, atol=1e-12)


def test_slope_fit_and_discard_rule():
    p = np.array([0.2, 0.1, 0.05, 0.025])
    s, _, used = fit_loglog_slope(p, 3 * p ** 2)
    assert s == pytest.approx(2.0) and used.all()
    # an outlier at the largest parameter has high leverage: with four points it
    # never exceeds twice the RMS residual, with eight it is detected and dropped
    p4 = p.copy()
    e4 = 3 * p4 ** 2
    e4[0] *= 20
    assert fit_loglog_slope(p4, e4)[2].all()
    p8 = 0.4 / 2 ** np.arange(8)
    e8 = 3 * p8 ** 2
    e8[0] *= 20
    s8, _, used8 = fit_loglog_slope(p8, e8)
    assert not used8[0] and used8[1:].all() and s8 == pytest.approx(2.0)


def test_csv_round_trip(tmp_path):
    path = tmp_path / "a.csv"
    write_csv(path, ["x", "y", "ok"], [(0.1, 1 / 3, True), (2.0, np.pi, False)])
    text = path.read_text()
    assert "0.33333333333333331" in text
    header, data = read_csv(path)
    assert header == ["x", "y", "ok"]
    assert data[1, 1] == np.pi and data[0, 2] == 1.0


def test_json_is_stable(tmp_path):
    obj = {"b": np.float64(np.nan), "a": np.arange(3), "c": np.bool_(True)}
    assert to_jsonable(obj) == {"b": "nan", "a": [0, 1, 2], "c": True}
    write_json(tmp_path / "x.json", obj)
    text = (tmp_path / "x.json").read_text()
    assert text.index('"a"') < text.index('"b"')


def test_svg_outputs(tmp_path):
    svg_plot(tmp_path / "p.svg", [("s", [1, 2, 3], [1, 4, 9])], logx=True, logy=True)
    pts = np.stack([np.cos(np.linspace(0, 6, 50)), np.sin(np.linspace(0, 6, 50)), np.zeros(50)], 1)
    svg_sphere_curves(tmp_path / "s.svg", [("circle", pts)])
    for name in ("p.svg", "s.svg"):
        text = (tmp_path / name).read_text()
        assert text.startswith("<svg") and "<polyline" in text


def test_manifest(tmp_path):
    man = Manifest(str(tmp_path), "profile", {"c": 1}, "expander-profiles")
    man.path("b.csv")
    man.path("a.csv")
    with pytest.raises(ValueError):
        man.path("a.csv")
    man.run("r1", "completed")
    man.run("r2", "guard-aborted")
    with pytest.raises(ValueError):
        man.run("r3", "finished")
    man.write()
    data = json.loads((tmp_path / "manifest.json").read_text())
    assert data["files"] == ["a.csv", "b.csv"]
    assert data["status"] == "guard-aborted"
    assert data["figure"] == "expander-profiles"
