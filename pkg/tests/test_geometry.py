import numpy as np
import pytest

from llkit.geometry import (AnisotropyParams, RotationSO3, UnitVec3, apply_soliton_symmetry,
                            dispersion_omega, from_hydrodynamical, inverse_stereographic,
                            kabsch_rotation, planar_complex, project_stereographic, renormalize,
                            rotation_about, to_hydrodynamical, transverse_complex)
from llkit.numerics import observed_order
from llkit.solitons import hydro_soliton, soliton_profile


def test_unit_vector_tolerance():
    UnitVec3(0.0, 0.0, 1.0)
    with pytest.raises(ValueError):
        UnitVec3(0.0, 0.0, 1.0 + 1e-9)
    v = UnitVec3.from_array([3.0, 4.0, 0.0], renorm=True)
    assert (v.x1, v.x2) == pytest.approx((0.6, 0.8), abs=1e-15)


def test_rotation_validation():
    RotationSO3(rotation_about([1, 2, 3], 0.7))
    with pytest.raises(ValueError):
        RotationSO3(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        AnisotropyParams(-1.0, 0.0)


@pytest.mark.parametrize("m,u", [((0, 0, 1), 0), ((1, 0, 0), 1), ((0, 1, 0), 1j)])
def test_stereographic_examples(m, u):
    assert project_stereographic(np.array(m, float)) == pytest.approx(u, abs=1e-15)
    assert np.allclose(inverse_stereographic(u), m, atol=1e-15)


def test_stereographic_pole_rejected():
    with pytest.raises(ValueError):
        project_stereographic(np.array([0.0, 0.0, -1.0]))


def test_stereographic_round_trip():
    rng = np.random.default_rng(0)
    m = renormalize(rng.standard_normal((20000, 3)))
    m = m[m[:, 2] > -0.99][:10000]
    assert m.shape[0] == 10000
    back = inverse_stereographic(project_stereographic(m))
    assert np.max(np.linalg.norm(back - m, axis=1)) <= 1e-12


def test_hydrodynamical_examples():
    assert to_hydrodynamical(np.array([0.0, 1.0, 0.0])) == pytest.approx((0.0, 0.0))
    assert to_hydrodynamical(np.array([0.0, -1.0, 0.0])) == pytest.approx((0.0, np.pi))
    with pytest.raises(ValueError):
        to_hydrodynamical(np.array([0.0, 0.0, 1.0]))


def test_hydrodynamical_soliton():
    # the soliton in these variables is (v_c, w_c) with -phi' = w_c
    c = 0.4
    x = np.linspace(-15, 15, 30001)
    v, w = to_hydrodynamical(soliton_profile(c, x), x)
    vc, wc = hydro_soliton(c, x)
    assert np.max(np.abs(v - vc)) <= 1e-15
    # w comes from a centered difference of the phase, error O(h^2) with h = 1e-3
    assert np.max(np.abs(w - wc)[1:-1]) <= 10 * (x[1] - x[0]) ** 2


def test_from_hydrodynamical_constant():
    x = np.linspace(-1, 1, 21)
    m = from_hydrodynamical(np.zeros_like(x), np.zeros_like(x), x)
    assert np.allclose(m, [1.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        from_hydrodynamical(np.ones_like(x), np.zeros_like(x), x)


def test_from_hydrodynamical_soliton_is_rotation():
    # same speed profile |m'| as the soliton itself
    c = 0.6
    x = np.linspace(-20, 20, 8001)
    m = from_hydrodynamical(*hydro_soliton(c, x), x)
    ref = soliton_profile(c, x)
    sp = np.linalg.norm(np.gradient(m, x, axis=0), axis=1)
    sr = np.linalg.norm(np.gradient(ref, x, axis=0), axis=1)
    assert np.max(np.abs(sp - sr)) <= 1e-4
    assert np.max(np.abs(m[:, 2] - ref[:, 2])) <= 1e-15


def test_hydrodynamical_round_trip_order():
    errs = []
    for n in (401, 801, 1601):
        x = np.linspace(-5, 5, n)
        v = 0.5 * np.exp(-x ** 2)
        w = np.sin(x) * np.exp(-x ** 2 / 4)
        m = from_hydrodynamical(v, w, x)
        # the primitive of sin(x) exp(-x^2/4) from 0 is not elementary; use a fine reference
        xf = np.linspace(-5, 5, 64001)
        wf = np.sin(xf) * np.exp(-xf ** 2 / 4)
        Pf = np.cumsum(np.r_[0, 0.5 * (wf[1:] + wf[:-1]) * np.diff(xf)])
        Pf -= Pf[32000]
        P = np.interp(x, xf, Pf)
        rho = np.sqrt(1 - v ** 2)
        ex = np.stack([rho * np.cos(P), rho * np.sin(P), v], axis=1)
        errs.append(np.max(np.abs(m - ex)))
    assert np.all(observed_order(errs) >= 1.9)


def test_symmetry_identity_and_rotation():
    x = np.linspace(-10, 10, 201)
    u = soliton_profile(0.3, x)
    assert np.array_equal(apply_soliton_symmetry(u, 0.0, 1, 0.0), u)
    r = apply_soliton_symmetry(u, np.pi, 1, 0.0)
    assert np.allclose(r, u * [-1, -1, 1], atol=1e-15)


def test_symmetry_translation_by_grid_units():
    x = np.linspace(-10, 10, 201)
    u = soliton_profile(0.3, x)
    sh = apply_soliton_symmetry(u, 0.0, 1, 5 * 0.1, x=x)
    assert np.array_equal(sh[5:], u[:-5])


def test_symmetry_preserves_norm_and_speed():
    x = np.linspace(-10, 10, 2001)
    u = soliton_profile(0.3, x)
    r = apply_soliton_symmetry(u, 1.1, -1, 0.0)
    assert np.max(np.abs(np.linalg.norm(r, axis=1) - 1)) <= 1e-15
    d0 = np.linalg.norm(np.gradient(u, x, axis=0), axis=1)
    d1 = np.linalg.norm(np.gradient(r, x, axis=0), axis=1)
    assert np.max(np.abs(d0 - d1)) <= 1e-14


def test_dispersion_examples():
    assert dispersion_omega(2.0) == pytest.approx(4.0)
    k = np.linspace(0, 3, 7)
    assert np.allclose(dispersion_omega(k, 0, 2 * 0.7), np.sqrt(k ** 4 + 2 * 0.7 * k ** 2))
    assert dispersion_omega(0.0, 0.5, 2.0) == pytest.approx(1.0)


def test_dispersion_even_and_monotone():
    k = np.linspace(0, 5, 101)
    w = dispersion_omega(k, 0.3, 1.7)
    assert np.array_equal(w, dispersion_omega(-k, 0.3, 1.7))
    assert np.all(np.diff(w) > 0)


def test_complex_conventions():
    m = np.array([0.6, 0.0, 0.8])
    assert planar_complex(m) == 0.6
    assert transverse_complex(m) == 0.6 + 0.8j


def test_kabsch_recovers_rotation():
    rng = np.random.default_rng(3)
    R = rotation_about([0.3, -1, 2], 0.9)
    src = renormalize(rng.standard_normal((50, 3)))
    assert np.allclose(kabsch_rotation(src, src @ R.T), R, atol=1e-12)
