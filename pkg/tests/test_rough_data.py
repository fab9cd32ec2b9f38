import numpy as np
import pytest
from scipy.integrate import dblquad

from llkit.frenet_profiles import ProfileParams, limit_angle
from llkit.numerics import Grid1D
from llkit.rough_data import (DEFAULT_AUDIT_C, JumpData, audit_smallness, bmo_seminorm,
                              duhamel_solve, gaussian_semigroup, jump_experiment, kernel,
                              multiplicity_scan, self_similar_carleson, semigroup_apply,
                              smoothed_jump)

GP = Grid1D.pinned(-30, 30, 0.01)


@pytest.mark.parametrize("alpha", [0.3, 1.0])
def test_kernel_has_unit_mass(alpha):
    assert abs(np.sum(kernel(GP.x, alpha, 0.7)) * GP.h - 1) <= 1e-12


@pytest.mark.parametrize("alpha", [0.3, 1.0])
def test_semigroup_on_gaussians(alpha):
    out = semigroup_apply(np.exp(-GP.x ** 2 / 2), alpha, 0.7, GP)
    assert np.max(np.abs(out - gaussian_semigroup(GP.x, 0.5, alpha, 0.7))) <= 1e-12
    per = Grid1D.periodic(-30, 30, 4096)
    out = semigroup_apply(np.exp(-per.x ** 2 / 2), alpha, 0.7, per)
    assert np.max(np.abs(out - gaussian_semigroup(per.x, 0.5, alpha, 0.7))) <= 1e-12


def test_semigroup_property_with_unequal_ends():
    rng = np.random.default_rng(0)
    x = GP.x
    # the decaying part must be negligible at the box edges, or truncation shows up
    f = np.convolve(rng.standard_normal(x.size), np.ones(50) / 50, "same") * np.exp(-x ** 2 / 8)
    f = f + 1j * np.tanh(x)
    two = semigroup_apply(semigroup_apply(f, 0.5, 0.3, GP), 0.5, 0.4, GP)
    assert np.max(np.abs(two - semigroup_apply(f, 0.5, 0.7, GP))) <= 1e-12
    assert np.array_equal(semigroup_apply(f, 0.5, 0.0, GP), f)


def test_bmo_of_a_jump():
    # node sampling on a half-offset grid; the exact value is |A+ - A-|/2
    x = np.arange(-20, 20 + 1e-9, 0.01) + 0.005
    Ap, Am = np.array([1.0, 0, 0]), np.array([0.0, 1, 0])
    f = np.where(x[:, None] > 0, Ap, Am)
    assert bmo_seminorm(f, x) == pytest.approx(np.linalg.norm(Ap - Am) / 2, rel=1e-3)
    assert bmo_seminorm(np.ones_like(x), x) == 0.0


def test_bmo_invariances():
    x = np.arange(-20, 20 + 1e-9, 0.01)
    f = np.stack([np.tanh(x), np.exp(-x ** 2), np.zeros_like(x)], axis=1)
    b = bmo_seminorm(f, x)
    R = np.array([[0.0, -1, 0], [1, 0, 0], [0, 0, 1]])
    assert bmo_seminorm(f + [0.3, -2.0, 5.0], x) == pytest.approx(b, rel=1e-12)
    assert bmo_seminorm(f @ R.T, x) == pytest.approx(b, rel=1e-12)
    assert bmo_seminorm(3 * f, x) == pytest.approx(3 * b, rel=1e-12)


def test_carleson_closed_form_against_double_quadrature():
    c, a = 0.5, 0.5
    r = 1.0
    val = dblquad(lambda y, t: c * c / t * np.exp(-a * y * y / (2 * t)), 0, r * r, -r, r,
                  epsabs=1e-12, epsrel=1e-12)[0] / r
    assert self_similar_carleson(c, a) == pytest.approx(np.sqrt(val), rel=1e-8)


def test_audit_threshold():
    ok, eps_max, rho = audit_smallness(0.5)
    assert ok and eps_max == pytest.approx(1 / (32 * DEFAULT_AUDIT_C)) and rho == eps_max
    assert not audit_smallness(2.0)[0]
    # (rho + eps)^2 / rho is smallest at rho = eps, so the condition reads 32 C eps <= 1
    C = DEFAULT_AUDIT_C
    assert 8 * C * (2 * 0.5) ** 2 <= 0.5
    rhos = np.geomspace(1e-3, 1e3, 20001)
    assert np.all(8 * C * (rhos + 1.01 * eps_max) ** 2 > rhos)
    assert audit_smallness(eps_max)[0]


def test_duhamel_zero_and_small_data():
    g = Grid1D.pinned(-20, 20, 0.05)
    z = duhamel_solve(np.zeros(g.n), 0.5, 1.0, g)
    assert z.converged and np.max(np.abs(z.u)) == 0.0
    r = duhamel_solve(0.5 * np.exp(-g.x ** 2), 0.5, 1.0, g, tol=1e-10, n_t=60)
    assert r.converged and r.rate < 0.5


@pytest.mark.slow
def test_duhamel_large_data_fails_to_contract():
    g = Grid1D.pinned(-20, 20, 0.05)
    r = duhamel_solve(8 * np.exp(-g.x ** 2), 0.5, 1.0, g, tol=1e-10, n_t=60, max_iter=30)
    assert not r.converged and r.rate > 1


def test_multiplicity_alpha_one():
    theta = 1.0
    sp = np.sqrt(np.pi)
    roots, _ = multiplicity_scan(theta, 1.0, k_wanted=3)
    assert np.allclose(roots, [theta / (2 * sp), (2 * np.pi - theta) / (2 * sp),
                               (2 * np.pi + theta) / (2 * sp)], rtol=0, atol=1e-15)
    # small angles: the planar curve turns by 2 c pi^(1/2)
    assert multiplicity_scan(0.01, 1.0)[0][0] == pytest.approx(0.01 / (2 * sp), rel=1e-14)
    with pytest.raises(ValueError):
        multiplicity_scan(0.0, 1.0)


def test_multiplicity_scan_finds_the_angle():
    roots, _ = multiplicity_scan(0.3, 0.5, c_max=1.0, n_scan=20)
    assert limit_angle(ProfileParams(roots[0], 0.5)) == pytest.approx(0.3, abs=1e-8)


@pytest.mark.slow
def test_multiplicity_near_heat_flow():
    roots, _ = multiplicity_scan(1.0, 0.95, k_wanted=2, c_max=3.0, n_scan=40)
    assert len(roots) >= 2
    assert roots[0] == pytest.approx(1.0 / (2 * np.sqrt(np.pi)), abs=1e-2)


def test_trivial_jump():
    A = np.array([1.0, 0, 0])
    res = jump_experiment(JumpData(A, A), 0.5)
    assert res["c_fit"] == 0.0 and res["ok"]
    x = np.linspace(-1, 1, 5)
    s = smoothed_jump(JumpData(A, np.array([0.0, 1, 0])), x, 0.1)
    assert np.allclose(np.linalg.norm(s, axis=1), 1, atol=1e-15)
