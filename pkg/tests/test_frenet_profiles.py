import numpy as np
import pytest

from llkit.frenet_profiles import (EXPANDER, SHRINKER, LimitExtractionError, ProfileIntegrationError,
                                   ProfileParams, ProfileSolution, circle_distance_check,
                                   closed_form_expander, closed_form_shrinker,
                                   complex_reduction_oracle, curvature_torsion, expander_asymptotics,
                                   frame_defect, integrate_profile, limit_angle, limit_vectors,
                                   limit_x_max, ode_residual, parity_defect, s0,
                                   shrinker_limit_circles, speed_defect)
from llkit.frenet_profiles import _theta_phase
from llkit.numerics import observed_order


def test_curvature_torsion_examples():
    for kind in (EXPANDER, SHRINKER):
        k, tau = curvature_torsion(kind, ProfileParams(0.7, 0.3), 0.0)
        assert (k, tau) == (0.7, 0.0)
    k, _ = curvature_torsion(EXPANDER, ProfileParams(0.8, 0.4), 2.0)
    assert k == pytest.approx(0.8 * np.exp(-0.4), rel=1e-15)
    k, tau = curvature_torsion(SHRINKER, ProfileParams(0.5, 0.5), 2.0)
    assert k == pytest.approx(0.5 * np.exp(0.5), rel=1e-15)
    assert tau == pytest.approx(-np.sqrt(0.75), rel=1e-15)


def test_params_validation():
    with pytest.raises(ValueError):
        ProfileParams(-0.1, 0.5)
    with pytest.raises(ValueError):
        ProfileParams(0.5, 1.5)
    with pytest.raises(ValueError):
        integrate_profile(SHRINKER, ProfileParams(0.5, 0.0), 5.0)


def test_alpha_one_closed_form():
    prof = integrate_profile(EXPANDER, ProfileParams(0.8, 1.0), 10.0, tol=1e-11)
    assert np.max(np.abs(prof.m - closed_form_expander(0.8, prof.x))) <= 1e-11


def test_shrinker_alpha_one_closed_form():
    prof = integrate_profile(SHRINKER, ProfileParams(0.5, 1.0), 5.0, tol=1e-11, h=1e-3)
    assert np.max(np.abs(prof.m - closed_form_shrinker(0.5, prof.x))) <= 1e-9


def test_zero_speed_is_constant():
    prof = integrate_profile(EXPANDER, ProfileParams(0.0, 0.5), 5.0)
    assert np.all(prof.m == [1.0, 0.0, 0.0])
    assert ode_residual(EXPANDER, prof.params, prof) == 0.0


def test_profile_values_within_tol():
    # the integrator tolerance bounds the error of the sampled profile itself
    P = ProfileParams(0.8, 0.5)
    ref = integrate_profile(EXPANDER, P, 10.0, tol=1.01e-14)
    prof = integrate_profile(EXPANDER, P, 10.0, tol=1e-11)
    assert np.max(np.abs(prof.m - ref.m)) <= 1e-11


def test_speed_law():
    # |m'| by differences amplifies the step-to-step jitter by 1/h, so the
    # law is checked at the profile-law tolerance of the acceptance suite
    prof = integrate_profile(EXPANDER, ProfileParams(0.8, 0.5), 10.0, tol=1e-11)
    assert speed_defect(prof) <= 1e-8


def test_frame_and_parity():
    prof = integrate_profile(EXPANDER, ProfileParams(0.5, 0.3), 10.0, tol=1e-11)
    assert frame_defect(prof) <= 1e-14
    assert parity_defect(prof) <= 1e-11
    mir = integrate_profile(EXPANDER, ProfileParams(0.5, 0.3), 10.0, tol=1e-11, mirror=True)
    assert np.max(np.abs(mir.m - prof.m)) <= 1e-11


def test_dense_output_matches_nodes():
    prof = integrate_profile(EXPANDER, ProfileParams(0.5, 0.3), 6.0, tol=1e-11)
    assert np.max(np.abs(prof.m_at(prof.x) - prof.m)) <= 1e-12
    with pytest.raises(ValueError):
        prof.m_at([7.0])


def _closed_solution(h):
    x = np.arange(-6, 6 + h / 2, h)
    m = closed_form_expander(0.8, x)
    return ProfileSolution(EXPANDER, ProfileParams(0.8, 1.0), x, m, m, m)


def test_ode_residual_fourth_order_on_closed_form():
    res = [ode_residual(EXPANDER, ProfileParams(0.8, 1.0), _closed_solution(h)) for h in (0.08, 0.04, 0.02)]
    assert np.all(observed_order(res) >= 3.8)


def test_ode_residual_bound_for_integrated_profile():
    # stated bound 10 tol (1 + c^2); see the decisions log for the measured floor
    P = ProfileParams(0.5, 0.5)
    tol = 1e-11
    prof = integrate_profile(EXPANDER, P, 10.0, tol=tol)
    assert ode_residual(EXPANDER, P, prof) <= 10 * tol * (1 + P.c ** 2)


def test_complex_reduction_oracle_agrees():
    P = ProfileParams(0.8, 0.5)
    tol = 1e-11
    prof = integrate_profile(EXPANDER, P, 10.5, tol=tol)
    sel = prof.x >= 0
    xs = prof.x[sel][:1001]
    x, m, n, b, _ = complex_reduction_oracle(P, 10.0, tol=tol, x_eval=xs)
    assert np.max(np.abs(m - prof.m[sel][:1001])) <= 10 * tol
    assert np.max(np.abs(n - prof.n[sel][:1001])) <= 10 * tol
    assert np.max(np.abs(b - prof.b[sel][:1001])) <= 10 * tol


def test_complex_reduction_closed_form_and_trivial():
    x, m, _, _, _ = complex_reduction_oracle(ProfileParams(0.8, 1.0), 10.0, tol=1e-11)
    assert np.max(np.abs(m - closed_form_expander(0.8, x))) <= 1e-11
    _, _, _, _, f = complex_reduction_oracle(ProfileParams(0.0, 0.5), 5.0)
    assert np.all(f == 1)


def test_limit_vectors_alpha_one():
    for c in (0.3, 0.9):
        P = ProfileParams(c, 1.0)
        L = limit_vectors(integrate_profile(EXPANDER, P, limit_x_max(P), tol=1e-11))
        cs, sn = np.cos(c * np.sqrt(np.pi)), np.sin(c * np.sqrt(np.pi))
        assert np.allclose(L.A_plus, [cs, sn, 0], atol=1e-8)
        assert np.allclose(L.A_minus, [cs, -sn, 0], atol=1e-8)


def test_limit_vectors_against_long_integration():
    # oracle: the profile at x = 40, where the tail envelope is below 1e-80
    P = ProfileParams(0.8, 0.5)
    far = integrate_profile(EXPANDER, P, 40.0, tol=1e-12)
    L = limit_vectors(integrate_profile(EXPANDER, P, limit_x_max(P), tol=1e-11))
    assert np.max(np.abs(L.A_plus - far.m[-1])) <= 1e-8


def test_limit_vectors_zero_speed_and_short_grid():
    L = limit_vectors(integrate_profile(EXPANDER, ProfileParams(0.0, 0.5), 5.0))
    assert np.array_equal(L.A_plus, [1, 0, 0]) and L.angle == 0.0
    with pytest.raises(LimitExtractionError):
        limit_vectors(integrate_profile(EXPANDER, ProfileParams(0.5, 0.5), 5.0))


def test_limit_angle_alpha_one():
    sp = np.sqrt(np.pi)
    assert limit_angle(ProfileParams(sp / 4, 1.0)) == pytest.approx(np.pi / 2, abs=1e-8)
    assert limit_angle(ProfileParams(sp / 2, 1.0)) == pytest.approx(np.pi, abs=1e-6)
    assert limit_angle(ProfileParams(0.0, 0.7)) == 0.0


def test_asymptotics_binormal_default_alpha_one():
    c = 0.6
    A = np.array([np.cos(c * np.sqrt(np.pi)), np.sin(c * np.sqrt(np.pi)), 0.0])
    s = np.array([s0(c) + 1])
    val, env = expander_asymptotics(ProfileParams(c, 1.0), s, np.zeros(3), A)
    # with alpha = 1 the correction uses B+ = (|sin c sqrt(pi)|, |cos c sqrt(pi)|, 1)
    B = np.array([abs(A[1]), abs(A[0]), 1.0])
    e1, e2 = np.exp(-s ** 2 / 4), np.exp(-s ** 2 / 2)
    expect = A - (2 * c / s) * B * e1 * np.sin(0.0) - (2 * c * c / s ** 2) * A * e2
    assert np.allclose(val[0], expect, rtol=0, atol=1e-300)
    with pytest.raises(ValueError):
        expander_asymptotics(ProfileParams(c, 1.0), [1.0], np.zeros(3), A)


def test_alpha_zero_phase_growth():
    # the phase grows like s^2/4 + c^2 ln s, up to a constant
    c = 0.7
    P = ProfileParams(c, 0.0)
    s = np.array([200.0, 400.0, 800.0])
    d = _theta_phase(P, s, s0(c)) - s ** 2 / 4 - c * c * np.log(s)
    assert abs(d[2] - d[1]) <= 1e-4 and abs(d[1] - d[0]) <= 4e-4


def test_shrinker_alpha_one_planar():
    prof = integrate_profile(SHRINKER, ProfileParams(0.5, 1.0), 10.0, tol=1e-11, h=1e-3)
    C = shrinker_limit_circles(prof)
    assert np.allclose(C.B_plus, [0, 0, 1], atol=1e-15)
    assert np.allclose(C.B_minus, [0, 0, 1], atol=1e-15)
    assert circle_distance_check(prof, C)[0] == 0.0


def test_shrinker_circle_distance_ratio_limit():
    # the distance to the limit circle is about |tau|/k = beta|x|e^{-alpha x^2/4}/(2c),
    # the same decay as the bound, so the ratio settles at alpha^2/(30 sqrt 2)
    a = 0.5
    prof = integrate_profile(SHRINKER, ProfileParams(0.5, a), 20.0, tol=1e-11, h=1e-3)
    C = shrinker_limit_circles(prof)
    worst, xs, ratio = circle_distance_check(prof, C)
    assert worst <= 1.0
    # the integration stops at the shrinker cap, so look at the outermost nodes
    far = ratio[np.abs(xs) >= np.abs(xs).max() - 0.1]
    assert np.max(np.abs(far / (a ** 2 / (30 * np.sqrt(2))) - 1)) <= 0.01


def test_step_budget_reports_reached_x():
    with pytest.raises(ProfileIntegrationError) as info:
        integrate_profile(EXPANDER, ProfileParams(0.8, 0.5), 10.0, max_steps=3)
    assert 0 < info.value.x_reached < 10
