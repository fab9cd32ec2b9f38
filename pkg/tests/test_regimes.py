import numpy as np
import pytest

from llkit.numerics import Grid1D, sobolev_norm
from llkit.regimes import (ConvergenceReport, RegimeSolverConfig, RegimeState, compute_K_eps,
                           cs_operator, d_sin, evolve_cubic_nls, evolve_free_wave, evolve_hll_eps,
                           evolve_nls_eps, evolve_sine_gordon, hll_energy, hll_rhs,
                           nls_consistency_residual, nls_eps_operator, regime_data, regime_grid,
                           sg_convergence_study, sg_residual, sgs_rhs)

G = regime_grid(40, 256)
G8 = regime_grid(8 * np.pi, 128)


def test_state_validation():
    with pytest.raises(ValueError):
        RegimeState(Grid1D.pinned(0, 1, 0.1), U=np.zeros(11), Phi=np.zeros(11))
    with pytest.raises(ValueError):
        RegimeState(G, U=np.zeros(3), Phi=np.zeros(3))
    with pytest.raises(ValueError):
        RegimeState(G)
    big = RegimeState(G, U=np.full(G.n, 20.0), Phi=np.zeros(G.n))
    with pytest.raises(ValueError):
        evolve_hll_eps(big, 0.1, 1.0, 0.1)
    with pytest.raises(ValueError):
        regime_data("square", G)


def test_small_oscillations_follow_klein_gordon():
    # linearized about 0: omega = (k^2 + sigma)^(1/2)
    k = 2 * np.pi * 3 / G8.length
    a, sigma, T = 1e-6, 1.0, 2.0
    st = RegimeState(G8, U=np.zeros(G8.n), Phi=a * np.cos(k * G8.x))
    tr = evolve_sine_gordon(st, None, sigma, T, RegimeSolverConfig(n_snapshots=2))
    exact = a * np.cos(k * G8.x) * np.cos(np.sqrt(k * k + sigma) * T)
    assert np.max(np.abs(tr.final[1] - exact)) <= 1e-10 * a


def test_kink_is_static():
    sigma = 2.0
    kink = regime_data("kink", G, scale=sigma)
    assert kink.winding == 1
    assert np.max(np.abs(sg_residual(kink.phase(), sigma, G))) <= 1e-8
    tr = evolve_sine_gordon(kink, None, sigma, 1.0, RegimeSolverConfig(n_snapshots=2))
    assert np.max(np.abs(tr.final[1] - kink.Phi)) <= 1e-10
    assert np.max(np.abs(tr.final[0])) <= 1e-10


def test_eps_zero_is_sine_gordon():
    d = regime_data("gaussian-u", G, amplitude=0.5)
    a = hll_rhs(d.U, d.Phi, 0.0, 1.0, G)
    b = sgs_rhs(d.U, d.Phi, 1.0, G)
    assert np.max(np.abs(a[0] - b[0])) <= 1e-12 and np.max(np.abs(a[1] - b[1])) <= 1e-12
    Px = -G.x * np.exp(-G.x ** 2)
    expect = 0.5 * G.h * np.sum(d.U ** 2 + Px ** 2 + np.sin(d.Phi) ** 2)
    assert hll_energy(d.U, d.Phi, 0.0, 1.0, G) == pytest.approx(expect, rel=1e-12)


def test_free_wave_standing_mode():
    k = 2 * np.pi * 3 / G8.length
    st = RegimeState(G8, U=np.zeros(G8.n), Phi=np.cos(k * G8.x))
    fw = evolve_free_wave(st, 1.0, times=[0.0, 1.0])
    assert np.max(np.abs(fw.final[1] - np.cos(k * G8.x) * np.cos(k))) <= 1e-13
    assert np.max(np.abs(fw.final[0] + k * np.cos(k * G8.x) * np.sin(k))) <= 1e-13
    tr = evolve_hll_eps(st, 0.0, 0.0, 1.0, RegimeSolverConfig(n_snapshots=2))
    assert np.max(np.abs(fw.final - tr.final)) <= 1e-12


def test_eps_system_conserves_energy():
    d = regime_data("gaussian-u", G, amplitude=0.5)
    tr = evolve_hll_eps(d, 0.1, 1.0, 1.0, RegimeSolverConfig(n_snapshots=11))
    E = np.array(tr.diagnostics.energy)
    assert np.ptp(E) <= 1e-10 * E[0]
    assert tr.params["inf_a"].min() > 0.9


def test_K_is_affine_in_eps():
    d = regime_data("gaussian-u", G, amplitude=0.5)
    x = G.x
    g = np.exp(-x ** 2)
    Ux = 0.5 * (g - 2 * x * x * g)
    slope = (compute_K_eps(d, 0.2, 2) - compute_K_eps(d, 0.1, 2)) / 0.1
    assert slope == pytest.approx(sobolev_norm(Ux, G.length, 2), rel=1e-10)


def test_K_sin_term_vanishes_at_pi():
    st = RegimeState(G, U=np.zeros(G.n), Phi=np.full(G.n, np.pi))
    assert compute_K_eps(st, 0.1, 2) <= 1e-13


def test_d_sin_examples():
    ph = regime_data("gaussian", G).Phi
    assert d_sin(ph, ph, G) == 0.0
    assert d_sin(ph, ph + np.pi, G) <= 1e-13
    assert d_sin(ph, ph + 0.3, G) == pytest.approx(np.sin(0.3) * np.sqrt(G.length), rel=1e-12)


def test_zero_time_gives_zero_error():
    rep = sg_convergence_study(eps_list=(0.2, 0.1), t_star=0.0, grid=regime_grid(40, 64))
    assert np.all(rep.errors["L2"] == 0)
    assert np.isnan(rep.slope)


def test_report_needs_decreasing_eps():
    with pytest.raises(ValueError):
        ConvergenceReport(np.array([0.1, 0.2]), {}, 0.0, 0.0, np.ones(2, bool))
    with pytest.raises(ValueError):
        sg_convergence_study(eps_list=(0.1, 0.2))


def test_cubic_nls_soliton():
    # 2 eta sech(eta x) exp(i eta^2 t)
    eta = 1.0
    st = RegimeState(G, Psi=2 * eta / np.cosh(eta * G.x) + 0j)
    tr = evolve_cubic_nls(st, 1.0, RegimeSolverConfig(n_snapshots=11))
    assert np.max(np.abs(tr.final - st.Psi * np.exp(1j * eta ** 2))) <= 1e-7
    assert np.ptp(tr.params["mass"]) <= 1e-12
    assert np.ptp(tr.diagnostics.energy) <= 1e-12


def test_nls_eps_conservation():
    ps = regime_data("psi-gaussian", G, amplitude=0.8)
    tr = evolve_nls_eps(ps, 0.1, 0.5, RegimeSolverConfig(n_snapshots=6))
    assert tr.status == "completed"
    assert np.ptp(tr.diagnostics.energy) <= 1e-10
    assert np.ptp(tr.params["mass"]) <= 1e-10


def test_consistency_remainder_identity():
    Psi = regime_data("psi-gaussian", G, amplitude=0.8).Psi * np.exp(0.3j * G.x)
    eps = 0.1
    lhs = cs_operator(Psi, G) - nls_eps_operator(Psi, eps, G)
    assert np.max(np.abs(lhs - eps * nls_consistency_residual(Psi, eps, G))) <= 1e-13
    with pytest.raises(ValueError):
        nls_consistency_residual(Psi * 10, eps, G)
