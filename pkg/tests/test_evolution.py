import numpy as np
import pytest
from scipy.integrate import quad

from llkit.evolution import (SolverConfig, SpinField, csu_residual, csu_ux_identity, evolve_hydro,
                             evolve_ll, evolve_llg, filament_residual, grad_sup, hydro_to_spin,
                             measure_frequency, modulated_distance, perturb_state,
                             self_similar_energy, spin_to_hydro)
from llkit.frenet_profiles import EXPANDER, ProfileParams, integrate_profile
from llkit.geometry import dispersion_omega
from llkit.numerics import Grid1D, observed_order, sobolev_norm
from llkit.solitons import HydroState, hydro_soliton, soliton_energy, soliton_momentum, soliton_profile


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(scheme="euler")
    with pytest.raises(ValueError):
        SolverConfig(n_snapshots=1)
    g = Grid1D.pinned(-5, 5, 0.1)
    with pytest.raises(ValueError):
        evolve_ll(SpinField(g, soliton_profile(0.5, g.x)), 0, 1, 0.1, SolverConfig(dt=0.01))


def test_ll_soliton_travels_fourth_order():
    c = 0.6
    errs = []
    for h in (0.2, 0.1):
        g = Grid1D.pinned(-25, 25, h)
        tr = evolve_ll(SpinField(g, soliton_profile(c, g.x)), 0, 1, 1.0, SolverConfig(n_snapshots=2))
        errs.append(np.max(np.abs(tr.final - soliton_profile(c, g.x - c))))
        assert tr.status == "completed" and tr.t[-1] == 1.0
    assert observed_order(errs)[0] >= 3.5


def test_midpoint_keeps_the_sphere():
    g = Grid1D.pinned(-25, 25, 0.2)
    tr = evolve_ll(SpinField(g, soliton_profile(0.6, g.x)), 0, 1, 1.0,
                   SolverConfig(n_snapshots=3, scheme="midpoint"))
    assert tr.diagnostics.max_sphere_dev <= 1e-13


def test_hydro_soliton_conservation():
    c = 0.6
    g = Grid1D.periodic(-40, 40, 400)
    st = HydroState(g.x, *hydro_soliton(c, g.x))
    tr = evolve_hydro(st, 1.0, 2.0, SolverConfig(spatial="spectral", n_snapshots=21), grid=g)
    E, P = np.array(tr.diagnostics.energy), np.array(tr.diagnostics.momentum)
    assert E[0] == pytest.approx(soliton_energy(c), abs=1e-12)
    # w has poles near the real axis, so the rectangle rule at h = 0.2 is good to ~1e-10 here
    assert P[0] == pytest.approx(soliton_momentum(c), abs=1e-9)
    assert np.ptp(E) <= 1e-9 and np.ptp(P) <= 1e-9
    assert np.max(np.abs(tr.final.v - hydro_soliton(c, g.x - 2 * c)[0])) <= 1e-7
    dist, a = modulated_distance(tr.final.v, tr.final.w, c, g, a_guess=1.0)
    assert a == pytest.approx(2 * c, abs=1e-8) and dist <= 1e-6


def test_vacuum_guard_rejects_initial_state():
    g = Grid1D.periodic(-20, 20, 200)
    st = HydroState(g.x, *hydro_soliton(0.01, g.x))
    with pytest.raises(ValueError):
        evolve_hydro(st, 1.0, 0.1, SolverConfig(spatial="spectral"), grid=g)


def test_blowup_guard_aborts_cleanly():
    g = Grid1D.pinned(-10, 10, 0.2)
    tr = evolve_ll(SpinField(g, soliton_profile(0.5, g.x)), 0, 1, 1.0,
                   SolverConfig(n_snapshots=3, blowup_ceiling=0.1))
    assert tr.status == "guard-aborted" and "exceeds" in tr.message
    assert tr.t[-1] < 1.0


def test_csu_map_on_soliton():
    c = 0.6
    g = Grid1D.periodic(-40, 40, 800)
    st = HydroState(g.x, *hydro_soliton(c, g.x))
    assert np.max(np.abs(csu_ux_identity(st.v, st.w, g.x))) <= 1e-12
    tr = evolve_hydro(st, 1.0, 0.5, SolverConfig(spatial="spectral", n_snapshots=21), grid=g)
    assert np.max(np.abs(csu_residual(tr, 10))) <= 1e-8
    with pytest.raises(ValueError):
        csu_residual(tr, 1)


def test_filament_residual_second_order():
    res = [filament_residual(0.5, 0.4, np.arange(-3, 3 + h / 2, h), 1.0) for h in (0.02, 0.01)]
    assert observed_order(res)[0] >= 1.9


def test_self_similar_energy_by_quadrature():
    # |d_x m| = c t^(-1/2) exp(-alpha x^2/(4t)) integrated independently
    for c, a, t in ((0.5, 0.5, 1.0), (0.3, 0.9, 2.5)):
        q = quad(lambda x: 0.5 * c * c / t * np.exp(-a * x * x / (2 * t)), -np.inf, np.inf)[0]
        assert self_similar_energy(c, a, t) == pytest.approx(q, rel=1e-12)


def test_grad_sup_on_self_similar_profile():
    c, a, t = 0.5, 0.5, 2.0
    prof = integrate_profile(EXPANDER, ProfileParams(c, a), 10.0, tol=1e-12, h=0.005)
    g = Grid1D.pinned(-12, 12, 0.01)
    m = prof.m_at(g.x / np.sqrt(t))
    assert grad_sup(m, g, t) == pytest.approx(c, abs=1e-8)


def test_llg_heat_flow_decreases_energy():
    g = Grid1D.periodic(0, 2 * np.pi, 64)
    th = 0.8 * np.sin(g.x)
    m = np.stack([np.cos(th), np.sin(th), np.zeros_like(th)], axis=1)
    tr = evolve_llg(SpinField(g, m), 1.0, 0.5, SolverConfig(n_snapshots=6))
    assert np.all(np.diff(tr.diagnostics.energy) < 0)


def test_spin_hydro_round_trip():
    g = Grid1D.periodic(0, 2 * np.pi, 128)
    v = 0.3 * np.cos(g.x) + 0.1 * np.sin(2 * g.x)
    w = 0.5 * np.sin(g.x)
    vv, ww = spin_to_hydro(hydro_to_spin(v, w, g), g)
    assert np.max(np.abs(vv - v)) <= 1e-15 and np.max(np.abs(ww - w)) <= 1e-12


def test_perturbation_size():
    g = Grid1D.periodic(-20, 20, 400)
    st = HydroState(g.x, *hydro_soliton(0.5, g.x))
    ps = perturb_state(st, 1e-3, seed=4)
    size = sobolev_norm(ps.v - st.v, g.length, 1.0) + sobolev_norm(ps.w - st.w, g.length, 0.0)
    assert size == pytest.approx(1e-3, rel=1e-12)
    assert np.array_equal(perturb_state(st, 1e-3, seed=4).v, ps.v)


@pytest.mark.parametrize("ki", [1, 4])
def test_linear_frequency(ki):
    g = Grid1D.periodic(0, 8 * np.pi, 64)
    k = 2 * np.pi * ki / g.length
    om = dispersion_omega(k, 0.5, 2.0)
    assert measure_frequency(ki, g, 0.5, 2.0, T=4 * np.pi / om)[0] == pytest.approx(om, rel=1e-5)
