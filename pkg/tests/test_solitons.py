import numpy as np
import pytest

from llkit.geometry import to_hydrodynamical
from llkit.numerics import observed_order
from llkit.solitons import (HydroState, SolitonSpec, coercivity_check, functional_energy,
                            functional_momentum, hessian, hydro_soliton, reconstruct_sum,
                            soliton_dPdc, soliton_energy, soliton_momentum, soliton_profile,
                            sum_solitons, traveling_wave_residual)

X = np.arange(-40, 40.0005, 0.005)


def test_profile_is_unit_and_odd_even():
    x = np.linspace(-10, 10, 401)
    u = soliton_profile(0.4, x)
    assert np.max(np.abs(np.linalg.norm(u, axis=1) - 1)) <= 1e-15
    assert np.allclose(u[::-1] * [1, -1, 1], u, atol=1e-15)


@pytest.mark.parametrize("c", [0.3, -0.5, 0.9])
def test_energy_and_momentum_by_quadrature(c):
    st = HydroState(X, *hydro_soliton(c, X))
    assert functional_energy(st) == pytest.approx(soliton_energy(c), abs=1e-12)
    assert functional_momentum(st) == pytest.approx(soliton_momentum(c), abs=1e-12)


def test_momentum_derivative_closed_form():
    for c in (0.2, 0.5, -0.7):
        d = 1e-5
        fd = (soliton_momentum(c + d) - soliton_momentum(c - d)) / (2 * d)
        assert fd == pytest.approx(soliton_dPdc(c), rel=1e-8)


def test_travelling_wave_residual_sixth_order():
    res = []
    for h in (0.04, 0.02):
        x = np.arange(-30, 30 + h / 2, h)
        res.append(traveling_wave_residual(0.5, x))
    assert observed_order(res)[0] >= 5.5
    x = np.arange(-30, 30.005, 0.01)
    assert traveling_wave_residual(0.5, x) <= 1e-9


def test_zero_speed_rejected():
    with pytest.raises(ValueError):
        hydro_soliton(0.0, X)
    with pytest.raises(ValueError):
        soliton_momentum(0.0)
    with pytest.raises(ValueError):
        SolitonSpec(1.0)
    with pytest.raises(ValueError):
        sum_solitons([SolitonSpec(0.0)], X)


def test_sum_admissibility():
    far = sum_solitons([SolitonSpec(0.5, -15), SolitonSpec(-0.3, 15)], X)
    assert far.admissible
    near = sum_solitons([SolitonSpec(0.2), SolitonSpec(0.2)], X)
    assert not near.admissible
    with pytest.raises(ValueError):
        near.state()
    with pytest.raises(ValueError):
        reconstruct_sum(near)


def test_sum_reconstruction_round_trip():
    errs = []
    for h in (0.02, 0.01):
        x = np.arange(-40, 40 + h / 2, h)
        ssum = sum_solitons([SolitonSpec(0.5, -15), SolitonSpec(-0.3, 15)], x)
        v, w = to_hydrodynamical(reconstruct_sum(ssum), x)
        assert np.max(np.abs(v - ssum.V)) <= 1e-14
        errs.append(np.max(np.abs(w - ssum.W)[1:-1]))
    # w passes through a centred difference of the phase
    assert observed_order(errs)[0] >= 1.9


def test_hessian_is_symmetric():
    H = hessian(0.5, np.arange(-10, 10.005, 0.05))
    assert abs(H - H.T).max() <= 1e-12


@pytest.mark.parametrize("c", [0.3, 0.5, -0.6])
def test_coercivity_structure(c):
    co = coercivity_check(c, np.arange(-20, 20.0005, 0.01))
    assert abs(co["eig_kernel"]) <= 1e-4
    assert co["kernel_alignment"] >= 1 - 1e-6
    assert co["n_negative"] == 1
    assert co["Lambda_c"] > 0
