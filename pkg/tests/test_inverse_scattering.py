import math

import numpy as np
import pytest

from sepscat.errors import DataError, DegenerateDataError, GridRefinementError
from sepscat.forward_scattering import scattering_S
from sepscat.inverse_scattering import (ScatteringData, aux_psi, extract_zeta, invert,
                                        invert_channels, jump_residual, modulus_B,
                                        perron_stieltjes_check, phase_exponential,
                                        reconstruct_alpha, reconstruct_Wsq, validate_class,
                                        zeta_tilde)
from sepscat.spectral_zeros import find_real_zeros
from sepscat.transforms import (SeparablePotential, band_bump, make_grid, pv_product, sine_W,
                                transform_set)

from conftest import bumps_case, exact_B, exact_Wsq, exp_case


def rel_l2(got, ref, lam):
    return math.sqrt(np.trapezoid((got - ref) ** 2, lam) / np.trapezoid(ref ** 2, lam))


def exp_data(alpha):
    _, ts, prof = exp_case(alpha)
    kap = (math.sqrt(-alpha) - 1,) if alpha < -1 else ()
    zeta = extract_zeta(ts.grid, S=prof.S, kappas=kap, flagged=prof.flagged)
    return ScatteringData(ts.grid, zeta, (), kap)


# -- phase extraction ------------------------------------------------------

def test_trivial_S_has_zero_phase(grid):
    zeta = extract_zeta(grid, S=np.ones(grid.size, dtype=complex))
    assert np.all(zeta == 0)


@pytest.mark.parametrize("alpha", [0.7, -0.5])
def test_exp_phase_is_arg_B(alpha, grid):
    # Re B > 0 here, so the principal argument is already continuous
    zeta = exp_data(alpha).zeta
    ref = np.angle(exact_B(alpha, grid.points))
    assert np.max(np.abs(zeta - ref)) < 1e-10


def test_phase_is_odd_and_reproduces_S():
    _, ts, prof = exp_case(-4.0)
    zeta = exp_data(-4.0).zeta
    assert np.max(np.abs(zeta + zeta[::-1])) == 0
    ok = ~prof.flagged
    assert np.max(np.abs(np.exp(-2j * zeta[ok]) - prof.S[ok])) < 1e-10


def test_phase_from_B_matches_phase_from_S(grid):
    z1 = extract_zeta(grid, B_plus=exact_B(0.7, grid.points))
    z2 = exp_data(0.7).zeta
    assert np.max(np.abs(z1 - z2)) < 1e-10


def test_coarse_grid_unwrap_refuses():
    # a phase winding faster than the grid can follow
    g = make_grid(20.0, 64)
    S = np.exp(-2j * 40 * np.sin(g.points))
    with pytest.raises(GridRefinementError):
        extract_zeta(g, S=S)


def test_data_rejects_two_bound_states(grid):
    with pytest.raises(DataError):
        ScatteringData(grid, np.zeros(grid.size), (), (1.0, 2.0))
    with pytest.raises(DataError):
        ScatteringData(grid, np.zeros(grid.size - 2))


# -- phase exponential and modulus ------------------------------------------

def test_phase_exponential_gives_B(grid):
    # zero-free exp channel: B⁺ = exp(H[ζ])·e^{iζ}
    data = exp_data(0.7)
    lam = grid.points[1:-1]
    inner = np.abs(lam) < 45
    got = phase_exponential(data) * np.exp(1j * data.zeta[1:-1])
    assert np.max(np.abs(got - exact_B(0.7, lam))[inner]) < 1e-4


def test_phase_exponential_is_even(grid):
    H = phase_exponential(exp_data(0.7))
    assert np.max(np.abs(H - H[::-1])) < 1e-12


def test_modulus_with_bound_state(grid):
    data = exp_data(-4.0)
    lam = grid.points[1:-1]
    inner = np.abs(lam) < 45
    err = np.abs(modulus_B(data) - np.abs(exact_B(-4.0, lam)))[inner]
    assert np.max(err) < 1e-4
    # ζ̃ is continuous through 0 even though ζ is not
    t = zeta_tilde(data)
    i0 = grid.zero_index
    z = data.zeta
    assert abs(z[i0 + 1] - z[i0 - 1]) > 3.0
    assert abs(t[i0 + 1] - t[i0 - 1]) < 2.5 * abs(t[i0 + 2] - t[i0 + 1])


# -- round trips -----------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.7, -0.5, -4.0])
def test_exp_round_trip(alpha, grid):
    res = invert(exp_data(alpha))
    lam = grid.half
    w = res.Wabs_sq[grid.zero_index:]
    assert res.alpha == pytest.approx(alpha, rel=1e-3)
    assert rel_l2(w, exact_Wsq(lam), lam) < 1e-3


def test_exp_round_trip_recovers_v():
    res = invert(exp_data(0.7))
    x = np.linspace(0, 20, 401)
    err = math.sqrt(np.trapezoid((res.v_candidate.v(x) - math.sqrt(2) * np.exp(-x)) ** 2, x))
    assert err < 1e-3


def test_alternative_constant_differs_by_pi_squared_over_four():
    data = exp_data(0.7)
    a = reconstruct_alpha(data)
    b = reconstruct_alpha(data, alt_constant=True)
    assert b / a == pytest.approx(math.pi ** 2 / 4, rel=1e-12)


def test_zero_phase_is_degenerate(grid):
    data = ScatteringData(grid, np.zeros(grid.size))
    assert np.all(reconstruct_Wsq(data, alpha=1.0) == 0)
    with pytest.raises(DegenerateDataError):
        reconstruct_alpha(data)


def test_orthogonal_channels_round_trip():
    pot, ts, prof = bumps_case()
    res = invert_channels(list(prof.Sk), ts.grid, flagged=prof.flagged)
    lam = ts.grid.half
    i0 = ts.grid.zero_index
    for r, (a, f) in zip(res, pot.terms):
        truth = np.abs(sine_W(f, ts.grid)[i0:]) ** 2
        assert r.alpha == pytest.approx(a, rel=1e-2)
        assert rel_l2(r.Wabs_sq[i0:], truth, lam) < 1e-2


def test_channel_order_follows_input():
    _, ts, prof = bumps_case()
    fwd = invert_channels(list(prof.Sk), ts.grid, flagged=prof.flagged)
    rev = invert_channels(list(prof.Sk[::-1]), ts.grid, flagged=prof.flagged)
    assert [r.alpha for r in rev] == pytest.approx([r.alpha for r in fwd[::-1]], rel=1e-12)


def test_real_zero_round_trip():
    f = band_bump(0.5, 1.0)
    lam0 = 1.2
    alpha = -1.0 / pv_product(f, f, np.array([lam0]))[0]
    pot = SeparablePotential([(alpha, f)])
    g = make_grid(50.0, 2000, refine=(lam0,))
    ts = transform_set(pot, g)
    prof = scattering_S(ts, pot)
    zs = find_real_zeros(prof, ts).zeros
    zeta = extract_zeta(g, S=prof.S, real_zeros=zs, flagged=prof.flagged)
    data = ScatteringData(g, zeta, zs)
    assert data.class_tag == "Omega_q" and data.q == 1
    res = invert(data)
    i0 = g.zero_index
    truth = np.abs(sine_W(f, g)[i0:]) ** 2
    assert res.alpha == pytest.approx(alpha, rel=1e-2)
    assert rel_l2(res.Wabs_sq[i0:], truth, g.half) < 1e-2


# -- auxiliary function ψ --------------------------------------------------

def test_psi_positive_and_decays_like_inverse_square():
    lam = np.array([0.1, 0.5, 2.0, 10.0, 49.0])
    psi = aux_psi(lam, 1.0)
    assert np.all(psi > 0)
    assert lam[-1] ** 2 * psi[-1] == pytest.approx(1.0, rel=0.05)
    assert aux_psi(np.array([0.0]), 1.0)[0] == np.inf


def test_psi_independent_of_kappa():
    # exp{(2/π)PV∫θ_κ/(t−λ)} = (λ²+κ²)/λ², so ψ = 1/λ²
    lam = np.array([0.3, 1.0, 4.0])
    for k in (0.5, 2.0):
        assert np.max(np.abs(lam ** 2 * aux_psi(lam, k) - 1)) < 1e-6


# -- admissibility diagnostics ---------------------------------------------

def test_validate_class_accepts_exp_data():
    rep = validate_class(exp_data(0.7))
    assert rep["class"] == "Omega0"
    assert all(v["pass"] for k, v in rep.items() if k != "class")
    rep = validate_class(exp_data(-4.0))
    assert rep["class"] == "Omega_q_kappa" and rep["sign"]["pass"]


def test_validate_class_flags_sign_change(grid):
    lam = grid.points
    zeta = 0.3 * np.sin(lam) * np.exp(-lam ** 2 / 50)
    rep = validate_class(ScatteringData(grid, zeta))
    assert not rep["sign"]["pass"]


def test_validate_class_flags_slow_decay(grid):
    lam = grid.points
    zeta = 0.5 * lam / (1 + lam ** 2)
    rep = validate_class(ScatteringData(grid, zeta))
    assert not rep["lambda_zeta_L1"]["pass"]
    assert rep["pv_bounded"]["approximate"]


# -- Perron–Stieltjes and jump identities ----------------------------------

def test_perron_stieltjes_exp(grid):
    B = exact_B(0.7, grid.points)
    w = exact_Wsq(grid.points)
    assert perron_stieltjes_check(B, 0.7, w, grid) < 1e-12
    assert jump_residual(B, 0.7, w, grid) < 1e-12


def test_perron_stieltjes_zero_case(grid):
    assert perron_stieltjes_check(np.ones(grid.size, dtype=complex), 1.0, np.zeros(grid.size), grid) == 0


def test_perron_stieltjes_detects_corruption(grid):
    B = exact_B(0.7, grid.points)
    res = perron_stieltjes_check(B, 0.7, 1.1 * exact_Wsq(grid.points), grid)
    assert 0.08 < res < 0.11


@pytest.mark.parametrize("alpha", [0.7, -0.5, -4.0])
def test_jump_on_forward_data(alpha):
    pot, ts, prof = exp_case(alpha)
    w = np.abs(sine_W(pot.funcs[0], ts.grid)) ** 2
    assert jump_residual(prof.bk[0], alpha, w, ts.grid) <= 1e-6


@pytest.mark.parametrize("alpha", [0.7, -4.0])
def test_flooring_is_negligible(alpha):
    res = invert(exp_data(alpha))
    assert res.diagnostics["floor_magnitude"] <= 1e-8 * np.max(res.Wabs_sq)
    assert np.all(res.Wabs_sq >= 0)
