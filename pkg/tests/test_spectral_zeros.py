import math

import numpy as np
import pytest

from sepscat.errors import RangeError
from sepscat.forward_scattering import scattering_S
from sepscat.spectral_zeros import (bound_state_table, boundstate_eigenfunction,
                                    boundstate_kernel_M, find_bound_states, find_real_zeros,
                                    kernel_orthogonality, rayleigh_quotient,
                                    verify_boundstate_tracelaw)
from sepscat.transforms import (SeparablePotential, band_bump, exp_decay, make_grid, pv_product,
                                transform_set)

from conftest import exp_case


def exp_pot(alpha):
    return SeparablePotential([(alpha, exp_decay(1))])


# -- the secular kernel ----------------------------------------------------

def test_M_exp_at_one():
    # ∫₀^∞ 8t²/(1+t²)³ dt = π/2
    assert boundstate_kernel_M(exp_pot(-4), 1.0)[0, 0] == pytest.approx(math.pi / 2, abs=1e-12)


def test_M_closed_form_in_kappa():
    # ∫₀^∞ 8t²/((1+t²)²(t²+κ²)) dt = 2π/(1+κ)²
    for k in (0.3, 2.0, 7.0):
        assert boundstate_kernel_M(exp_pot(-4), k)[0, 0] == pytest.approx(2 * math.pi / (1 + k) ** 2, rel=1e-11)


def test_M_decays():
    vals = [boundstate_kernel_M(exp_pot(-4), k)[0, 0] for k in (10.0, 100.0, 1000.0)]
    assert vals[0] > vals[1] > vals[2] and vals[2] < 1e-5


def test_M_diagonal_for_disjoint_bands():
    pot = SeparablePotential([(-1.0, band_bump(0.5, 1.0)), (-1.0, band_bump(1.5, 2.0))])
    M = boundstate_kernel_M(pot, 0.7)
    assert M[0, 1] == 0 and M[1, 0] == 0 and M[0, 0] > 0


def test_M_rejects_nonpositive_kappa():
    with pytest.raises(ValueError):
        boundstate_kernel_M(exp_pot(-4), 0.0)


# -- bound states ----------------------------------------------------------

@pytest.mark.parametrize("alpha,kappa", [(-4.0, 1.0), (-9.0, 2.0), (-2.25, 0.5)])
def test_exp_bound_state_location(alpha, kappa):
    # 1 + α/(1+κ)² = 0
    bs = find_bound_states(exp_pot(alpha))
    assert len(bs) == 1
    assert bs[0].kappa == pytest.approx(kappa, abs=1e-8)
    assert bs[0].energy == pytest.approx(-kappa ** 2, abs=1e-7)


@pytest.mark.parametrize("alpha", [0.7, -0.5, -0.99])
def test_exp_no_bound_state(alpha):
    assert find_bound_states(exp_pot(alpha)) == []


def test_trace_law():
    pot = exp_pot(-4)
    bs = find_bound_states(pot)[0]
    assert verify_boundstate_tracelaw(bs, pot) < 1e-10
    moved = type(bs)(1.1, bs.fvec, 0.0, 1)
    assert verify_boundstate_tracelaw(moved, pot) > 1e-2


def test_trace_law_is_rank_one_only():
    pot = SeparablePotential([(-4.0, exp_decay(1)), (-1.0, exp_decay(2))])
    bs = find_bound_states(pot)[0]
    with pytest.raises(NotImplementedError):
        verify_boundstate_tracelaw(bs, pot)


def test_count_bounded_by_negative_couplings():
    rng = np.random.default_rng(7)
    cat = [exp_decay(1), exp_decay(2), band_bump(0.5, 1.0), band_bump(1.5, 2.0)]
    for _ in range(6):
        n = int(rng.integers(1, 4))
        idx = rng.choice(4, n, replace=False)
        alphas = rng.uniform(0.3, 6.0, n) * rng.choice([-1, 1], n)
        pot = SeparablePotential([(a, cat[i]) for a, i in zip(alphas, idx)])
        assert sum(b.multiplicity for b in find_bound_states(pot)) <= pot.n_minus


def test_two_bound_states_orthogonal():
    pot = SeparablePotential([(-6.0, exp_decay(1)), (-3.0, band_bump(0.5, 1.0))])
    bs = find_bound_states(pot)
    assert len(bs) == 2 and bs[0].kappa > bs[1].kappa
    assert kernel_orthogonality(pot, bs[0], bs[1]) < 1e-10


def test_range_error_when_kappa_max_small():
    with pytest.raises(RangeError):
        find_bound_states(exp_pot(-9.0), kappa_max=1.5)


def test_bound_state_table_rows():
    rows = bound_state_table(find_bound_states(exp_pot(-4)), exp_pot(-4))
    assert rows[0]["kappa"] == pytest.approx(1.0, abs=1e-8) and rows[0]["multiplicity"] == 1


# -- eigenfunctions --------------------------------------------------------

def test_eigenfunction_exp_closed_form():
    # −e″ + e = c·e^{−x} forces e ∝ x e^{−x}
    pot = exp_pot(-4)
    bs = find_bound_states(pot)[0]
    x = np.linspace(0, 30, 3001)
    e = boundstate_eigenfunction(bs, pot, None, x)
    ref = x * np.exp(-x)
    ref /= math.sqrt(np.trapezoid(ref ** 2, x))
    assert np.max(np.abs(e - ref)) < 1e-6
    assert abs(e[0]) <= 1e-4 * np.max(np.abs(e))
    assert np.trapezoid(np.abs(e) ** 2, x) == pytest.approx(1.0, abs=1e-12)
    assert rayleigh_quotient(e, x, pot) == pytest.approx(-1.0, abs=1e-3)


def test_eigenfunctions_solve_the_equation():
    # finite-difference residual of −e″ + Σα⟨e,v⟩v + κ²e
    pot = SeparablePotential([(-6.0, exp_decay(1)), (-3.0, band_bump(0.5, 1.0))])
    x = np.linspace(0, 200, 40001)
    h = x[1] - x[0]
    for bs in find_bound_states(pot):
        e = boundstate_eigenfunction(bs, pot, None, x)
        d2 = (e[2:] - 2 * e[1:-1] + e[:-2]) / h ** 2
        pert = sum(a * np.trapezoid(e * f.v(x), x) * f.v(x[1:-1]) for a, f in pot.terms)
        res = -d2 + pert + bs.kappa ** 2 * e[1:-1]
        assert np.max(np.abs(res)) < 1e-3 * np.max(np.abs(e))
        assert abs(e[0]) < 1e-8


# -- real zeros ------------------------------------------------------------

@pytest.mark.parametrize("alpha", [0.7, -0.5, -4.0])
def test_exp_has_no_real_zeros(alpha):
    _, ts, prof = exp_case(alpha)
    assert find_real_zeros(prof, ts).zeros == []


def test_manufactured_real_zero():
    # choose α so that 1 + α·P(λ₀) = 0 and W(λ₀) = 0 at λ₀ = 1.2 outside the band
    f = band_bump(0.5, 1.0)
    lam0 = 1.2
    alpha = -1.0 / pv_product(f, f, np.array([lam0]))[0]
    pot = SeparablePotential([(alpha, f)])
    g = make_grid(50.0, 2000, refine=(lam0,))
    ts = transform_set(pot, g)
    rz = find_real_zeros(scattering_S(ts, pot), ts)
    assert len(rz.zeros) == 1
    assert abs(rz.zeros[0] - lam0) <= 1e-6
    assert sorted(rz.symmetric()) == pytest.approx([-rz.zeros[0], rz.zeros[0]])
    d = rz.diagnostics[0]
    assert d["W_residual"] < 1e-12 and d["P_residual"] < 1e-4
