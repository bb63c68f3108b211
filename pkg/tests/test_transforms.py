import math

import numpy as np
import pytest
from scipy.integrate import quad

from sepscat.errors import DataError, DomainError
from sepscat.quadrature import panel_rule
from sepscat.transforms import (SeparablePotential, band_bump, check_finite_moment, cross_corr_g,
                                eval_v, exp_decay, fourier_vtilde, from_record,
                                inverse_sine_recover_v, transform_identity_residual, make_grid,
                                phi_Phi, sampled, sine_W, transform_set, y_rule)

from conftest import exact_Wsq


def quad_vtilde(f, lam):
    """ṽ(λ) by QUADPACK's Fourier-weighted rule on [0, ∞)."""
    v = lambda x: f.v(np.array([x]))[0]
    a = abs(lam)
    if a == 0:
        return quad(v, 0, np.inf, limit=400)[0]
    re = quad(v, 0, np.inf, weight="cos", wvar=a, limlst=200)[0]
    im = quad(v, 0, np.inf, weight="sin", wvar=a, limlst=200)[0]
    return re - 1j * np.sign(lam) * im


# -- grid ------------------------------------------------------------------

def test_grid_is_symmetric_and_contains_zero():
    g = make_grid(10.0, 64, refine=(1.3,))
    assert g.points[g.zero_index] == 0.0
    assert np.array_equal(g.points, -g.points[::-1])
    assert g.index_of(1.3) is None
    h = 20.0 / 64
    for d in (h / 8, h / 4, h / 2):
        assert g.index_of(1.3 - d) is not None and g.index_of(-1.3 - d) is not None


@pytest.mark.parametrize("n", [63, 10])
def test_grid_rejects_bad_counts(n):
    with pytest.raises(DomainError):
        make_grid(5.0, n)


def test_grid_rejects_nonpositive_lambda_max():
    with pytest.raises(DomainError):
        make_grid(0.0, 64)


# -- kernels ---------------------------------------------------------------

def test_exp_value_at_origin():
    assert eval_v(exp_decay(1), np.array([0.0]))[0] == pytest.approx(math.sqrt(2), rel=1e-14)


def test_exp_decays():
    assert abs(eval_v(exp_decay(1), np.array([60.0]))[0]) < 1e-25


def test_sampled_reproduces_nodes():
    x = np.linspace(0, 20, 401)
    vals = np.sqrt(2) * np.exp(-x)
    f = sampled(x, vals)
    assert np.allclose(eval_v(f, x[::37]), vals[::37], rtol=0, atol=1e-15)


def test_catalog_norms_are_one():
    for f in (exp_decay(1), exp_decay(2), band_bump(0.5, 1), band_bump(1.5, 2)):
        assert f.norm() == pytest.approx(1.0, abs=1e-8)


def test_band_bump_spatial_norm_matches_spectral():
    # Plancherel: ∫v² dx computed in x-space
    f = band_bump(0.5, 1)
    rule = panel_rule(np.linspace(0, f.x_max, 4001), 8)
    assert rule.integrate(f.v(rule.nodes) ** 2) == pytest.approx(1.0, abs=1e-6)


def test_weighted_moment_is_finite():
    assert np.isfinite(check_finite_moment(exp_decay(1)))
    # ∫(1+x²)2e^{−2x} = 1 + 1/2
    assert check_finite_moment(exp_decay(1)) == pytest.approx(1.5, rel=1e-10)


def test_from_record_roundtrip():
    f = from_record({"kind": "band_bump", "a": 0.5, "b": 1.0})
    assert f.to_record() == {"kind": "band_bump", "a": 0.5, "b": 1.0}
    with pytest.raises(DataError):
        from_record({"kind": "gaussian"})


def test_potential_rejects_zero_coupling():
    with pytest.raises(DomainError, match="coupling must be nonzero"):
        SeparablePotential([(0.0, exp_decay(1))])


def test_validate_flags_dependent_kernels():
    pot = SeparablePotential([(1.0, exp_decay(1)), (2.0, exp_decay(1))])
    assert any("dependent" in p for p in pot.validate())
    ok = SeparablePotential([(1.0, exp_decay(1)), (2.0, band_bump(0.5, 1))])
    assert ok.validate() == []


def test_normalized_rescales_alpha():
    pot = SeparablePotential([(0.7, exp_decay(1, amplitude=math.sqrt(2)))]).normalized()
    assert pot.alphas[0] == pytest.approx(1.4, rel=1e-10)
    assert pot.funcs[0].norm() == pytest.approx(1.0, abs=1e-10)


# -- Fourier and sine transforms --------------------------------------------

def test_vtilde_exp_closed_form(grid):
    lam = grid.points
    vt = fourier_vtilde(exp_decay(1), grid)
    assert np.max(np.abs(vt - np.sqrt(2) / (1 + 1j * lam))) < 1e-12


@pytest.mark.parametrize("f", [exp_decay(1), band_bump(0.5, 1)], ids=["exp", "bump"])
def test_vtilde_against_adaptive_quadrature(f):
    lams = np.array([0.0, 0.3, 0.75, 1.0, 2.2, 4.0, 7.5, -0.6, -1.9, -3.3])
    got = f.vtilde(lams)
    ref = np.array([quad_vtilde(f, L) for L in lams])
    assert np.max(np.abs(got - ref)) < 1e-6


def test_vtilde_at_zero_is_integral(grid):
    vt = fourier_vtilde(exp_decay(1), grid)
    assert vt[grid.zero_index] == pytest.approx(math.sqrt(2), rel=1e-13)
    assert vt[grid.zero_index].imag == 0


def test_vtilde_riemann_lebesgue():
    v50 = exp_decay(1).vtilde(np.array([50.0]))[0]
    assert abs(v50) < 0.03
    assert abs(v50 - np.sqrt(2) / (1 + 50j)) < 1e-12


def test_sine_W_exp(grid):
    lam = grid.points
    W = sine_W(exp_decay(1), grid)
    assert np.max(np.abs(W + 2j * np.sqrt(2) * lam / (1 + lam ** 2))) < 1e-12
    assert W[grid.zero_index] == 0
    assert np.array_equal(W, -W[::-1])


def test_sine_W_bump_is_the_defining_bump(grid):
    a, b = 0.5, 1.0
    f = band_bump(a, b)
    W = sine_W(f, grid)
    lam = grid.points
    inside = (lam > a) & (lam < b)
    u = (lam[inside] - a) / (b - a)
    shape = np.exp(1 - 1 / (4 * u * (1 - u)))
    ratio = (W[inside] / -2j) / shape
    assert np.ptp(ratio.real) < 1e-12 * abs(ratio.real[0]) and np.max(np.abs(ratio.imag)) == 0
    assert np.all(W[(lam > 0) & ~inside] == 0)


# -- correlations and Φ ----------------------------------------------------

def test_cross_corr_exp_pair():
    y = np.linspace(0, 10, 41)
    g = cross_corr_g(exp_decay(1), exp_decay(1), y)
    assert np.max(np.abs(g - np.exp(-y))) < 1e-12
    assert g[0] == pytest.approx(1.0, abs=1e-12)


def test_cross_corr_negative_y_rule():
    f1, f2 = exp_decay(1), band_bump(0.5, 1)
    y = np.linspace(0.1, 5, 9)
    assert np.allclose(cross_corr_g(f2, f1, -y), np.conj(cross_corr_g(f1, f2, y)), rtol=0, atol=1e-12)


def test_cross_corr_disjoint_bands_not_zero():
    f1, f2 = band_bump(0.5, 1), band_bump(1.5, 2)
    y = np.linspace(0, 20, 81)
    g = cross_corr_g(f1, f2, y)
    assert np.max(np.abs(g)) > 1e-3
    # independent x-space evaluation at a few shifts
    rule = panel_rule(np.linspace(0, 300, 3001), 8)
    v2 = f2.v(rule.nodes)
    for yy, gg in zip(y[::20], g[::20]):
        ref = rule.integrate(f1.v(rule.nodes + yy) * v2)
        assert abs(gg - ref) < 1e-5


def test_phi_Phi_exp_pair():
    f = exp_decay(1)
    rule = y_rule(f, width=0.25)
    g = cross_corr_g(f, f, rule.nodes)
    lam = np.array([0.0, 0.5, 1.0, 3.0, -2.0])
    P = phi_Phi(g, rule, lam)
    assert np.max(np.abs(P - 1 / (1 + 1j * lam))) < 1e-10
    assert P[0] == pytest.approx(rule.integrate(g), abs=1e-14)


def test_transform_identity_at_one_exp_pair():
    f = exp_decay(1)
    rule = y_rule(f, width=0.25)
    P = phi_Phi(cross_corr_g(f, f, rule.nodes), rule, np.array([1.0]))[0]
    lhs = P + np.conj(P)
    rhs = abs(f.vtilde(np.array([-1.0]))[0]) ** 2
    assert lhs == pytest.approx(1.0, abs=1e-10)
    assert rhs == pytest.approx(1.0, abs=1e-12)


def test_transform_set_Phi_matches_y_space():
    # spectral Φ against Fourier transform of the correlation
    f1, f2 = exp_decay(1), exp_decay(2)
    g = make_grid(10, 64)
    ts = transform_set(SeparablePotential([(1.0, f1), (-1.0, f2)]), g)
    rule = y_rule(f1, width=0.25)
    P = phi_Phi(cross_corr_g(f1, f2, rule.nodes), rule, g.points)
    assert np.max(np.abs(ts.Phi[0, 1] - P)) < 1e-9


@pytest.mark.parametrize("pair", [(0, 1), (2, 3), (0, 2), (3, 1)])
def test_transform_identity_catalog(pair):
    cat = [exp_decay(1), exp_decay(2), band_bump(0.5, 1), band_bump(1.5, 2)]
    lam = np.linspace(-20, 20, 401)
    assert transform_identity_residual(cat[pair[0]], cat[pair[1]], lam) <= 1e-6


# -- sine inversion --------------------------------------------------------

def test_inverse_sine_closed_form(grid):
    lam = grid.half
    x = np.linspace(0, 20, 201)
    v = inverse_sine_recover_v(lam, 2 * np.sqrt(2) * lam / (1 + lam ** 2), x)
    err = np.sqrt(np.trapezoid((v.v(x) - np.sqrt(2) * np.exp(-x)) ** 2, x))
    assert err < 1e-3


def test_inverse_sine_zero():
    lam = np.linspace(0, 10, 101)
    x = np.linspace(0, 5, 11)
    assert np.all(inverse_sine_recover_v(lam, np.zeros_like(lam), x).v(x) == 0)


def test_inverse_sine_roundtrip_from_W(grid):
    f = exp_decay(1)
    Wabs = np.abs(sine_W(f, grid))[grid.zero_index:]
    x = np.linspace(0, 40, 801)
    v = inverse_sine_recover_v(grid.half, Wabs, x)
    assert np.sqrt(np.trapezoid((v.v(x) - f.v(x)) ** 2, x)) < 1e-3
    assert np.allclose(Wabs ** 2, exact_Wsq(grid.half), atol=1e-12)


def test_inverse_sine_rejects_negative():
    lam = np.linspace(0, 10, 101)
    w = np.sin(lam)
    with pytest.raises(DataError):
        inverse_sine_recover_v(lam, w, np.linspace(0, 1, 5))
