"""Bound states (zeros of b on the imaginary λ-axis), real zeros of r, and
bound-state eigenfunctions.

With z = −κ² the resolvent matrix is T(−κ²) = M(κ)/2π where

    M(κ)[k, s] = ∫₀^∞ W̄_k(t)W_s(t)/(t² + κ²) dt = 4∫ ŝ_kŝ_s/(t²+κ²) dt,

so bound states are the κ > 0 where M(κ) + 2πα⁻¹ is singular.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq, minimize_scalar
from scipy.signal import lfilter

from .errors import (GridRefinementError, InconsistentDataError, RangeError,
                     ScatteringError)
from .forward_scattering import ScatteringProfile, boundary_T_spectral
from .quadrature import halfline_breaks, panel_rule
from .transforms import (Phi_pair, SeparablePotential, TransformSet,
                         pv_product)

KAPPA_MIN = 1e-3
KAPPA_TOL = 1e-8
MULT_TOL = 1e-6
ZERO_ACCEPT = 1e-4


@dataclass
class BoundState:
    kappa: float
    fvec: np.ndarray
    residual: float
    multiplicity: int = 1

    @property
    def energy(self):
        return -self.kappa ** 2


@dataclass
class RealZeroSet:
    zeros: list = field(default_factory=list)          # λ_k > 0
    multiplicity: list = field(default_factory=list)
    near_zeros: list = field(default_factory=list)     # failed the W-kernel filter
    includes_origin: bool = True
    diagnostics: list = field(default_factory=list)

    def symmetric(self):
        return sorted([-z for z in self.zeros] + list(self.zeros))


def _pot(x):
    return x.pot if isinstance(x, TransformSet) else x


def _union_rule(funcs):
    br = [halfline_breaks()] + [f.spectral_breaks() for f in funcs]
    return panel_rule(np.concatenate(br))


class _MKernel:
    """Precomputed ŝ_kŝ_s products on a common μ-rule."""

    def __init__(self, pot: SeparablePotential):
        self.pot = pot
        rule = _union_rule(pot.funcs)
        s = np.stack([f.sine(rule.nodes) for f in pot.funcs])        # (n, M)
        self.mu2 = rule.nodes ** 2
        self.F = 4.0 * s[:, None, :] * s[None, :, :] * rule.weights    # (n, n, M)
        self.ainv = np.diag(2 * math.pi / pot.alphas)

    def M(self, kappa):
        return np.sum(self.F / (self.mu2 + kappa * kappa), axis=-1)

    def H(self, kappa):
        return self.M(kappa) + self.ainv

    def eig(self, kappa):
        return np.linalg.eigvalsh(self.H(kappa))[::-1]    # descending


def boundstate_kernel_M(ts_or_pot, kappa):
    if not kappa > 0:
        raise ValueError("κ must be positive")
    return _MKernel(_pot(ts_or_pot)).M(float(kappa))


def find_bound_states(pot, ts=None, kappa_min=KAPPA_MIN, kappa_max=None, scan=400):
    """All κ > 0 with M(κ) + 2πα⁻¹ singular, sorted by decreasing κ."""
    pot = _pot(pot)
    if pot.n_minus == 0:
        return []
    mk = _MKernel(pot)
    if kappa_max is None:
        norm0 = np.linalg.norm(mk.M(kappa_min), 2)
        kappa_max = 10 * max(1.0, norm0 * float(np.max(np.abs(pot.alphas))) / (2 * math.pi))
    ev_lo = mk.eig(kappa_min)
    ev_hi = mk.eig(kappa_max)
    scale = float(np.max(np.abs(mk.ainv)))
    if np.any(np.abs(ev_lo) < 1e-9 * scale):
        raise RangeError("an eigenvalue vanishes at κ_min; decrease κ_min")
    # M ≥ 0, so the top n₊ eigenvalues stay above those of 2πα⁻¹ > 0
    n_plus = pot.n - pot.n_minus
    if np.any(ev_hi[n_plus:] > 0):
        raise RangeError(f"root beyond κ_max={kappa_max:.4g}; increase κ_max")
    roots = []
    for j in np.nonzero(ev_lo > 0)[0]:
        if j < n_plus:
            continue
        g = lambda k: float(mk.eig(k)[j])
        # coarse log scan keeps brentq away from near-degenerate crossings
        ks = np.geomspace(kappa_min, kappa_max, scan)
        vals = np.array([g(k) for k in ks])
        i = int(np.nonzero(vals <= 0)[0][0])
        k = brentq(g, ks[i - 1], ks[i], xtol=KAPPA_TOL * 1e-2, rtol=1e-14)
        roots.append(k)
    out = []
    for k in sorted(roots, reverse=True):
        if out and abs(out[-1].kappa - k) < 10 * KAPPA_TOL:
            continue
        H = mk.H(k)
        u, sv, vh = np.linalg.svd(H)
        mult = int(np.sum(sv < MULT_TOL * max(1.0, sv[0])))
        f = vh[-1].conj()
        f = f / np.linalg.norm(f)
        j = int(np.argmax(np.abs(f)))
        f = f * (abs(f[j]) / f[j])
        out.append(BoundState(float(k), f, float(np.linalg.norm(H @ f)), max(mult, 1)))
    if sum(b.multiplicity for b in out) > pot.n_minus:
        raise ScatteringError("bound-state count exceeds the number of negative couplings")
    return out


def verify_boundstate_tracelaw(bs: BoundState, ts_or_pot, alpha=None):
    """|∫₀^∞|W|²/(t²+κ²)dt + 2π/α| for a rank-one potential."""
    pot = _pot(ts_or_pot)
    if pot.n != 1:
        raise NotImplementedError("trace law is the rank-one form; use the kernel residual for n > 1")
    alpha = pot.alphas[0] if alpha is None else alpha
    lhs = float(boundstate_kernel_M(pot, bs.kappa)[0, 0])
    return abs(lhs + 2 * math.pi / alpha)


def kernel_orthogonality(pot, b1: BoundState, b2: BoundState):
    """|∫ conj(F_q)F_p/((t²+κ_q²)(t²+κ_p²)) dt| with F(t) = W(t)f."""
    pot = _pot(pot)
    rule = _union_rule(pot.funcs)
    s = np.stack([f.sine(rule.nodes) for f in pot.funcs])
    Fp = -2j * (b1.fvec @ s)
    Fq = -2j * (b2.fvec @ s)
    t2 = rule.nodes ** 2
    return abs(rule.integrate(np.conj(Fq) * Fp / ((t2 + b1.kappa ** 2) * (t2 + b2.kappa ** 2))))


# ---------------------------------------------------------------------------
# real zeros

def _b_at(pot, lam):
    T = boundary_T_spectral(pot, np.atleast_1d(lam))
    return np.linalg.det(np.eye(pot.n) + pot.alphas[:, None] * T)


def find_real_zeros(profile: ScatteringProfile, ts, rel=0.05, accept=ZERO_ACCEPT) -> RealZeroSet:
    """Real zeros λ_k > 0 of r, i.e. of b(λ) = det(I + αT(λ²+i0)).

    Candidates are local minima of |b| on the grid; each is polished and
    then filtered by Wf = 0 and (2πP + 2πα⁻¹)f = 0, where f spans the
    numerical kernel and P = (2/π)PV∫ŝŝᵀ/(μ²−λ²).
    """
    pot = _pot(ts)
    grid = profile.grid
    i0 = grid.zero_index
    lam = grid.half
    ab = np.abs(profile.b[i0:])
    floor = 1e-3 * grid.lambda_max
    cand = [i for i in range(1, lam.size - 1)
            if ab[i] <= ab[i - 1] and ab[i] <= ab[i + 1] and lam[i] > floor
            and ab[i] < rel * max(1.0, float(np.median(ab)))]
    if len(cand) > 1:
        gaps = np.diff(cand)
        if np.any(gaps < 3):
            raise GridRefinementError("clustered minima of |r|; refine the grid near "
                                      f"λ={lam[cand[int(np.argmin(gaps))]]:.6g}")
    out = RealZeroSet()
    for i in cand:
        f = lambda t: float(abs(_b_at(pot, t)[0]))
        res = minimize_scalar(f, bounds=(lam[i - 1], lam[i + 1]), method="bounded",
                              options={"xatol": 1e-12})
        lz = float(res.x)
        bval = f(lz)
        if bval > accept:
            continue
        T = boundary_T_spectral(pot, np.array([lz]))[0]
        A = np.eye(pot.n) + pot.alphas[:, None] * T
        _, sv, vh = np.linalg.svd(A)
        fvec = vh[-1].conj()
        mult = int(np.sum(sv < accept * max(1.0, sv[0])))
        s = np.array([fn.sine(np.array([lz]))[0] for fn in pot.funcs])
        wres = abs(2 * (s @ fvec))
        P = np.array([[pv_product(a, b, np.array([lz]))[0] for b in pot.funcs] for a in pot.funcs])
        pres = float(np.linalg.norm(2 * math.pi * (P + np.diag(1 / pot.alphas)) @ fvec))
        rec = {"lambda": lz, "abs_b": bval, "W_residual": wres, "P_residual": pres}
        out.diagnostics.append(rec)
        if wres <= accept and pres <= accept:
            out.zeros.append(lz)
            out.multiplicity.append(max(mult, 1))
        else:
            out.near_zeros.append(lz)
    return out


# ---------------------------------------------------------------------------
# eigenfunctions

def _u_matrix(funcs, kappa, x, h=0.005):
    """u_k = (L₀ + κ²)⁻¹v_k on x, shape (n, len(x)).

    With G(x,y) = (e^{−κ|x−y|} − e^{−κ(x+y)})/2κ,

        2κ·u(x) = A(x) + B(x) − e^{−κx}·D,
        A = ∫₀ˣ e^{−κ(x−y)}v,  B = ∫ₓ^∞ e^{−κ(y−x)}v,  D = ∫₀^∞ e^{−κy}v.

    v is taken piecewise linear on a uniform grid of step h, the exponential
    weights are exact and A, B follow from first-order recursions.
    """
    x = np.asarray(x, dtype=float)
    Xe = float(np.max(x)) + 40.0 / kappa
    m = int(math.ceil(Xe / h))
    y = np.linspace(0.0, m * h, m + 1)
    a = kappa * h
    q = math.exp(-a)
    # weights of the endpoint where the exponential is 1 (w1) and of the other (w0)
    w1 = (1 + math.expm1(-a) / a) / kappa
    w0 = -math.expm1(-a) / kappa - w1
    out = np.empty((len(funcs), x.size))
    ey = np.exp(-kappa * y)
    for k, f in enumerate(funcs):
        v = f.v(y)
        seg_a = w0 * v[:-1] + w1 * v[1:]
        A = np.concatenate([[0.0], lfilter([1.0], [1.0, -q], seg_a)])
        seg_b = w1 * v[:-1] + w0 * v[1:]
        B = np.concatenate([lfilter([1.0], [1.0, -q], seg_b[::-1])[::-1], [0.0]])
        D = float(np.sum(ey[:-1] * seg_b))
        u = (A + B - ey * D) / (2 * kappa)
        out[k] = CubicSpline(y, u)(x)
    return out


def _a_matrix(pot, lam):
    """a[s, k] = Φ*_{s,k}(λ) + Φ_{k,s}(−λ) − 2iλδ/α_k at complex λ ∈ ℂ₊."""
    fs = pot.funcs
    n = pot.n
    lc = np.array([np.conj(lam)])
    lm = np.array([-lam])
    a = np.empty((n, n), dtype=complex)
    for s in range(n):
        for k in range(n):
            a[s, k] = np.conj(Phi_pair(fs[s], fs[k], lc)[0]) + Phi_pair(fs[k], fs[s], lm)[0]
        a[s, s] -= 2j * lam / pot.alphas[s]
    return a


def _adjugate(A):
    n = A.shape[0]
    if n == 1:
        return np.ones((1, 1), dtype=A.dtype)
    C = np.empty_like(A)
    for i in range(n):
        for j in range(n):
            m = np.delete(np.delete(A, i, axis=0), j, axis=1)
            C[i, j] = (-1) ** (i + j) * np.linalg.det(m)
    return C.T


def boundstate_eigenfunction(bs: BoundState, pot, ts=None, xgrid=None, normalize=True):
    """e(iκ, x) from the determinant representation

        e = Πα/(2iλ)ⁿ · e^{−i(n−1)λx} · det B(λ,x),  λ = iκ,
        B[k, s] = e^{iλx}a_{s,k} − w_s(λ,x)ṽ*_k(λ),
        w_s(iκ,x) = 2κ u_s(x) + e^{−κx}ṽ_s(−iκ).

    B = e^{−κx}A₀ − 2κ ṽ* uᵀ with A₀ = B(λ,0), so the matrix determinant lemma
    gives e = Πα/(2iλ)ⁿ·[e^{−κx}det A₀ − 2κ uᵀ adj(A₀) ṽ*] with the growing
    factor cancelled exactly.  The output is scaled to unit L² norm on
    xgrid (trapezoid) with the largest sample real and positive.
    """
    pot = _pot(pot)
    x = np.asarray(xgrid, dtype=float)
    k = bs.kappa
    lam = 1j * k
    n = pot.n
    fs = pot.funcs
    a = _a_matrix(pot, lam)
    vneg = np.array([f.vtilde(np.array([-lam]))[0] for f in fs])          # ṽ_s(−iκ)
    vstar = np.conj(np.array([f.vtilde(np.array([np.conj(lam)]))[0] for f in fs]))
    A0 = a.T - vstar[:, None] * vneg[None, :]
    u = _u_matrix(fs, k, x)
    pref = np.prod(pot.alphas) / (2j * lam) ** n
    e = pref * (np.exp(-k * x) * np.linalg.det(A0) - 2 * k * ((_adjugate(A0) @ vstar) @ u))
    if not normalize:
        return e
    nrm = math.sqrt(float(np.trapezoid(np.abs(e) ** 2, x)))
    if nrm == 0 or not np.isfinite(nrm):
        raise InconsistentDataError("eigenfunction vanishes identically")
    j = int(np.argmax(np.abs(e)))
    e = e / nrm * (abs(e[j]) / e[j])
    tail = np.abs(e[x >= 0.9 * x.max()])
    if tail.size and tail.max() > 0.5 * np.abs(e).max():
        raise InconsistentDataError("eigenfunction does not decay; bound state inconsistent")
    return e


def rayleigh_quotient(e, x, pot):
    """(∫|e'|² + Σα_k|⟨e,v_k⟩|²)/∫|e|² by finite differences on a uniform x."""
    pot = _pot(pot)
    x = np.asarray(x, dtype=float)
    de = np.gradient(e, x, edge_order=2)
    num = float(np.trapezoid(np.abs(de) ** 2, x))
    for al, f in pot.terms:
        num += al * abs(np.trapezoid(e * f.v(x), x)) ** 2
    return num / float(np.trapezoid(np.abs(e) ** 2, x))


def bound_state_table(states, pot, ts=None):
    rows = []
    for b in states:
        rows.append({"kappa": b.kappa, "energy": b.energy, "residual": b.residual,
                     "multiplicity": b.multiplicity})
    return rows
