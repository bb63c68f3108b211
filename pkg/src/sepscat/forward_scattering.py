"""Jost solution, r(λ), S(λ), the resolvent matrix T(z) and the b_k chain.

Index conventions: Phi[s, k] = Φ_{s,k}; T[k, s] = ⟨R₀(z)v_k, v_s⟩;
E[k, s] = α_s φ_{s,k} − δ_{ks}.  On the real axis the "plus" boundary value
of a function of z = λ² is taken with Im λ > 0, so B⁺(−λ) = conj B⁺(λ).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, PoleError, ZeroSetError
from .quadrature import panel_rule
from .transforms import (Phi_pair, SeparablePotential, SpectralGrid,
                         TransformSet, pv_product, resolvent_spectral)

ZERO_FRACTION = 1e-3   # half-width of flagged zero neighbourhoods, in units of Λ
E0_TOL = 1e-10


# ---------------------------------------------------------------------------
# φ, e₀, e_k

def varphi_at(fs, fk, lam):
    """φ_{s,k}(λ) for real λ, including λ = 0."""
    lam = np.abs(np.asarray(lam, dtype=float))
    out = -pv_product(fs, fk, lam)
    nz = lam > 0
    out[nz] += fs.sine(lam[nz]) * fk.cosine(lam[nz]) / lam[nz]
    out[~nz] += fs.moment1() * float(fk.cosine(np.array([0.0]))[0])
    return out


def varphi_matrix(ts: TransformSet):
    """φ[s, k] on the grid: −Im Φ_{s,k}(λ)/λ off 0, the direct limit at 0."""
    grid = ts.grid
    n = ts.n
    fs = ts.pot.funcs
    i0 = grid.zero_index
    half = grid.half
    out = np.empty((n, n, grid.size))
    for s in range(n):
        for k in range(n):
            h = np.empty(half.size)
            h[1:] = -ts.Phi[s, k, i0 + 1:].imag / half[1:]
            h[0] = varphi_at(fs[s], fs[k], np.array([0.0]))[0]
            out[s, k] = grid.mirror(h, "even")
    return out


def _E_matrix(alphas, varphi):
    """E[..., k, s] = α_s φ_{s,k} − δ_{ks} from varphi[s, k, ...]."""
    phi = np.moveaxis(varphi, (0, 1), (-1, -2))     # [..., k, s]
    n = alphas.size
    return phi * alphas[None, :] - np.eye(n)


def e0_at(pot: SeparablePotential, lam):
    """e₀(λ) = det E(λ) evaluated directly at arbitrary real λ."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    fs = pot.funcs
    n = pot.n
    phi = np.empty((n, n, lam.size))
    for s in range(n):
        for k in range(n):
            phi[s, k] = varphi_at(fs[s], fs[k], lam)
    return np.linalg.det(_E_matrix(pot.alphas, phi))


@dataclass
class JostAssembly:
    grid: SpectralGrid
    pot: SeparablePotential
    e0: np.ndarray
    ek: np.ndarray           # (n, N); NaN where λ ∈ E_α
    varphi: np.ndarray       # (n, n, N)
    Ealpha: list = field(default_factory=list)

    def index(self, lam):
        i = self.grid.index_of(lam)
        if i is None:
            raise DomainError(f"λ={lam} is not a grid point")
        return i


def _locate_e0_zeros(pot, grid, e0):
    zs = []
    half = grid.half
    h0 = e0[grid.zero_index:]
    if abs(h0[0]) < E0_TOL:
        zs.append(0.0)
    sgn = np.sign(h0)
    for i in np.nonzero(sgn[:-1] * sgn[1:] < 0)[0]:
        a, b = half[i], half[i + 1]
        f = lambda t: float(e0_at(pot, t)[0])
        try:
            zs.append(brentq(f, a, b, xtol=1e-12))
        except ValueError:
            zs.append(0.5 * (a + b))
    for i in np.nonzero(np.abs(h0) < E0_TOL)[0]:
        if half[i] not in zs:
            zs.append(float(half[i]))
    return sorted(set(zs))


def assemble_jost(pot: SeparablePotential, ts: TransformSet, grid: SpectralGrid = None) -> JostAssembly:
    """e₀ = det E and e = −E⁻¹ e₀ ṽ* on the grid (dense solve)."""
    grid = grid or ts.grid
    phi = varphi_matrix(ts)
    E = _E_matrix(pot.alphas, phi)                 # (N, n, n)
    e0 = np.linalg.det(E)
    zeros = _locate_e0_zeros(pot, grid, e0)
    ok = np.abs(e0) > E0_TOL
    rhs = -(np.conj(ts.vtilde).T * e0[:, None])    # (N, n)
    ek = np.full((grid.size, pot.n), np.nan + 0j)
    ek[ok] = np.linalg.solve(E[ok], rhs[ok][..., None])[..., 0]
    return JostAssembly(grid, pot, e0, ek.T.copy(), phi, zeros)


# ---------------------------------------------------------------------------
# Jost solution in x

def _cum_sin_cos(f, lam, x):
    """∫₀^x sin(λt)v(t)dt and ∫₀^x cos(λt)v(t)dt (and ∫₀^x t v) at sorted x."""
    x = np.asarray(x, dtype=float)
    order = np.argsort(x)
    xs = x[order]
    xm = float(xs[-1]) if xs.size else 0.0
    width = min(0.25, 1.0 / (abs(lam) + 1e-300)) if lam else 0.25
    base = np.linspace(0.0, xm, max(1, int(math.ceil(xm / width))) + 1)
    breaks = np.unique(np.concatenate([base, xs]))
    rule = panel_rule(breaks, 16)
    v = f.v(rule.nodes) * rule.weights
    t = rule.nodes
    per = np.stack([np.sin(lam * t) * v, np.cos(lam * t) * v, t * v])    # (3, M)
    npan = breaks.size - 1
    pan = per.reshape(3, npan, -1).sum(axis=2)
    cum = np.concatenate([np.zeros((3, 1)), np.cumsum(pan, axis=1)], axis=1)
    idx = np.searchsorted(breaks, xs)
    out = np.empty((3, x.size))
    out[:, order] = cum[:, idx]
    return out


def psi_k(f, lam, x, deriv=False):
    """ψ(λ,x) = ∫_x^∞ sin λ(t−x)/λ · v(t) dt, or ∂ψ/∂x, for real λ."""
    x = np.asarray(x, dtype=float)
    lam = float(lam)
    cs, cc, cm = _cum_sin_cos(f, lam, x)
    C = float(f.cosine(np.array([abs(lam)]))[0]) - cc
    if lam == 0.0:
        if deriv:
            return -C
        return (f.moment1() - cm) - x * C
    S = float(np.sign(lam) * f.sine(np.array([abs(lam)]))[0]) - cs
    c, s = np.cos(lam * x), np.sin(lam * x)
    if deriv:
        return -(c * C + s * S)
    return (c * S - s * C) / lam


def jost_solution(ja: JostAssembly, pot: SeparablePotential, lam, x, deriv=False):
    """e(λ,x) = e^{iλx}e₀(λ) + Σ α_k e_k(λ) ψ_k(λ,x) at a grid λ."""
    i = ja.index(lam)
    if not np.all(np.isfinite(ja.ek[:, i])):
        raise ZeroSetError(f"λ={lam} lies in the zero set of e₀")
    lam = float(ja.grid.points[i])
    x = np.asarray(x, dtype=float)
    if deriv:
        out = 1j * lam * np.exp(1j * lam * x) * ja.e0[i]
    else:
        out = np.exp(1j * lam * x) * ja.e0[i]
    for k, (a, f) in enumerate(pot.terms):
        out = out + a * ja.ek[k, i] * psi_k(f, lam, x, deriv)
    return out


# ---------------------------------------------------------------------------
# R, r, S

def r_and_R(ts: TransformSet, pot: SeparablePotential, grid: SpectralGrid = None):
    """R[k, s] = Φ̄_{s,k} + Φ̄_{k,s} − ṽ̄_k ṽ̄_s − 2iλδ_{ks}/α_k and r = det R."""
    grid = grid or ts.grid
    lam = grid.points
    P = np.conj(ts.Phi)                                   # [s, k, N]
    R = np.moveaxis(P, (0, 1), (-1, -2)) + np.moveaxis(P, (0, 1), (-2, -1))
    vb = np.conj(ts.vtilde).T                              # (N, n)
    R = R - vb[:, :, None] * vb[:, None, :]
    R = R - 2j * lam[:, None, None] * np.diag(1.0 / pot.alphas)[None]
    r = np.linalg.det(R)
    return R, r


def zero_mask(grid: SpectralGrid, zeros=(), frac=ZERO_FRACTION):
    """True where λ lies within frac·Λ of 0 or of ±(a listed zero)."""
    lam = grid.points
    rad = frac * grid.lambda_max
    m = np.abs(lam) < rad
    for z in zeros:
        m |= np.abs(np.abs(lam) - abs(z)) < rad
    return m


@dataclass
class ScatteringProfile:
    grid: SpectralGrid
    r: np.ndarray
    S: np.ndarray            # NaN inside flagged neighbourhoods
    Sk: np.ndarray           # (n, N)
    bk: np.ndarray           # (n, N) boundary values B_k⁺(λ)
    b: np.ndarray            # Π B_k⁺
    flagged: np.ndarray
    real_zeros: list = field(default_factory=list)
    R: np.ndarray | None = None
    T: np.ndarray | None = None

    def S_at(self, lam):
        i = self.grid.index_of(lam)
        if i is None:
            raise DomainError(f"λ={lam} is not a grid point")
        if self.flagged[i]:
            raise ZeroSetError(f"λ={lam} is inside a flagged zero neighbourhood")
        return self.S[i]

    @property
    def n(self):
        return self.Sk.shape[0]


def boundary_T(ts: TransformSet):
    """T(λ²+i0) on the grid by transform arithmetic (boundary form).

    T[k, s] = [ṽ_k(−λ)ṽ̄_s(λ) − Φ̄_{k,s}(λ) − Φ_{s,k}(−λ)]/(2iλ);
    the λ = 0 entry is (2/π)∫ŝ_kŝ_s/μ² dμ.
    """
    grid = ts.grid
    lam = grid.points
    n = ts.n
    N = grid.size
    flip = slice(None, None, -1)
    vt = ts.vtilde
    T = np.empty((N, n, n), dtype=complex)
    i0 = grid.zero_index
    fs = ts.pot.funcs
    with np.errstate(divide="ignore", invalid="ignore"):
        for k in range(n):
            for s in range(n):
                num = (vt[k][flip] * np.conj(vt[s]) - np.conj(ts.Phi[k, s])
                       - ts.Phi[s, k][flip])
                T[:, k, s] = num / (2j * lam)
    for k in range(n):
        for s in range(n):
            T[i0, k, s] = pv_product(fs[k], fs[s], np.array([0.0]))[0]
    return T


def boundary_T_spectral(pot: SeparablePotential, lam):
    """Independent oracle: (2/π)PV∫ŝ_kŝ_s/(μ²−λ²) + iŝ_k(λ)ŝ_s(λ)/λ."""
    lam = np.asarray(lam, dtype=float)
    fs = pot.funcs
    n = pot.n
    T = np.empty(lam.shape + (n, n), dtype=complex)
    a = np.abs(lam)
    for k in range(n):
        for s in range(n):
            P = pv_product(fs[k], fs[s], a)
            with np.errstate(divide="ignore", invalid="ignore"):
                jump = np.where(a > 0, fs[k].sine(a) * fs[s].sine(a) / np.where(a > 0, a, 1.0), 0.0)
            T[..., k, s] = P + 1j * np.sign(lam) * jump
    return T


def _chain(alphas, T):
    """Rank-one recursion over stacked matrices T (..., n, n)."""
    A = np.array(T, dtype=complex, copy=True)
    n = alphas.size
    bs = []
    for j in range(n):
        bj = 1.0 + alphas[j] * A[..., j, j]
        tiny = np.abs(bj) < 1e-14
        if np.any(tiny):
            raise PoleError(f"intermediate denominator b_{j + 1} vanishes", j + 1)
        bs.append(bj)
        col = A[..., :, j].copy()
        row = A[..., j, :].copy()
        A = A - alphas[j] * col[..., :, None] * row[..., None, :] / bj[..., None, None]
    return np.stack(bs, axis=0), A


def _lambda_of_z(z):
    lam = np.sqrt(complex(z))
    if lam.imag < 0:
        lam = -lam
    return lam


@dataclass
class ResolventMatrix:
    z: complex
    T: np.ndarray
    alpha: np.ndarray


def resolvent_T(ts_or_pot, z) -> ResolventMatrix:
    """T(z)[k, s] = ⟨R₀(z)v_k, v_s⟩ via transforms, with λ = √z, Im λ > 0."""
    pot = ts_or_pot.pot if isinstance(ts_or_pot, TransformSet) else ts_or_pot
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise DomainError("resolvent_T needs z off [0, ∞) (use the boundary values there)")
    lam = _lambda_of_z(z)
    fs = pot.funcs
    n = pot.n
    T = np.empty((n, n), dtype=complex)
    lm = np.array([-lam])
    lc = np.array([np.conj(lam)])
    vneg = [f.vtilde(lm)[0] for f in fs]
    vstar = [np.conj(f.vtilde(lc)[0]) for f in fs]
    for k in range(n):
        for s in range(n):
            Pks = np.conj(Phi_pair(fs[k], fs[s], lc)[0])
            Psk = Phi_pair(fs[s], fs[k], lm)[0]
            T[k, s] = (vneg[k] * vstar[s] - Pks - Psk) / (2j * lam)
    return ResolventMatrix(z, T, pot.alphas.copy())


def resolvent_T_spectral(pot: SeparablePotential, z):
    fs = pot.funcs
    n = pot.n
    T = np.empty((n, n), dtype=complex)
    for k in range(n):
        for s in range(n):
            T[k, s] = resolvent_spectral(fs[k], fs[s], z)
    return T


def bk_chain(pot: SeparablePotential, ts, z):
    """b_k(z) = 1 + α_k⟨R_{k−1}(z)v_k, v_k⟩ and their product."""
    rm = resolvent_T(ts if ts is not None else pot, z)
    bs, _ = _chain(pot.alphas, rm.T)
    return bs, complex(np.prod(bs))


def multipliers_Sk(bk):
    """S_k = B_k(−λ)/B_k(λ) = conj B_k⁺/B_k⁺ on the real axis."""
    return np.conj(bk) / bk


def scattering_S(ts: TransformSet, pot: SeparablePotential, real_zeros=()) -> ScatteringProfile:
    grid = ts.grid
    n = pot.n
    R, r = r_and_R(ts, pot)
    T = boundary_T(ts)
    flagged = zero_mask(grid, real_zeros)
    with np.errstate(divide="ignore", invalid="ignore"):
        S = (-1) ** n * r[::-1] / r
    S[flagged] = np.nan
    bk, _ = _chain(pot.alphas, T)
    Sk = multipliers_Sk(bk)
    Sk[:, flagged] = np.nan
    b = np.prod(bk, axis=0)
    return ScatteringProfile(grid, r, S, Sk, bk, b, flagged, sorted(abs(z) for z in real_zeros), R, T)


def det_identity_residual(pot, ts, z):
    """|det(I + αT(z)) − Π b_k(z)| / (1 + |det|)."""
    rm = resolvent_T(ts if ts is not None else pot, z)
    d = np.linalg.det(np.eye(pot.n) + pot.alphas[:, None] * rm.T)
    bs, _ = _chain(pot.alphas, rm.T)
    return abs(d - np.prod(bs)) / (1 + abs(d))


def e_at_zero(ja: JostAssembly, pot: SeparablePotential, deriv=False):
    """e(λ,0) (or e'(λ,0)) on the grid, NaN on E_α."""
    grid = ja.grid
    lam = grid.points
    a = np.abs(lam)
    out = ja.e0 * (1j * lam if deriv else 1.0)
    for k, (al, f) in enumerate(pot.terms):
        if deriv:
            p = -f.cosine(a)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                p = np.where(a > 0, np.sign(lam) * f.sine(a) / np.where(a > 0, lam, 1.0), f.moment1())
        out = out + al * ja.ek[k] * p
    return out
