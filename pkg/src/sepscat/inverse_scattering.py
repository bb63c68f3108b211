"""Inverse problem for one channel: from the phase ζ of S₁ = e^{−2iζ}
(plus real zeros and an optional bound state) back to α₁ and |W₁|².

The boundary value B⁺ of b(λ²) factors as

    B⁺(λ) = G(λ) · Π_k m_k(λ) · (λ − iκ)/(λ + iκ),   m_k = (λ² − λ_k²)/(λ + i)²,

with G analytic and zero-free in the upper half-plane and G(∞) = 1.  Then
arg G = ζ̃ := ζ − Σ arg m_k + 2θ_κ is continuous and odd, log|G| is its
Hilbert transform, and

    |W₁|² = (4λ/α)·Im B⁺ = (4/α)·λ sin ζ |B⁺|,   α = (1/π)∫_ℝ λ sin ζ |B⁺| dλ.

The last identity is Parseval for the sine transform with ‖v₁‖ = 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .cauchy_kernel import DensitySamples, pv_integral
from .errors import (DataError, DegenerateDataError, GridRefinementError,
                     InconsistentDataError)
from .forward_scattering import zero_mask
from .transforms import SpectralGrid, inverse_sine_recover_v, make_grid

UNWRAP_MAX = 0.5 * math.pi     # largest ζ step accepted as continuous
UNWRAP_REFUSE = 0.75 * math.pi  # raw arg steps past this make the unwrap ambiguous
FLOOR_TOL = 1e-6


# ---------------------------------------------------------------------------
# elementary phases

def theta_kappa(lam, kappa):
    """arctan(κ/t) for t > 0, extended oddly (0 at t = 0)."""
    lam = np.asarray(lam, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(lam != 0, np.arctan(kappa / np.abs(lam)), 0.0)
    return np.sign(lam) * out


def arg_m(lam, lk):
    """arg of (λ² − λ_k²)/(λ + i)² on the real line (odd, jump π at ±λ_k)."""
    lam = np.asarray(lam, dtype=float)
    a = np.abs(lam)
    with np.errstate(divide="ignore"):
        out = np.where(a > lk, -2 * np.arctan(1.0 / np.where(a > 0, a, 1.0)), 2 * np.arctan(a))
    return np.sign(lam) * out


def abs_m(lam, lk):
    lam = np.asarray(lam, dtype=float)
    return np.abs(lam ** 2 - lk ** 2) / (lam ** 2 + 1)


# ---------------------------------------------------------------------------
# data

@dataclass
class ScatteringData:
    grid: SpectralGrid
    zeta: np.ndarray
    real_zeros: tuple = ()
    kappas: tuple = ()

    def __post_init__(self):
        self.zeta = np.asarray(self.zeta, dtype=float)
        if self.zeta.shape != (self.grid.size,):
            raise DataError("ζ samples do not match the grid")
        self.real_zeros = tuple(sorted(abs(float(z)) for z in self.real_zeros))
        self.kappas = tuple(float(k) for k in self.kappas)
        if len(self.kappas) > 1:
            raise DataError("the rank-one inverse problem admits at most one bound state")
        if any(k <= 0 for k in self.kappas):
            raise DataError("κ must be positive")

    @property
    def class_tag(self):
        if self.kappas:
            return "Omega_q_kappa"
        return "Omega_q" if self.real_zeros else "Omega0"

    @property
    def q(self):
        return len(self.real_zeros)


@dataclass
class ReconstructionResult:
    alpha: float
    Wabs_sq: np.ndarray
    v_candidate: object
    grid: SpectralGrid
    shape: np.ndarray
    diagnostics: dict = field(default_factory=dict)


def _branch_correction(lam, real_zeros, kappas):
    """Σ arg m_k − 2θ_κ, so that ζ = ζ̃ + correction."""
    c = np.zeros_like(np.asarray(lam, dtype=float))
    for lk in real_zeros:
        c = c + arg_m(lam, lk)
    for k in kappas:
        c = c - 2 * theta_kappa(lam, k)
    return c


def _fill_odd(grid, values_half, bad_half):
    """Odd extension of half-grid samples, re-interpolating the ``bad`` ones."""
    full = grid.mirror(values_half, "odd")
    bad = grid.mirror(bad_half, "even")
    bad[grid.zero_index] = False
    full[grid.zero_index] = 0.0
    if np.any(bad):
        good = ~bad
        spl = CubicSpline(grid.points[good], full[good])
        full[bad] = spl(grid.points[bad])
    return full


def extract_zeta(grid: SpectralGrid, B_plus=None, S=None, real_zeros=(), kappas=(), flagged=None):
    """Continuous phase ζ with B⁺ = |B⁺|e^{iζ} (or S = e^{−2iζ}).

    The zero-free part arg(B⁺/Πm_k) is unwrapped from λ = Λ towards 0 with the
    branch fixed by ζ(Λ) ≈ 0; samples inside flagged neighbourhoods are
    interpolated through the smooth phase ζ̃, and ζ is returned odd with ζ(0)=0.
    """
    if (B_plus is None) == (S is None):
        raise ValueError("give exactly one of B_plus or S")
    i0 = grid.zero_index
    lam = grid.half
    mask = zero_mask(grid, real_zeros)
    if flagged is not None:
        mask = mask | np.asarray(flagged, dtype=bool)
    fl = mask[i0:].copy()
    fl[0] = True
    m = np.ones(lam.size, dtype=complex)
    for lk in real_zeros:
        m = m * np.exp(1j * arg_m(lam, lk))
    if B_plus is not None:
        z = np.asarray(B_plus)[i0:] / m
        factor = 1.0
    else:
        z = np.asarray(S)[i0:] * m * m
        factor = -0.5
    fl |= ~np.isfinite(z) | (np.abs(z) == 0)
    good = np.nonzero(~fl)[0]
    if good.size < 4:
        raise DataError("too few usable samples to extract a phase")
    raw = np.angle(z[good])[::-1]
    unw = np.unwrap(raw)[::-1]
    steps = np.abs(np.diff(unw))
    if np.max(steps) > UNWRAP_REFUSE:
        j = int(np.argmax(steps))
        raise GridRefinementError(f"phase steps by {steps[j]:.3g} rad near λ={lam[good][j]:.6g}; refine the grid")
    c = np.zeros(lam.size)
    c[good] = factor * unw
    # smooth phase ζ̃ = c + 2θ_κ is odd and continuous through 0 and ±λ_k
    tilde = c + sum(2 * theta_kappa(lam, k) for k in kappas)
    tilde_full = _fill_odd(grid, tilde, fl)
    corr = _branch_correction(grid.points, real_zeros, kappas)
    zeta = tilde_full + corr
    zeta[i0] = 0.0
    return zeta


def zeta_tilde(data: ScatteringData):
    """The continuous odd phase ζ̃ = ζ − Σarg m_k + 2θ_κ."""
    grid = data.grid
    corr = _branch_correction(grid.points, data.real_zeros, data.kappas)
    tilde = data.zeta - corr
    i0 = grid.zero_index
    bad = zero_mask(grid, data.real_zeros, frac=1e-9)[i0:]
    for lk in data.real_zeros:
        bad |= np.isclose(grid.half, lk, rtol=0, atol=1e-12)
    return _fill_odd(grid, tilde[i0:], bad)


def _tail_exponent(grid, f, default=2.0):
    lam = grid.half
    n = lam.size
    a, b = int(0.8 * n), n - 1
    fa, fb = abs(f[grid.zero_index + a]), abs(f[grid.zero_index + b])
    if fa <= 0 or fb <= 0:
        return default
    p = -math.log(fb / fa) / math.log(lam[b] / lam[a])
    return float(min(max(p, 1.0), 8.0))


def hilbert_samples(grid: SpectralGrid, f, tail_exponent=None, interior=True):
    """(1/π) PV∫ f(t)/(t−λ) dt at the grid points strictly inside (−Λ, Λ)."""
    p = _tail_exponent(grid, f) if tail_exponent is None else tail_exponent
    rho = DensitySamples(grid, f, p)
    pts = grid.points[1:-1] if interior else grid.points
    return pv_integral(rho, pts) / math.pi


def phase_exponential(data_or_zeta, lam=None, grid: SpectralGrid = None):
    """H(λ) = exp{(1/π) PV∫ ζ(t)/(t−λ) dt} for an odd phase."""
    if isinstance(data_or_zeta, ScatteringData):
        grid = data_or_zeta.grid
        zeta = data_or_zeta.zeta
    else:
        zeta = np.asarray(data_or_zeta, dtype=float)
    if grid is None:
        raise ValueError("grid required with bare samples")
    p = _tail_exponent(grid, zeta)
    rho = DensitySamples(grid, zeta, p)
    pts = grid.points[1:-1] if lam is None else np.asarray(lam, dtype=float)
    return np.exp(pv_integral(rho, pts) / math.pi)


def aux_psi(lam, kappa, grid: SpectralGrid = None, constant=2 / math.pi):
    """ψ(λ,κ) = 1/(λ²+κ²)·exp{c·PV∫θ_κ(t)/(t−λ) dt}, c = 2/π by default.

    θ_κ is evaluated exactly (callable density, panels aligned at its jump
    at 0).  ψ(0) = +∞.
    """
    grid = grid or make_grid(50.0, 2000)
    lam = np.asarray(lam, dtype=float)
    rho = DensitySamples.from_function(grid, lambda t: theta_kappa(t, kappa), 1.0, (0.0,))
    flat = lam.ravel()
    out = np.full(flat.shape, np.inf)
    nz = flat != 0
    out[nz] = np.exp(constant * pv_integral(rho, flat[nz])) / (flat[nz] ** 2 + kappa ** 2)
    return out.reshape(lam.shape)


# ---------------------------------------------------------------------------
# reconstruction

def modulus_B(data: ScatteringData):
    """|B⁺(λ)| on the grid interior: exp(H[ζ̃])·Π|m_k|."""
    grid = data.grid
    tilde = zeta_tilde(data)
    p = _tail_exponent(grid, tilde)
    if p < 1.05:
        p = 1.0
    Hm = hilbert_samples(grid, tilde, p)
    mod = np.exp(Hm)
    for lk in data.real_zeros:
        mod = mod * abs_m(grid.points[1:-1], lk)
    return mod


def reconstruct_shape(data: ScatteringData):
    """Even samples of λ·sin ζ·|B⁺| on the full grid.

    The two edge samples, where the PV engine is not used, are continued by
    the C/λ² model.
    """
    grid = data.grid
    lam = grid.points
    tilde = zeta_tilde(data)
    corr = _branch_correction(lam, data.real_zeros, data.kappas)
    s = np.sin(tilde + corr)
    shape = np.empty(grid.size)
    shape[1:-1] = lam[1:-1] * s[1:-1] * modulus_B(data)
    edge = shape[-2] * (lam[-2] / lam[-1]) ** 2
    shape[0] = shape[-1] = edge
    shape[grid.zero_index] = 0.0
    return 0.5 * (shape + shape[::-1])


def reconstruct_alpha(data: ScatteringData, shape=None, alt_constant=False):
    """α = (1/π)∫_ℝ shape dλ with a C/λ^p tail past ±Λ.

    ``alt_constant=True`` instead returns (π/2)∫₀^∞ shape (alternative normalization).
    """
    grid = data.grid
    if shape is None:
        shape = reconstruct_shape(data)
    lam = grid.points
    i0 = grid.zero_index
    half = shape[i0:]
    core = float(simpson(half, x=lam[i0:]))
    p = _tail_exponent(grid, shape, 2.0)
    tail = float(half[-1]) * grid.lambda_max / (p - 1) if p > 1.05 else 0.0
    total = core + tail       # ∫₀^∞
    if abs(total) < 1e-10:
        raise DegenerateDataError("∫ λ sin ζ |B| vanishes; no perturbation to recover")
    if alt_constant:
        return 0.5 * math.pi * total
    return 2 * total / math.pi


def reconstruct_Wsq(data: ScatteringData, alpha=None, shape=None):
    """|W₁|² = 4·shape/α, floored at tiny negatives."""
    if shape is None:
        shape = reconstruct_shape(data)
    if not np.any(shape):
        return np.zeros_like(shape)      # no phase, no perturbation
    if alpha is None:
        alpha = reconstruct_alpha(data, shape)
    w = 4.0 * shape / alpha
    mx = float(np.max(np.abs(w))) if w.size else 0.0
    neg = w < -FLOOR_TOL * mx
    if np.any(neg):
        # a couple of isolated samples is noise; a run of them is a class violation
        runs = np.convolve(neg.astype(int), np.ones(3, dtype=int), mode="valid")
        if np.any(runs >= 3):
            i = int(np.argmax(runs >= 3)) + 1
            raise InconsistentDataError(
                f"reconstructed |W|² is negative near λ={data.grid.points[i]:.6g}; data not in the class")
    return np.where(w < 0, 0.0, w)


def invert(data: ScatteringData, xgrid=None, alt_constant=False) -> ReconstructionResult:
    grid = data.grid
    shape = reconstruct_shape(data)
    alpha = reconstruct_alpha(data, shape, alt_constant)
    w = reconstruct_Wsq(data, alpha, shape)
    if xgrid is None:
        xgrid = np.linspace(0.0, 40.0, 801)
    i0 = grid.zero_index
    v = inverse_sine_recover_v(grid.half, np.sqrt(w[i0:]), xgrid)
    floor = float(np.max(np.where(4 * shape / alpha < 0, -4 * shape / alpha, 0.0)))
    diag = {"class": data.class_tag, "floor_magnitude": floor,
            "v_norm": v.norm(), "tail_exponent_shape": _tail_exponent(grid, shape)}
    return ReconstructionResult(alpha, w, v, grid, shape, diag)


def invert_channels(Sk_list, grid: SpectralGrid, zeros_list=None, kappas_list=None, flagged=None, xgrid=None):
    """Independent single-channel inversions (L₀-orthogonal kernels)."""
    out = []
    n = len(Sk_list)
    zeros_list = zeros_list or [()] * n
    kappas_list = kappas_list or [()] * n
    for Sk, zs, ks in zip(Sk_list, zeros_list, kappas_list):
        zeta = extract_zeta(grid, S=Sk, real_zeros=zs, kappas=ks, flagged=flagged)
        out.append(invert(ScatteringData(grid, zeta, zs, ks), xgrid))
    return out


def perron_stieltjes_check(B_plus, alpha, Wabs_sq, grid: SpectralGrid, alt_constant=False):
    """max|(4λ/α)·Im B⁺(λ) − |W|²| relative to max|W|² (λ ≥ 0).

    ``alt_constant=True`` uses the alternative 4πλ/α normalization.
    """
    i0 = grid.zero_index
    lam = grid.half
    c = 4 * math.pi if alt_constant else 4.0
    ps = c * lam / alpha * np.asarray(B_plus)[i0:].imag
    w = np.asarray(Wabs_sq)[i0:]
    scale = float(np.max(np.abs(w)))
    if scale == 0:
        return float(np.max(np.abs(ps)))
    return float(np.max(np.abs(ps - w))) / scale


def jump_residual(B_plus, alpha, Wabs_sq, grid: SpectralGrid):
    """max|B⁺ − B⁻ − (iα/2λ)|W|²| over λ ≠ 0, with B⁻ = conj B⁺ on ℝ."""
    lam = grid.points
    nz = lam != 0
    B = np.asarray(B_plus)
    lhs = B[nz] - np.conj(B[nz])
    rhs = 1j * alpha / (2 * lam[nz]) * np.asarray(Wabs_sq)[nz]
    return float(np.max(np.abs(lhs - rhs)))


# ---------------------------------------------------------------------------
# class diagnostics

def validate_class(data: ScatteringData):
    """Sampled checks of the admissibility conditions; returns a dict of
    {name: {"pass": bool, "value": float, "approximate": bool}}."""
    grid = data.grid
    lam = grid.points
    i0 = grid.zero_index
    z = data.zeta
    near = zero_mask(grid, data.real_zeros)
    res = {}

    def put(name, ok, value, approx=False):
        res[name] = {"pass": bool(ok), "value": float(value), "approximate": approx}

    put("finite", np.all(np.isfinite(z)), float(np.max(np.abs(z))))
    put("odd", np.max(np.abs(z + z[::-1])) <= 1e-12, np.max(np.abs(z + z[::-1])))
    put("edge_decay", abs(z[-1]) <= 1e-3, abs(z[-1]))
    half = z[i0:]
    hz = near[i0:]
    s = np.sin(half[~hz & (grid.half > 0)])
    sig = np.sign(np.sum(s))
    bad = float(np.max(np.maximum(-sig * s, 0.0))) if s.size else 0.0
    put("sign", bad <= 1e-8, bad)
    # continuity off the zero set (jumps of π belong at ±λ_k only)
    jumps = np.abs(np.diff(half))
    mask = ~(hz[1:] | hz[:-1])
    put("continuity", np.max(jumps[mask], initial=0.0) <= UNWRAP_MAX, np.max(jumps[mask], initial=0.0))
    # (i) λζ ∈ L¹ with a power-law tail
    core = float(simpson(np.abs(lam * z), x=lam))
    if z[-1] == 0:
        put("lambda_zeta_L1", True, core)     # compact spectral support
    else:
        p = _tail_exponent(grid, z, 0.0)
        tail = 2 * abs(lam[-1] * z[-1]) * lam[-1] / (p - 2) if p > 2 else math.inf
        put("lambda_zeta_L1", math.isfinite(tail), core + (tail if math.isfinite(tail) else 0.0))
    # (ii) boundedness of the PV of the smooth phase
    try:
        F = hilbert_samples(grid, zeta_tilde(data))
        put("pv_bounded", np.all(np.isfinite(F)), float(np.max(np.abs(F))), True)
    except Exception as exc:  # diagnostics never raise
        put("pv_bounded", False, math.nan, True)
        res["pv_bounded"]["error"] = str(exc)
    # (iii) ∫ λ Q (ζ')² cot²ζ sinζ dλ on λ > 0 away from the zero set
    lp = grid.half
    dz = np.gradient(half, lp)
    Q = np.ones_like(lp)
    for lk in data.real_zeros:
        Q = Q * (lp ** 2 - lk ** 2) / (lp ** 2 + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        integrand = lp * Q * dz ** 2 * np.cos(half) ** 2 / np.sin(half)
    ok = (~hz) & (lp > 0) & np.isfinite(integrand)
    val = float(simpson(np.abs(integrand[ok]), x=lp[ok])) if np.count_nonzero(ok) > 2 else math.nan
    put("derivative_integral", math.isfinite(val), val, True)
    res["class"] = data.class_tag
    return res
