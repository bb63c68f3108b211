"""Principal-value and Cauchy integrals of densities sampled on a λ-grid.

A density ρ on ℝ is given by samples on a SpectralGrid (interpolated by a
cubic spline) or by a callable.  Past ±Λ it is modelled as
ρ(±Λ)·(Λ/|t|)^p, and that tail is integrated in closed form.

    pv_integral(ρ, λ)      PV ∫ ρ(t)/(t−λ) dt
    cauchy_offaxis(ρ, z)   (1/2πi) ∫ ρ(t)/(t−z) dt,  Im z ≠ 0
    sokhotski_pair(ρ, λ)   boundary values from above ("plus") and below
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import hyp2f1

from .errors import AccuracyError, DataError, DomainError
from .quadrature import gauss_legendre, graded_points, panel_rule
from .transforms import SpectralGrid

CELL_ORDER = 6
TAIL_ORDER = 48


@dataclass
class DensitySamples:
    grid: SpectralGrid
    values: np.ndarray
    tail_exponent: float = 2.0
    fn: Optional[Callable] = None       # exact density, used instead of the spline
    breakpoints: tuple = ()              # kinks of ``fn`` to align panels with
    _spline: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape[0] != self.grid.size:
            raise DataError("density samples do not match the grid")
        if not np.all(np.isfinite(v)):
            raise DataError("non-finite density samples")
        # p > 1 makes each tail absolutely integrable; p = 1 is accepted for
        # odd densities, whose two tails combine into a convergent integral
        if self.tail_exponent < 1:
            raise DataError("tail exponent must be at least 1")
        if self.tail_exponent <= 1 and self.fn is None:
            lo, hi = v[0], v[-1]
            if np.max(np.abs(lo + hi)) > 1e-9 * max(1.0, float(np.max(np.abs(v)))):
                raise DataError("tail exponent 1 needs an odd density")
        self.values = v

    @classmethod
    def from_function(cls, grid, fn, tail_exponent=2.0, breakpoints=()):
        vals = np.asarray(fn(grid.points))
        return cls(grid, vals, tail_exponent, fn, tuple(breakpoints))

    @property
    def shape(self):
        return self.values.shape[1:]

    @property
    def spline(self):
        if self._spline is None:
            self._spline = CubicSpline(self.grid.points, self.values, axis=0)
        return self._spline

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.fn is not None:
            return np.asarray(self.fn(t))
        return self.spline(t)

    @property
    def edge(self):
        return self.values[-1], self.values[0]


def _cell_rule(rho: DensitySamples, extra=()):
    g = rho.grid.points
    br = np.concatenate([g, np.asarray(rho.breakpoints, dtype=float), np.asarray(extra, dtype=float)])
    br = br[(br >= g[0]) & (br <= g[-1])]
    return panel_rule(br, CELL_ORDER)


def _tail_closed(rho: DensitySamples, z):
    """∫_{|t|>Λ} ρ(t)/(t−z) dt under the power-law tail model."""
    L = rho.grid.lambda_max
    p = rho.tail_exponent
    z = np.asarray(z)
    right, left = rho.edge
    c = z / L
    # ∫₀¹ u^(p−1)/(1−cu) du = 2F1(1, p; p+1; c)/p
    Fr = hyp2f1(1.0, p, p + 1.0, c.astype(complex)) / p
    Fl = hyp2f1(1.0, p, p + 1.0, (-c).astype(complex)) / p
    if np.isrealobj(z):
        Fr, Fl = Fr.real, Fl.real
    sh = (Ellipsis,) + (None,) * len(rho.shape)
    return right * Fr[sh] - left * Fl[sh]


def _tail_numeric(rho: DensitySamples, z):
    """Same tails with the exact density, via t = Λ/u."""
    L = rho.grid.lambda_max
    x, w = gauss_legendre(TAIL_ORDER)
    u = 0.5 * (x + 1)
    w = 0.5 * w
    z = np.asarray(z)
    fr = np.asarray(rho.fn(L / u))
    fl = np.asarray(rho.fn(-L / u))
    sh = (slice(None),) + (None,) * len(rho.shape)
    out = []
    for zz in z.ravel():
        kr = (L / (u * (L - zz * u)) * w)[sh]
        kl = (L / (u * (L + zz * u)) * w)[sh]
        out.append(np.sum(fr * kr, axis=0) - np.sum(fl * kl, axis=0))
    return np.asarray(out).reshape(z.shape + rho.shape)


def _tails(rho, z):
    if rho.fn is not None:
        return _tail_numeric(rho, z)
    return _tail_closed(rho, z)


def pv_integral(rho: DensitySamples, lam):
    """PV ∫ ρ(t)/(t−λ) dt over ℝ by singularity subtraction.

    λ may be a scalar or array; the result has shape lam.shape + ρ.shape.
    """
    lam = np.asarray(lam, dtype=float)
    flat = lam.ravel()
    L = rho.grid.lambda_max
    cell = rho.grid.points[-1] - rho.grid.points[-2]
    bad = flat[L - np.abs(flat) < cell * (1 - 1e-9)]
    if bad.size:
        raise DomainError(f"λ={bad[0]:.6g} is within one grid cell of ±Λ")
    rule = _cell_rule(rho)
    t = rule.nodes
    rt = rho(t)
    rl = rho(flat)
    sh = (slice(None),) + (None,) * len(rho.shape)
    wsh = rule.weights[sh]
    out = np.empty(flat.shape + rho.shape, dtype=np.result_type(rt, float))
    for i, x in enumerate(flat):
        d = t - x
        with np.errstate(divide="ignore", invalid="ignore"):
            f = (rt - rl[i]) / d[sh]
        f[~np.isfinite(f)] = 0.0
        out[i] = np.sum(f * wsh, axis=0) + rl[i] * math.log(abs((L - x) / (L + x)))
    out = out + _tails(rho, flat)
    return out.reshape(lam.shape + rho.shape)


def hilbert(rho: DensitySamples, lam):
    """(1/π) PV ∫ ρ(t)/(t−λ) dt."""
    return pv_integral(rho, lam) / math.pi


def sokhotski_pair(rho: DensitySamples, lam):
    """Boundary values of (1/2πi)∫ρ/(t−z) at z = λ ± i0."""
    pv = pv_integral(rho, lam) / (2j * math.pi)
    r = rho(np.asarray(lam, dtype=float))
    return 0.5 * r + pv, -0.5 * r + pv


def matrix_sokhotski(rhos: DensitySamples, lam):
    """Entrywise sokhotski_pair for matrix-valued densities."""
    if rhos.values.ndim != 3:
        raise DataError("matrix density expected")
    return sokhotski_pair(rhos, lam)


def cauchy_offaxis(rho: DensitySamples, z, tol=1e-6):
    """(1/2πi) ∫ ρ(t)/(t−z) dt for Im z ≠ 0.

    The value ρ(Re z) is subtracted and its integral taken in closed form.
    Panels are graded towards Re z down to scale |Im z|.
    """
    z = np.asarray(z, dtype=complex)
    flat = z.ravel()
    if np.any(flat.imag == 0):
        raise DomainError("cauchy_offaxis needs Im z ≠ 0")
    L = rho.grid.lambda_max
    g = rho.grid.points
    hmin = float(np.min(np.diff(g)))
    sh = (slice(None),) + (None,) * len(rho.shape)
    out = []
    for zz in flat:
        x0, eps = zz.real, abs(zz.imag)
        inside = -L < x0 < L
        extra = graded_points(x0, eps / 4, -L, L, top=8 * hmin) if (inside and eps < 8 * hmin) else ()
        if inside and eps < 1e-3 * hmin:
            warnings.warn(f"Im z = {zz.imag:.3g} is far below the grid resolution")
        rule = _cell_rule(rho, extra)
        t = rule.nodes
        rt = rho(t)
        if inside:
            r0 = rho(np.array([x0]))[0]
            f = (rt - r0) / (t - zz)[sh]
            val = np.sum(f * rule.weights[sh], axis=0) + r0 * (np.log(L - zz) - np.log(-L - zz))
        else:
            val = np.sum(rt / (t - zz)[sh] * rule.weights[sh], axis=0)
        out.append(val)
    res = np.asarray(out).reshape(z.shape + rho.shape) + _tails(rho, flat).reshape(z.shape + rho.shape)
    if not np.all(np.isfinite(res)):
        raise AccuracyError("off-axis Cauchy integral did not converge", math.inf)
    return res / (2j * math.pi)


def richardson_boundary(rho: DensitySamples, lam, eps=(1e-2, 1e-3), side=+1):
    """Linear Richardson extrapolation of cauchy_offaxis(λ ± iε) to ε → 0."""
    e1, e2 = eps
    f1 = cauchy_offaxis(rho, lam + side * 1j * e1)
    f2 = cauchy_offaxis(rho, lam + side * 1j * e2)
    return (e1 * f2 - e2 * f1) / (e1 - e2)


def dump_integrand(rho: DensitySamples, lam, path):
    """Write t, Re, Im of (ρ(t)−ρ(λ))/(t−λ) for debugging a PV evaluation."""
    rule = _cell_rule(rho)
    t = rule.nodes
    val = (rho(t) - rho(np.array([lam]))[0]) / (t - lam)
    val = np.asarray(val, dtype=complex).reshape(t.size, -1)[:, 0]
    np.savetxt(path, np.column_stack([t, val.real, val.imag]), delimiter=",",
               header="t,re,im", comments="", fmt="%.12e")
