"""Half-line kernels v_k and their λ- and y-domain transforms.

Catalog kernels
---------------
exp_decay(a)     v(x) = √(2a)·e^(−ax)
band_bump(a, b)  v is the inverse sine transform of a smooth bump on (a, b)
sampled(x, v)    piecewise-linear data, zero past the last node

Every kernel is real valued and exposes its sine and cosine transforms

    ŝ(μ) = ∫ sin(μx) v(x) dx,     ĉ(μ) = ∫ cos(μx) v(x) dx,

so that ṽ(λ) = ĉ(λ) − iŝ(λ) on the real line.  Quantities that involve two
kernels (Φ_{s,k}, resolvent inner products, bound-state matrices) are then
evaluated by μ-quadrature using v(x) = (2/π)∫ŝ(μ) sin(μx) dμ.  Band-limited
kernels decay too slowly in x for direct x-quadrature to be practical, while
their μ-integrals are over a compact interval.

Conventions
-----------
f*(λ) = conj f(conj λ).  Arrays over a SpectralGrid are computed on λ ≥ 0
and mirrored, which makes parity relations hold exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import sici

from .errors import AccuracyError, DataError, DomainError
from .quadrature import (CHUNK, QuadRule, graded_points, halfline_breaks,
                         panel_rule, pv_even)

TWO_PI = 2.0 / math.pi
IM_TOL = 1e-12  # admissible positive imaginary part for lower half-plane args


# ---------------------------------------------------------------------------
# grid

@dataclass(frozen=True)
class SpectralGrid:
    """Symmetric, strictly increasing λ-grid containing 0."""

    points: np.ndarray
    lambda_max: float
    refined: tuple = ()

    def __post_init__(self):
        p = np.asarray(self.points, dtype=float)
        if p.ndim != 1 or p.size < 3:
            raise DomainError("grid needs at least three points")
        if np.any(np.diff(p) <= 0):
            raise DomainError("grid must be strictly increasing")
        if np.max(np.abs(p + p[::-1])) > 1e-12 * max(1.0, abs(p[-1])):
            raise DomainError("grid must be symmetric under λ → −λ")
        if p.size % 2 == 0:
            raise DomainError("symmetric grid must contain 0")
        p = 0.5 * (p - p[::-1])  # exact symmetry
        p[p.size // 2] = 0.0
        p.setflags(write=False)
        object.__setattr__(self, "points", p)

    @property
    def size(self):
        return self.points.size

    @property
    def zero_index(self):
        return self.points.size // 2

    @property
    def half(self):
        """Points with λ ≥ 0."""
        return self.points[self.zero_index:]

    def mirror(self, half_values, parity="conj"):
        """Extend samples on λ ≥ 0 to the full grid.

        parity: 'even', 'odd' or 'conj' (f(−λ) = conj f(λ)).
        """
        h = np.asarray(half_values)
        tail = h[1:][::-1]
        if parity == "even":
            neg = tail
        elif parity == "odd":
            neg = -tail
        elif parity == "conj":
            neg = np.conj(tail)
        else:
            raise ValueError(parity)
        return np.concatenate([neg, h], axis=0)

    def index_of(self, lam, tol=1e-12):
        i = int(np.argmin(np.abs(self.points - lam)))
        if abs(self.points[i] - lam) > tol * max(1.0, abs(lam)):
            return None
        return i


def make_grid(lambda_max: float = 50.0, n_points: int = 2000, refine: Sequence[float] = ()):
    """Uniform symmetric grid with ``n_points`` intervals (0 included).

    ``refine`` lists positive abscissae near which extra points are inserted.
    """
    if not lambda_max > 0:
        raise DomainError("lambda_max must be positive")
    if n_points < 64 or n_points % 2:
        raise DomainError("point count must be even and at least 64")
    pts = np.linspace(-lambda_max, lambda_max, n_points + 1)
    h = pts[1] - pts[0]
    extra = []
    for z in refine:
        z = abs(float(z))
        for d in (h / 8, h / 4, h / 2):
            for q in (z - d, z + d):
                if 0 < q < lambda_max:
                    extra.extend((q, -q))
    if extra:
        pts = np.unique(np.concatenate([pts, extra]))
    return SpectralGrid(pts, float(lambda_max), tuple(sorted(abs(float(z)) for z in refine)))


# ---------------------------------------------------------------------------
# kernels

def _bump(u):
    out = np.zeros_like(u, dtype=float)
    m = (u > 0) & (u < 1)
    uu = u[m]
    out[m] = np.exp(1.0 - 1.0 / (4.0 * uu * (1.0 - uu)))
    return out


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("v(x) is defined for x ≥ 0 only")
    return x


def _check_lower(lam):
    lam = np.asarray(lam, dtype=complex)
    if np.any(lam.imag > IM_TOL):
        raise DomainError("transform needs Im λ ≤ 0")
    return lam


class HalfLineFunction:
    """A real kernel v on [0, ∞).

    Attributes: ``kind``, ``params``, ``x_max`` (truncation radius) and
    ``decay_bound`` (C with |v(x)| ≤ C(1+x)^−2 past x_max).
    """

    kind = "abstract"

    def __init__(self, params, amplitude=1.0):
        self.params = dict(params)
        self.amplitude = float(amplitude)

    # -- spectral description -------------------------------------------------
    def spectral_support(self):
        return 0.0, math.inf

    def spectral_breaks(self):
        return halfline_breaks()

    def sine(self, mu):
        raise NotImplementedError

    def cosine(self, mu):
        raise NotImplementedError

    def vtilde(self, lam):
        """ṽ(λ) = ∫ e^(−iλx) v(x) dx for Im λ ≤ 0."""
        lam = _check_lower(lam)
        out = np.empty(lam.shape, dtype=complex)
        real = np.abs(lam.imag) <= IM_TOL
        r = lam.real[real]
        out[real] = self.cosine(np.abs(r)) - 1j * np.sign(r) * self.sine(np.abs(r))
        if np.any(~real):
            out[~real] = self._vtilde_complex(lam[~real])
        return out

    def _vtilde_complex(self, lam):
        # (2/π)∫ ŝ(μ) μ/(μ²−λ²) dμ, valid for Im λ < 0
        res = np.empty(lam.shape, dtype=complex)
        for i, L in enumerate(lam.ravel()):
            rule = spectral_rule([self], focus=L)
            s = self.sine(rule.nodes)
            res.flat[i] = TWO_PI * rule.integrate(s * rule.nodes / (rule.nodes ** 2 - L ** 2))
        return res

    def v(self, x):
        raise NotImplementedError

    def moment1(self):
        """∫ x v(x) dx, the slope of ŝ at 0."""
        raise NotImplementedError

    def norm(self):
        rule = spectral_rule([self])
        return math.sqrt(TWO_PI * float(rule.integrate(self.sine(rule.nodes) ** 2)))

    def scaled(self, factor):
        raise NotImplementedError

    def to_record(self):
        rec = {"kind": self.kind}
        rec.update(self.params)
        if self.amplitude != 1.0:
            rec["amplitude"] = self.amplitude
        return rec

    def __repr__(self):
        body = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        if self.amplitude != 1.0:
            body += f", amplitude={self.amplitude!r}"
        return f"{self.kind}({body})"


class ExpDecay(HalfLineFunction):
    kind = "exp_decay"

    def __init__(self, a, amplitude=1.0):
        a = float(a)
        if not a > 0:
            raise DomainError("exp_decay needs a > 0")
        super().__init__({"a": a}, amplitude)
        self.a = a
        self.c = amplitude * math.sqrt(2 * a)
        self.x_max = 40.0 / a
        self.decay_bound = abs(self.c) * math.exp(-a * self.x_max) * (1 + self.x_max) ** 2

    def v(self, x):
        x = _check_x(x)
        return self.c * np.exp(-self.a * x)

    def sine(self, mu):
        mu = np.asarray(mu, dtype=float)
        return self.c * mu / (self.a ** 2 + mu ** 2)

    def cosine(self, mu):
        mu = np.asarray(mu, dtype=float)
        return self.c * self.a / (self.a ** 2 + mu ** 2)

    def _vtilde_complex(self, lam):
        return self.c / (self.a + 1j * lam)

    def moment1(self):
        return self.c / self.a ** 2

    def norm(self):
        return abs(self.amplitude)

    def scaled(self, factor):
        return ExpDecay(self.a, self.amplitude * factor)


class BandBump(HalfLineFunction):
    """Kernel whose sine transform is the bump c·exp(1 − 1/(4u(1−u))), u=(μ−a)/(b−a)."""

    kind = "band_bump"
    PANELS = 16

    def __init__(self, a, b, amplitude=1.0):
        a, b = float(a), float(b)
        if not 0 < a < b:
            raise DomainError("band_bump needs 0 < a < b")
        super().__init__({"a": a, "b": b}, amplitude)
        self.a, self.b = a, b
        self.rule = panel_rule(np.linspace(a, b, self.PANELS + 1))
        shape = _bump((self.rule.nodes - a) / (b - a))
        self.c = 1.0 / math.sqrt(TWO_PI * float(self.rule.integrate(shape ** 2)))
        self.c *= amplitude
        self._s_nodes = self.c * shape
        # separate layout for the Hilbert integral so that it never samples its
        # own singular node when ĉ is wanted on self.rule
        self._hrule = panel_rule(np.linspace(a, b, 2 * self.PANELS + 3), 20)
        self._h_num = self.sine(self._hrule.nodes) * self._hrule.nodes
        self.x_max = 600.0 / (b - a)
        self._decay = None

    @property
    def decay_bound(self):
        if self._decay is None:
            xs = np.linspace(self.x_max, 1.5 * self.x_max, 4001)
            self._decay = float(np.max(np.abs(self.v(xs)) * (1 + xs) ** 2))
        return self._decay

    def spectral_support(self):
        return self.a, self.b

    def spectral_breaks(self):
        # graded away from both edges: integrands that are smooth inside the
        # band but analytic with a nearby pole outside it need short panels there
        h = (self.b - self.a) / self.PANELS
        d = h * 2.0 ** np.arange(0, 12)
        out = np.concatenate([np.linspace(self.a, self.b, self.PANELS + 1),
                              self.b + d, self.a - d[self.a - d > 0]])
        return np.sort(out)

    def sine(self, mu):
        mu = np.asarray(mu, dtype=float)
        return np.sign(mu) * self.c * _bump((np.abs(mu) - self.a) / (self.b - self.a))

    def cosine(self, mu):
        # ĉ(μ) = (2/π) PV∫ ŝ(ν) ν/(ν²−μ²) dν
        mu = np.asarray(mu, dtype=float)
        flat = np.abs(mu.ravel())
        at = self.sine(flat) * flat
        return (TWO_PI * pv_even(self._h_num, self._hrule, flat, at)).reshape(mu.shape)

    def v(self, x):
        x = _check_x(x)
        flat = x.ravel()
        xm = float(flat.max()) if flat.size else 0.0
        panels = max(self.PANELS, int(math.ceil((self.b - self.a) * xm / math.pi)) + 1)
        rule = panel_rule(np.linspace(self.a, self.b, panels + 1))
        s = self.sine(rule.nodes) * rule.weights
        out = np.empty(flat.shape)
        for i0 in range(0, flat.size, CHUNK):
            blk = np.sin(np.outer(flat[i0:i0 + CHUNK], rule.nodes))
            out[i0:i0 + CHUNK] = np.sum(blk * s[None, :], axis=1)
        return (TWO_PI * out).reshape(x.shape)

    def moment1(self):
        return 0.0

    def norm(self):
        return abs(self.amplitude)

    def scaled(self, factor):
        return BandBump(self.a, self.b, self.amplitude * factor)


def _linear_fourier(x, v, lam):
    """∫ e^(−iλx) v(x) dx for the piecewise-linear interpolant of (x, v)."""
    lam = np.asarray(lam, dtype=complex)
    flat = lam.ravel()
    h = np.diff(x)
    x0 = x[:-1]
    v0, v1 = v[:-1], v[1:]
    out = np.empty(flat.shape, dtype=complex)
    for i0 in range(0, flat.size, 64):
        L = flat[i0:i0 + 64][:, None]
        th = L * h[None, :]
        small = np.abs(th) < 1e-3
        e = np.exp(-1j * th)
        with np.errstate(divide="ignore", invalid="ignore"):
            c0 = np.where(small, 1 - 1j * th / 2 - th ** 2 / 6 + 1j * th ** 3 / 24,
                          (1 - e) / (1j * th))
            b = np.where(small, 0.5 - 1j * th / 3 - th ** 2 / 8 + 1j * th ** 3 / 30,
                         (e * (1 + 1j * th) - 1) / th ** 2)
        a = c0 - b
        seg = h[None, :] * np.exp(-1j * L * x0[None, :]) * (v0[None, :] * a + v1[None, :] * b)
        out[i0:i0 + 64] = np.sum(seg, axis=1)
    return out.reshape(lam.shape)


class Sampled(HalfLineFunction):
    """Tabulated kernel, linear between nodes and zero past the last one."""

    kind = "sampled"

    def __init__(self, x, values, decay_bound=0.0, amplitude=1.0):
        x = np.asarray(x, dtype=float)
        values = np.asarray(values)
        if np.iscomplexobj(values):
            if np.max(np.abs(values.imag)) > 0:
                raise DataError("only real kernels are supported")
            values = values.real
        values = np.asarray(values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or x.size < 2:
            raise DataError("sampled kernel needs matching 1-D x and value arrays")
        if abs(x[0]) > 0 or np.any(np.diff(x) <= 0):
            raise DataError("sample abscissae must start at 0 and increase")
        if not np.all(np.isfinite(values)):
            raise DataError("non-finite kernel samples")
        super().__init__({"n": int(x.size)}, amplitude)
        self.x = x
        self.values = values * amplitude
        self.x_max = float(x[-1])
        self.decay_bound = float(decay_bound)

    def v(self, x):
        x = _check_x(x)
        return np.interp(x, self.x, self.values, right=0.0)

    def spectral_breaks(self):
        fine = min(1.0, 2.0 / max(self.x_max, 1.0))
        return halfline_breaks(fine=fine)

    def vtilde(self, lam):
        lam = _check_lower(lam)
        return _linear_fourier(self.x, self.values, lam)

    def sine(self, mu):
        mu = np.asarray(mu, dtype=float)
        return -_linear_fourier(self.x, self.values, mu).imag

    def cosine(self, mu):
        mu = np.asarray(mu, dtype=float)
        return _linear_fourier(self.x, self.values, mu).real

    def moment1(self):
        x0, x1 = self.x[:-1], self.x[1:]
        v0, v1 = self.values[:-1], self.values[1:]
        return float(np.sum((x1 - x0) / 6 * (x0 * (2 * v0 + v1) + x1 * (v0 + 2 * v1))))

    def norm(self):
        h = np.diff(self.x)
        v0, v1 = self.values[:-1], self.values[1:]
        return math.sqrt(float(np.sum(h * (v0 * v0 + v0 * v1 + v1 * v1) / 3)))

    def scaled(self, factor):
        return Sampled(self.x, self.values * factor, self.decay_bound * abs(factor))

    def to_record(self):
        return {"kind": self.kind, "n": int(self.x.size), "x_max": self.x_max}


def exp_decay(a=1.0, amplitude=1.0):
    return ExpDecay(a, amplitude)


def band_bump(a, b, amplitude=1.0):
    return BandBump(a, b, amplitude)


def sampled(x, values, decay_bound=0.0):
    return Sampled(x, values, decay_bound)


def from_record(rec: dict) -> HalfLineFunction:
    """Build a catalog kernel from a ``{kind: ..., ...}`` record."""
    rec = dict(rec)
    kind = rec.pop("kind", None)
    amp = float(rec.pop("amplitude", 1.0))
    if kind == "exp_decay":
        return ExpDecay(rec.get("a", 1.0), amp)
    if kind == "band_bump":
        return BandBump(rec["a"], rec["b"], amp)
    if kind == "sampled":
        if "x" in rec and "values" in rec:
            return Sampled(rec["x"], np.asarray(rec["values"]) * amp, rec.get("decay_bound", 0.0))
        raise DataError("sampled record needs x and values")
    raise DataError(f"unknown catalog kind {kind!r}")


# ---------------------------------------------------------------------------
# potential

@dataclass
class SeparablePotential:
    """Ordered terms (α_k, v_k)."""

    terms: list = field(default_factory=list)

    def __post_init__(self):
        self.terms = [(float(a), f) for a, f in self.terms]
        for a, _ in self.terms:
            if a == 0:
                raise DomainError("coupling must be nonzero")

    @property
    def n(self):
        return len(self.terms)

    @property
    def alphas(self):
        return np.array([a for a, _ in self.terms])

    @property
    def funcs(self):
        return [f for _, f in self.terms]

    @property
    def n_minus(self):
        return int(np.sum(self.alphas < 0))

    def gram(self):
        fs = self.funcs
        G = np.empty((self.n, self.n))
        for i in range(self.n):
            for j in range(i, self.n):
                rule = spectral_rule([fs[i], fs[j]])
                G[i, j] = G[j, i] = TWO_PI * rule.integrate(fs[i].sine(rule.nodes) * fs[j].sine(rule.nodes))
        return G

    def validate(self, norm_tol=1e-8, gram_tol=1e-10):
        problems = []
        for k, f in enumerate(self.funcs):
            nv = f.norm()
            if abs(nv - 1.0) > norm_tol:
                problems.append(f"term {k}: ‖v‖ = {nv:.12g}")
        if self.n > 1:
            ev = np.linalg.eigvalsh(self.gram())
            if ev[0] <= gram_tol:
                problems.append(f"kernels linearly dependent (Gram eigenvalue {ev[0]:.3g})")
        return problems

    def normalized(self):
        """Rescale v_k → v_k/‖v_k‖ and α_k → α_k‖v_k‖², which leaves the operator unchanged."""
        out = []
        for a, f in self.terms:
            nv = f.norm()
            if nv == 0:
                raise DataError("zero kernel")
            out.append((a * nv * nv, f.scaled(1.0 / nv)))
        return SeparablePotential(out)


# ---------------------------------------------------------------------------
# spectral quadrature

def spectral_rule(funcs, focus=None, order=16, also=()) -> QuadRule:
    """μ-rule over the common spectral support of ``funcs``.

    Breakpoints of the kernels in ``also`` are merged in so that their
    features are resolved as well.

    ``focus`` (complex or real λ) adds panels graded towards |Re λ| with
    scale |Im λ| to resolve a nearby pole of 1/(μ²−λ²).
    """
    lo, hi = 0.0, math.inf
    for f in funcs:
        a, b = f.spectral_support()
        lo, hi = max(lo, a), min(hi, b)
    if hi <= lo:
        return QuadRule(np.zeros(0), np.zeros(0), lo, lo)
    if math.isinf(hi):
        fine = [f for f in funcs if math.isinf(f.spectral_support()[1])]
        breaks = np.concatenate([f.spectral_breaks() for f in fine])
        breaks = breaks[breaks >= lo]
        if lo > 0:
            breaks = np.append(breaks, lo)
    else:
        breaks = np.concatenate([np.linspace(lo, hi, BandBump.PANELS + 1)]
                                + [f.spectral_breaks() for f in funcs])
        breaks = breaks[(breaks >= lo) & (breaks <= hi)]
    for f in also:
        fb = f.spectral_breaks()
        breaks = np.concatenate([breaks, fb[(fb > lo) & (fb < hi)]])
    top = breaks.max()
    if focus is not None:
        c = abs(complex(focus).real)
        sc = abs(complex(focus).imag)
        if lo < c < top:
            breaks = np.concatenate([breaks, graded_points(c, max(sc / 4, 1e-6), lo, top)])
    return panel_rule(breaks, order)


def Phi_pair(fs, fk, lam):
    """Φ_{s,k}(λ) = ∫ e^(−iλy) g_{s,k}(y) dy by μ-quadrature.

    For Im λ < 0:  (2/π)∫ ŝ_s(μ)[μĉ_k(μ) + iλŝ_k(μ)]/(μ²−λ²) dμ.
    For real λ ≥ 0 the boundary value from below is

        (2/π)[PV∫ A/(μ²−λ²) + iλ PV∫ B/(μ²−λ²)] + ŝ_s ŝ_k − i ŝ_s ĉ_k,

    with A = ŝ_s μ ĉ_k and B = ŝ_s ŝ_k, and real λ < 0 follows from
    Φ(−λ) = conj Φ(λ).
    """
    lam = _check_lower(lam)
    out = np.empty(lam.shape, dtype=complex)
    real = np.abs(lam.imag) <= IM_TOL
    if np.any(real):
        r = lam.real[real]
        half = _Phi_real(fs, fk, np.abs(r))
        out[real] = np.where(r < 0, np.conj(half), half)
    for idx in zip(*np.nonzero(~real)):
        L = lam[idx]
        rule = spectral_rule([fs], focus=L, also=[fk])
        mu = rule.nodes
        ss = fs.sine(mu)
        val = ss * (mu * fk.cosine(mu) + 1j * L * fk.sine(mu)) / (mu * mu - L * L)
        out[idx] = TWO_PI * rule.integrate(val)
    return out


def _Phi_real(fs, fk, lam):
    rule = spectral_rule([fs], also=[fk])
    mu = rule.nodes
    ss = fs.sine(mu)
    A = ss * mu * fk.cosine(mu)
    B = ss * fk.sine(mu)
    sl, cl, kl = fs.sine(lam), fk.cosine(lam), fk.sine(lam)
    PA = pv_even(A, rule, lam, sl * lam * cl)
    PB = pv_even(B, rule, lam, sl * kl)
    return TWO_PI * (PA + 1j * lam * PB) + sl * kl - 1j * sl * cl


def pv_product(fk, fs, lam):
    """(2/π) PV∫ ŝ_k(μ) ŝ_s(μ)/(μ²−λ²) dμ for real λ ≥ 0."""
    lam = np.abs(np.asarray(lam, dtype=float))
    rule = spectral_rule([fk, fs])
    if len(rule) == 0:
        return np.zeros(lam.shape)
    B = fk.sine(rule.nodes) * fs.sine(rule.nodes)
    return TWO_PI * pv_even(B, rule, lam, fk.sine(lam) * fs.sine(lam))


def resolvent_spectral(fk, fs, z):
    """⟨R₀(z)v_k, v_s⟩ = (2/π)∫ ŝ_k ŝ_s/(μ²−z) dμ for z off [0, ∞)."""
    z = complex(z)
    rule = spectral_rule([fk, fs], focus=np.sqrt(z))
    if len(rule) == 0:
        return 0j
    mu = rule.nodes
    return complex(TWO_PI * rule.integrate(fk.sine(mu) * fs.sine(mu) / (mu * mu - z)))


# ---------------------------------------------------------------------------
# operations on grids

def eval_v(f: HalfLineFunction, x):
    return f.v(x)


def fourier_vtilde(f: HalfLineFunction, grid: SpectralGrid):
    h = grid.half
    half = f.cosine(h) - 1j * f.sine(h)
    return grid.mirror(half, "conj")


def sine_W(f: HalfLineFunction, grid: SpectralGrid):
    """W(λ) = −2i∫sin(λx)v dx, odd on the grid by construction."""
    return grid.mirror(-2j * f.sine(grid.half), "odd")


def _x_rule(X, width=0.5):
    n = max(1, int(math.ceil(X / width)))
    return panel_rule(np.linspace(0.0, X, n + 1))


def cross_corr_g(fs: HalfLineFunction, fk: HalfLineFunction, y, return_tail=False):
    """g_{s,k}(y) = ∫ v_s(x+y) v_k(x) dx.

    Negative y use g_{s,k}(−y) = g_{k,s}(y) (real kernels, v = 0 on x < 0).
    """
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        neg = y < 0
        g = np.empty(y.shape)
        tail = 0.0
        if np.any(~neg):
            g[~neg], t1 = cross_corr_g(fs, fk, y[~neg], True)
            tail = max(tail, t1)
        g[neg], t2 = cross_corr_g(fk, fs, -y[neg], True)
        tail = max(tail, t2)
        return (g, tail) if return_tail else g
    y = _check_x(y)
    flat = y.ravel()
    lo, hi = fs.spectral_support()
    if math.isfinite(hi):
        ym = float(flat.max()) if flat.size else 0.0
        panels = max(BandBump.PANELS, int(math.ceil((hi - lo) * ym / math.pi)) + 1)
        rule = panel_rule(np.linspace(lo, hi, panels + 1))
        mu = rule.nodes
        ss = fs.sine(mu) * rule.weights
        ck, sk = fk.cosine(mu), fk.sine(mu)
        out = np.empty(flat.shape)
        for i0 in range(0, flat.size, CHUNK):
            yy = flat[i0:i0 + CHUNK][:, None]
            blk = np.sin(mu * yy) * ck + np.cos(mu * yy) * sk
            out[i0:i0 + CHUNK] = np.sum(blk * ss[None, :], axis=1)
        g = TWO_PI * out
        tail = 0.0
    else:
        X = fk.x_max
        rule = _x_rule(X)
        vk = fk.v(rule.nodes) * rule.weights
        out = np.empty(flat.shape)
        for i0 in range(0, flat.size, CHUNK):
            yy = flat[i0:i0 + CHUNK][:, None]
            out[i0:i0 + CHUNK] = np.sum(fs.v(rule.nodes[None, :] + yy) * vk[None, :], axis=1)
        g = out
        # |∫_X^∞ v_s(x+y) v_k(x)| ≤ sup|v_s| · C_k/(1+X)
        tail = float(np.max(np.abs(fs.v(np.linspace(0, fs.x_max, 257))))) * fk.decay_bound / (1 + X)
    g = g.reshape(y.shape)
    return (g, tail) if return_tail else g


def y_rule(fs: HalfLineFunction, width=0.5) -> QuadRule:
    """Quadrature rule on [0, x_max(v_s)], where g_{s,k} lives."""
    return _x_rule(fs.x_max, width)


def phi_Phi(g, rule: QuadRule, lam):
    """Φ(λ) = ∫ e^(−iλy) g(y) dy from samples of g on the nodes of ``rule``."""
    lam = _check_lower(lam)
    flat = lam.ravel()
    w = np.asarray(g) * rule.weights
    out = np.empty(flat.shape, dtype=complex)
    for i0 in range(0, flat.size, CHUNK):
        E = np.exp(-1j * np.outer(flat[i0:i0 + CHUNK], rule.nodes))
        out[i0:i0 + CHUNK] = np.sum(E * w[None, :], axis=1)
    return out.reshape(lam.shape)


def inverse_sine_recover_v(lam, Wabs, xgrid, tail=True):
    """Canonical kernel with nonnegative sine transform Wabs/2.

    v(x) = (2/π)∫₀^∞ sin(λx)·Wabs(λ)/2 dλ.  Samples for λ < 0 are ignored.
    Past the last sample the transform is continued by a power law fitted at
    the edge.  No renormalisation is applied.
    """
    lam = np.asarray(lam, dtype=float)
    Wabs = np.asarray(Wabs, dtype=float)
    keep = lam >= 0
    lam, Wabs = lam[keep], Wabs[keep]
    x = _check_x(xgrid)
    if lam.size < 4 or lam[0] != 0:
        raise DataError("need samples on [0, Λ] starting at 0")
    if np.any(Wabs < 0):
        raise DataError("|W| samples must be nonnegative")
    scale = max(float(np.max(Wabs)), 1e-300)
    if Wabs[0] > 1e-8 * scale:
        raise DataError("inconsistent data: |W(0)| must vanish")
    s = 0.5 * Wabs
    if np.max(s) == 0:
        return Sampled(x, np.zeros_like(x))
    spl = CubicSpline(lam, s)
    Lam = lam[-1]
    xm = float(x.max())
    width = min(4 * (lam[1] - lam[0]), math.pi / max(xm, 1e-9), 0.5)
    rule = panel_rule(np.linspace(0, Lam, int(math.ceil(Lam / width)) + 1))
    sw = spl(rule.nodes) * rule.weights
    out = np.empty(x.shape)
    for i0 in range(0, x.size, CHUNK):
        out[i0:i0 + CHUNK] = np.sum(np.sin(np.outer(x[i0:i0 + CHUNK], rule.nodes)) * sw[None, :], axis=1)
    if tail and s[-1] > 0:
        i9 = int(np.searchsorted(lam, 0.9 * Lam))
        p = -math.log(s[-1] / s[i9]) / math.log(Lam / lam[i9]) if s[i9] > 0 else 2.0
        C = s[-1] * Lam ** p
        if abs(p - 1) < 0.5:
            si, _ = sici(Lam * x)
            out += C / Lam ** (p - 1) * np.where(x > 0, math.pi / 2 - si, math.pi / 2)
        else:
            with np.errstate(divide="ignore", invalid="ignore"):
                out += np.where(x > 0, C * Lam ** (-p) * np.cos(Lam * x) / x, 0.0)
    return Sampled(x, TWO_PI * out)


# ---------------------------------------------------------------------------
# transform sets

@dataclass
class TransformSet:
    grid: SpectralGrid
    pot: SeparablePotential
    vtilde: np.ndarray          # (n, N)
    W: np.ndarray               # (n, N)
    Phi: np.ndarray             # (n, n, N), Phi[s, k] = Φ_{s,k}
    ygrid: np.ndarray | None = None
    g: np.ndarray | None = None  # (n, n, Ny), g[s, k]

    @property
    def n(self):
        return self.pot.n


def transform_set(pot: SeparablePotential, grid: SpectralGrid, ygrid=None) -> TransformSet:
    fs = pot.funcs
    n = pot.n
    N = grid.size
    vt = np.empty((n, N), dtype=complex)
    W = np.empty((n, N), dtype=complex)
    Phi = np.empty((n, n, N), dtype=complex)
    h = grid.half
    for k, f in enumerate(fs):
        vt[k] = fourier_vtilde(f, grid)
        W[k] = sine_W(f, grid)
    for s in range(n):
        for k in range(n):
            Phi[s, k] = grid.mirror(_Phi_real(fs[s], fs[k], h), "conj")
    g = None
    if ygrid is not None:
        ygrid = np.asarray(ygrid, dtype=float)
        g = np.empty((n, n, ygrid.size))
        for s in range(n):
            for k in range(n):
                g[s, k] = cross_corr_g(fs[s], fs[k], ygrid)
    return TransformSet(grid, pot, vt, W, Phi, ygrid, g)


def transform_identity_residual(fs, fk, lam):
    """max |Φ_{s,k}(λ) + Φ*_{k,s}(λ) − ṽ*_s(−λ) ṽ_k(−λ)| over real λ."""
    lam = np.asarray(lam, dtype=float)
    lhs = Phi_pair(fs, fk, lam) + np.conj(Phi_pair(fk, fs, lam))
    rhs = np.conj(fs.vtilde(-lam)) * fk.vtilde(-lam)
    return float(np.max(np.abs(lhs - rhs)))


def check_finite_moment(f: HalfLineFunction, X=None):
    """∫(1+x²)|v|² over [0, X] plus the decay-bound tail; raises if not finite."""
    X = f.x_max if X is None else X
    rule = _x_rule(X)
    val = float(rule.integrate((1 + rule.nodes ** 2) * f.v(rule.nodes) ** 2))
    tail = f.decay_bound ** 2 / (1 + X)
    if not np.isfinite(val) or tail > 1e-8 * max(val, 1.0):
        raise AccuracyError("weighted norm tail not controlled", tail)
    return val
