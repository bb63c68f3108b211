"""Gauss-Legendre panel rules and the even-kernel principal value helper.

All reductions go through ``np.sum`` on a fixed axis so that results do not
depend on BLAS threading.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MU_FAR = 1.0e12  # upper cut of every half-line spectral rule
CHUNK = 128


@lru_cache(maxsize=None)
def gauss_legendre(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@dataclass(frozen=True)
class QuadRule:
    nodes: np.ndarray
    weights: np.ndarray
    lo: float
    hi: float

    def integrate(self, values, axis=-1):
        values = np.asarray(values)
        shape = [1] * values.ndim
        shape[axis] = -1
        return np.sum(values * self.weights.reshape(shape), axis=axis)

    def __len__(self):
        return self.nodes.size


def panel_rule(breaks, order: int = 16) -> QuadRule:
    b = np.unique(np.asarray(breaks, dtype=float))
    x, w = gauss_legendre(order)
    a, c = b[:-1], b[1:]
    half = 0.5 * (c - a)
    mid = 0.5 * (c + a)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return QuadRule(nodes, weights, float(b[0]), float(b[-1]))


def graded_points(center, scale, lo, hi, top=1.0, ratio=2.0):
    """Breakpoints clustering geometrically at ``center`` down to ``scale``."""
    pts = [center]
    d = max(scale, 1e-14)
    while d < top:
        pts.extend((center - d, center + d))
        d *= ratio
    pts = np.asarray(pts)
    return pts[(pts > lo) & (pts < hi)]


def halfline_breaks(fine=1.0, near=64.0, far=MU_FAR):
    """Breakpoints for [0, far): graded at 0, uniform up to ``near``, geometric after."""
    head = [0.0] + [2.0 ** -j for j in range(12, 0, -1)]
    body = list(np.arange(1.0, near + 0.5 * fine, fine))
    tail = []
    t = near
    while t < far:
        t *= 2.0
        tail.append(min(t, far))
    return np.asarray(head + body + tail)


def pv_even(num_nodes, rule: QuadRule, lam, num_at_lam):
    """PV of  ∫_rule num(μ)/(μ²−λ²) dμ  for real λ ≥ 0.

    Singularity subtraction at μ=λ when λ lies inside the rule interval; the
    subtracted part is integrated in closed form.  ``num_at_lam`` must hold
    num(λ) for each λ (ignored outside the interval).
    """
    lam = np.abs(np.asarray(lam, dtype=float))
    num_nodes = np.asarray(num_nodes)
    num_at_lam = np.asarray(num_at_lam)
    lo, hi = rule.lo, rule.hi
    mu2 = rule.nodes ** 2
    dtype = np.result_type(num_nodes, num_at_lam, float)
    out = np.empty(lam.shape, dtype=dtype)
    for i0 in range(0, lam.size, CHUNK):
        L = lam[i0:i0 + CHUNK]
        inside = (L > lo) & (L < hi)
        sub = np.where(inside, num_at_lam[i0:i0 + CHUNK], 0.0)
        den = mu2[None, :] - (L ** 2)[:, None]
        with np.errstate(divide="ignore", invalid="ignore"):
            f = (num_nodes[None, :] - sub[:, None]) / den
        f[~np.isfinite(f)] = 0.0
        s = np.sum(f * rule.weights[None, :], axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            logt = (np.log(np.abs(hi - L)) - np.log(hi + L)
                    - np.log(np.abs(L - lo)) + np.log(lo + L)) / (2.0 * L)
        s = s + np.where(inside, sub * np.where(inside, logt, 0.0), 0.0)
        out[i0:i0 + CHUNK] = s
    return out
