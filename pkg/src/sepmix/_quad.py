"""Fixed quadrature rules shared by the expected-loss formulas.

Every expected loss in this package reduces to one-dimensional integrals of
the logistic loss along an affine slice of a standard normal, so a single
moment engine serves all of them.  :func:`logistic_gaussian_moments` returns,
for a batch of ``(mean, sigma)`` rows, the five moments needed for values,
gradients, and Hessians:

    E[l(m + s Z)],  E[l'(m + s Z)],  E[l''(m + s Z)],
    E[Z l''(m + s Z)],  E[(Z^2 - 1) l''(m + s Z)],    Z ~ N(0, 1).

Gauss-Hermite handles small ``sigma`` directly.  For larger ``sigma`` the
integrand develops a feature of width ``1/sigma`` (the logistic transition
crossing the window) that Hermite nodes cannot resolve, so those rows fall
back to composite Gauss-Legendre panels on ``[-13, 13]`` with extra panel
edges packed dyadically around the crossing point.

:func:`lambda_rule` builds nodes and weights for averaging over a mixing
coefficient on ``[0, 1]``: Gauss-Legendre against the law's density, split at
``1/2`` because most integrands of interest (``min(lam, 1 - lam)``,
``|2 g(lam) - 1|``) kink there.  The weights are renormalized to unit total
so convex-combination identities survive quadrature exactly.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from numpy.polynomial.legendre import leggauss

from .losses import (
    LambdaLaw,
    PointMassLaw,
    logistic_d1,
    logistic_d2,
    logistic_loss,
)

_SQRT_2PI = math.sqrt(2.0 * math.pi)

# Truncation window for the panel path.  The normal density at 13 is below
# 1e-37, so the discarded tails are invisible at double precision even after
# multiplication by the (at most linearly growing) logistic loss.
_WINDOW = 13.0

# Dyadic ladder half-widths around the logistic crossing, in units of the
# transition width 1/sigma: 1, 2, 4, ..., 64.  Beyond 64 transition widths
# the second-derivative factors are below e^-64.
_LADDER = 2.0 ** np.arange(7)

_INTEGER_EDGES = np.arange(-_WINDOW, _WINDOW + 1.0)


class LogisticMoments(NamedTuple):
    """Batched Gaussian moments of the logistic loss and its derivatives."""

    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray
    z_d2: np.ndarray
    zz_d2: np.ndarray


@lru_cache(maxsize=8)
def _hermite_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = hermegauss(n)
    return nodes, weights / _SQRT_2PI


@lru_cache(maxsize=8)
def _legendre_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    return leggauss(n)


def _longsum(a: np.ndarray) -> np.ndarray:
    # Accumulate in extended precision; panel weights span ~40 orders of
    # magnitude and plain float64 summation loses digits at the bottom.
    return np.sum(a, axis=-1, dtype=np.longdouble).astype(np.float64)


def _accumulate(u: np.ndarray, z: np.ndarray, w: np.ndarray) -> LogisticMoments:
    lv = logistic_loss(u)
    d1 = logistic_d1(u)
    d2 = logistic_d2(u)
    wd2 = w * d2
    return LogisticMoments(
        value=_longsum(w * lv),
        d1=_longsum(w * d1),
        d2=_longsum(wd2),
        z_d2=_longsum(z * wd2),
        zz_d2=_longsum((z * z - 1.0) * wd2),
    )


def _hermite_moments(m: np.ndarray, s: np.ndarray, n_hermite: int) -> LogisticMoments:
    z, w = _hermite_rule(n_hermite)
    u = m[:, None] + s[:, None] * z
    return _accumulate(u, np.broadcast_to(z, u.shape), np.broadcast_to(w, u.shape))


def _panel_moments(m: np.ndarray, s: np.ndarray, n_hermite: int) -> LogisticMoments:
    order = max(8, round(12 * n_hermite / 80))
    x, wx = _legendre_rule(order)

    edge_rows = []
    for mi, si in zip(m, s):
        z0 = -mi / si
        extra = np.concatenate(([z0], z0 + _LADDER / si, z0 - _LADDER / si))
        extra = extra[(extra > -_WINDOW) & (extra < _WINDOW)]
        edge_rows.append(np.unique(np.concatenate((_INTEGER_EDGES, extra))))

    rows = len(edge_rows)
    panels = max(e.size - 1 for e in edge_rows)
    centers = np.zeros((rows, panels))
    halves = np.zeros((rows, panels))
    for i, e in enumerate(edge_rows):
        k = e.size - 1
        centers[i, :k] = 0.5 * (e[1:] + e[:-1])
        halves[i, :k] = 0.5 * (e[1:] - e[:-1])

    # Padded panels keep half-width 0, so their weights vanish and the node
    # location is irrelevant.
    z = centers[:, :, None] + halves[:, :, None] * x
    w = halves[:, :, None] * wx * (np.exp(-0.5 * z * z) / _SQRT_2PI)
    z = z.reshape(rows, -1)
    w = w.reshape(rows, -1)
    u = m[:, None] + s[:, None] * z
    return _accumulate(u, z, w)


def logistic_gaussian_moments(
    mean: np.ndarray | float,
    sigma: np.ndarray | float,
    n_hermite: int = 80,
) -> LogisticMoments:
    """Moments of the logistic loss at ``m + sigma Z`` for each input row.

    ``mean`` and ``sigma`` broadcast against each other; the returned arrays
    carry the broadcast shape.  ``sigma`` must be nonnegative; rows with
    ``sigma == 0`` are evaluated pointwise (the two ``Z``-weighted moments
    are exactly zero there).
    """
    m, s = np.broadcast_arrays(np.asarray(mean, float), np.asarray(sigma, float))
    shape = m.shape
    m = np.ravel(m)
    s = np.ravel(s)
    if not (np.all(np.isfinite(m)) and np.all(np.isfinite(s))):
        raise ValueError("mean and sigma must be finite")
    if np.any(s < 0):
        raise ValueError("sigma must be nonnegative")

    out = [np.empty_like(m) for _ in range(5)]
    # Hermite nodes resolve features down to their central spacing, about
    # pi / sqrt(n); the integrand's transition has width 1/sigma, and the
    # measured error stays at machine precision up to sigma = 1.5 for the
    # default 80-node rule.  The sqrt scaling preserves that margin when the
    # budget changes.
    point = s == 0.0
    hermite = ~point & (s <= 1.5 * math.sqrt(n_hermite / 80.0))
    panel = ~point & ~hermite

    if np.any(point):
        mp = m[point]
        parts = (logistic_loss(mp), logistic_d1(mp), logistic_d2(mp), 0.0, 0.0)
        for dst, src in zip(out, parts):
            dst[point] = src
    if np.any(hermite):
        got = _hermite_moments(m[hermite], s[hermite], n_hermite)
        for dst, src in zip(out, got):
            dst[hermite] = src
    if np.any(panel):
        got = _panel_moments(m[panel], s[panel], n_hermite)
        for dst, src in zip(out, got):
            dst[panel] = src

    return LogisticMoments(*(a.reshape(shape) for a in out))


def lambda_rule(law: LambdaLaw, unit_nodes: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights averaging a function of ``lam`` against ``law``.

    The weights are normalized to sum to exactly 1, so integrating the
    constant 1 is exact and downstream convex-combination identities hold to
    machine precision.  A point mass yields a single unit-weight node.  All
    nodes are interior, so densities that blow up at the endpoints (Beta with
    ``alpha < 1``) still produce finite weights; the renormalization absorbs
    the truncated endpoint mass.
    """
    if unit_nodes < 2:
        raise ValueError("unit_nodes must be at least 2")
    if isinstance(law, PointMassLaw):
        return np.array([law.value]), np.array([1.0])

    half = max(unit_nodes // 2, 8)
    x, v = _legendre_rule(half)
    t = np.concatenate((0.25 * (x + 1.0), 0.25 * (x + 3.0)))
    w = 0.25 * np.concatenate((v, v)) * law.density(t)
    if not np.all(np.isfinite(w)):
        raise ValueError("law density produced non-finite quadrature weights")

    total = float(np.sum(w, dtype=np.longdouble))
    if not math.isfinite(total) or total <= 0:
        raise ValueError("law density produced a non-normalizable rule")
    return t, w / total
