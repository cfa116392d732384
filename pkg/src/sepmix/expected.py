"""Population (expected) logistic losses under the Gaussian pair model.

These are the exact counterparts of the empirical objectives in
:mod:`sepmix.losses`: the sample average is replaced by its distributional
expectation, which collapses to a weighted sum of one-dimensional Gaussian
integrals because every mixed input is again Gaussian along ``w``.  Each
objective comes in value / gradient / Hessian form.  Gradients use the
Gaussian integration-by-parts identity ``E[Z f(m + s Z)] = s E[f'(m + s Z)]``
so that no term divides by ``||w||``; the formulas stay finite at ``w = 0``
and for the noiseless model (infinite concentration), where the integrals
degenerate to point evaluations.

The masked-mixing loss additionally needs the coefficient table
(:class:`MaskCoefficients`) enumerating the mask support with its mixture
weights; :func:`mask_coefficients` builds it by quadrature over the mixing
law, and :func:`expected_mask_mc` offers a Monte Carlo estimate when the
support is too large to enumerate.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._quad import lambda_rule, logistic_gaussian_moments
from .losses import (
    BernoulliMaskScheme,
    BetaLaw,
    ExplicitMaskScheme,
    MaskScheme,
    MixupScheme,
    _extended_sum,
    logistic_d1,
    logistic_d2,
    logistic_loss,
)
from .model import ProblemSpec, is_infinite

__all__ = [
    "QuadratureConfig",
    "MaskCoefficients",
    "expected_erm",
    "expected_erm_grad",
    "expected_erm_hess",
    "expected_mixup",
    "expected_mixup_grad",
    "expected_mixup_hess",
    "mask_coefficients",
    "expected_mask",
    "expected_mask_grad",
    "expected_mask_hess",
    "expected_mask_infty",
    "expected_mask_infty_grad",
    "expected_mask_infty_hess",
    "expected_mask_mc",
]

_ENUMERABLE_LIMIT = 1 << 16


@dataclass(frozen=True)
class QuadratureConfig:
    """Node budgets for the normal (Gauss-Hermite) and [0,1] integrals."""

    hermite_nodes: int = 80
    unit_nodes: int = 64

    def __post_init__(self):
        if self.hermite_nodes < 20:
            raise ValueError("hermite_nodes must be at least 20")
        if self.unit_nodes < 16:
            raise ValueError("unit_nodes must be at least 16")


_DEFAULT_QUAD = QuadratureConfig()


def _check_w(w, spec: ProblemSpec) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (spec.d,):
        raise ValueError(f"w has shape {w.shape}, expected ({spec.d},)")
    if not np.all(np.isfinite(w)):
        raise ValueError("w must be finite")
    return w


def _inv_kappa(spec: ProblemSpec) -> float:
    return 0.0 if is_infinite(spec.kappa) else 1.0 / spec.kappa


# ---------------------------------------------------------------------------
# Losses whose covariance is a scalar multiple of Sigma (plain and pairwise
# mixing).  Every row is l(c_i w'mu + sqrt(tsq_i) ||w||_Sigma Z), so values,
# gradients, and Hessians reduce to scalar combinations of mu, Sigma w, and
# their outer products.
# ---------------------------------------------------------------------------


def _scaled_rows_mixup(scheme: MixupScheme, n: int, inv_kappa: float, quad):
    lam, om = lambda_rule(scheme.lambda_law, quad.unit_nodes)
    g = np.asarray(scheme.g(lam), dtype=float)
    h = g * g + (1.0 - g) * (1.0 - g)
    e = 2.0 * g - 1.0
    pair = (n - 1) / (2.0 * n)
    c = np.concatenate((np.ones_like(lam), e, -e, [1.0]))
    tsq = inv_kappa * np.concatenate((h, h, h, [1.0]))
    wt = np.concatenate((pair * om, pair * om * lam, pair * om * (1.0 - lam), [1.0 / n]))
    return c, tsq, wt


def _scaled_value(w, spec, c, tsq, wt, quad) -> float:
    m = float(w @ spec.mu)
    r2 = float(w @ (spec.sigma @ w))
    r = math.sqrt(max(r2, 0.0))
    mom = logistic_gaussian_moments(c * m, np.sqrt(tsq) * r, quad.hermite_nodes)
    return _extended_sum(wt * mom.value)


def _scaled_grad(w, spec, c, tsq, wt, quad) -> np.ndarray:
    m = float(w @ spec.mu)
    sw = spec.sigma @ w
    r = math.sqrt(max(float(w @ sw), 0.0))
    mom = logistic_gaussian_moments(c * m, np.sqrt(tsq) * r, quad.hermite_nodes)
    coef_mu = _extended_sum(wt * c * mom.d1)
    coef_sw = _extended_sum(wt * tsq * mom.d2)
    return coef_mu * spec.mu + coef_sw * sw


def _scaled_hess(w, spec, c, tsq, wt, quad) -> np.ndarray:
    m = float(w @ spec.mu)
    sw = spec.sigma @ w
    r = math.sqrt(max(float(w @ sw), 0.0))
    t = np.sqrt(tsq)
    mom = logistic_gaussian_moments(c * m, t * r, quad.hermite_nodes)
    mu = spec.mu
    hess = _extended_sum(wt * c * c * mom.d2) * np.outer(mu, mu)
    hess += _extended_sum(wt * tsq * mom.d2) * spec.sigma
    if r > 0.0:
        q = sw / r
        hess += _extended_sum(wt * tsq * mom.zz_d2) * np.outer(q, q)
        cross = _extended_sum(wt * c * t * mom.z_d2)
        hess += cross * (np.outer(q, mu) + np.outer(mu, q))
    return hess


def expected_erm(w, spec: ProblemSpec, quad: QuadratureConfig | None = None) -> float:
    """E[l] of the plain logistic loss over a fresh sample at direction w."""
    quad = quad or _DEFAULT_QUAD
    w = _check_w(w, spec)
    one = np.array([1.0])
    return _scaled_value(w, spec, one, np.array([_inv_kappa(spec)]), one, quad)


def expected_erm_grad(w, spec: ProblemSpec, quad: QuadratureConfig | None = None) -> np.ndarray:
    quad = quad or _DEFAULT_QUAD
    w = _check_w(w, spec)
    one = np.array([1.0])
    return _scaled_grad(w, spec, one, np.array([_inv_kappa(spec)]), one, quad)


def expected_erm_hess(w, spec: ProblemSpec, quad: QuadratureConfig | None = None) -> np.ndarray:
    quad = quad or _DEFAULT_QUAD
    w = _check_w(w, spec)
    one = np.array([1.0])
    return _scaled_hess(w, spec, one, np.array([_inv_kappa(spec)]), one, quad)


def _mixup_prep(w, spec, scheme, n, quad, check_scheme):
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ValueError("n must be an integer >= 2")
    if check_scheme:
        scheme.require_valid()
    return _check_w(w, spec), _scaled_rows_mixup(scheme, int(n), _inv_kappa(spec), quad)


def expected_mixup(
    w,
    spec: ProblemSpec,
    scheme: MixupScheme,
    n: int,
    quad: QuadratureConfig | None = None,
    check_scheme: bool = True,
) -> float:
    """Expected pairwise-mixing loss for sample size ``n``.

    The value depends on ``n`` only through the ``(n-1)/2n`` pair weight and
    the ``1/n`` diagonal weight.  ``check_scheme=False`` skips the validity
    check, which the degenerate reductions in the tests rely on.
    """
    quad = quad or _DEFAULT_QUAD
    w, (c, tsq, wt) = _mixup_prep(w, spec, scheme, n, quad, check_scheme)
    return _scaled_value(w, spec, c, tsq, wt, quad)


def expected_mixup_grad(
    w,
    spec: ProblemSpec,
    scheme: MixupScheme,
    n: int,
    quad: QuadratureConfig | None = None,
    check_scheme: bool = True,
) -> np.ndarray:
    quad = quad or _DEFAULT_QUAD
    w, (c, tsq, wt) = _mixup_prep(w, spec, scheme, n, quad, check_scheme)
    return _scaled_grad(w, spec, c, tsq, wt, quad)


def expected_mixup_hess(
    w,
    spec: ProblemSpec,
    scheme: MixupScheme,
    n: int,
    quad: QuadratureConfig | None = None,
    check_scheme: bool = True,
) -> np.ndarray:
    quad = quad or _DEFAULT_QUAD
    w, (c, tsq, wt) = _mixup_prep(w, spec, scheme, n, quad, check_scheme)
    return _scaled_hess(w, spec, c, tsq, wt, quad)


# ---------------------------------------------------------------------------
# Masked mixing: coefficient algebra and the expected loss built on it.
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MaskCoefficients:
    """Mixture decomposition of the masked-mixing loss over the mask support.

    Row ``k`` carries the mask, its weights ``(a_k, b_k, c_k)`` satisfying
    ``a_k + b_k = c_k`` and ``sum(a + b + c) = 1``, and the signed mean
    ``mu_k = mu * (2 M_k - 1)``.  The per-mask covariance is materialized on
    demand by :meth:`sigma_k` since the full stack is rarely needed.
    """

    masks: np.ndarray
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    mu_k: np.ndarray

    def __post_init__(self):
        if np.any(self.a < 0) or np.any(self.b < 0) or np.any(self.c < 0):
            raise ValueError("mask coefficients must be nonnegative")
        if np.max(np.abs(self.a + self.b - self.c), initial=0.0) > 1e-12:
            raise ValueError("coefficient identity a_k + b_k = c_k violated")
        total = _extended_sum(self.a + self.b + self.c)
        if abs(total - 1.0) > 1e-10:
            raise ValueError(f"coefficients must sum to 1, got {total}")

    @property
    def p(self) -> int:
        return self.masks.shape[0]

    def sigma_k(self, k: int) -> np.ndarray:
        mk = self.masks[k]
        pattern = np.outer(mk, mk) + np.outer(1.0 - mk, 1.0 - mk)
        return self.sigma * pattern


def mask_coefficients(
    scheme: MaskScheme,
    spec: ProblemSpec,
    quad: QuadratureConfig | None = None,
) -> MaskCoefficients:
    """Enumerate the mask support and its mixture weights.

    Supports the Bernoulli scheme (all ``2^d`` masks, requiring ``d <= 16``)
    and explicit finite-support schemes.  Rejecting larger supports keeps
    this path exact; callers needing bigger mask spaces should estimate with
    :func:`expected_mask_mc` instead.
    """
    quad = quad or _DEFAULT_QUAD
    d = spec.d
    if isinstance(scheme, BernoulliMaskScheme):
        if d > 16:
            raise ValueError(
                f"Bernoulli mask support has 2^{d} masks, beyond the "
                f"enumerable limit 2^16; use expected_mask_mc for a Monte "
                f"Carlo estimate"
            )
        masks = np.array(list(itertools.product((0.0, 1.0), repeat=d)))
        lam, om = lambda_rule(BetaLaw(scheme.alpha), quad.unit_nodes)
        sizes = np.arange(d + 1)
        # P[M = M0 | lam] depends on the mask only through its popcount, so
        # integrate once per size and fan out.
        pmf = lam[None, :] ** sizes[:, None] * (1.0 - lam[None, :]) ** (d - sizes)[:, None]
        a_by_size = 0.5 * np.sum(pmf * (om * lam), axis=1, dtype=np.longdouble)
        b_by_size = 0.5 * np.sum(pmf * (om * (1.0 - lam)), axis=1, dtype=np.longdouble)
        c_by_size = 0.5 * np.sum(pmf * om, axis=1, dtype=np.longdouble)
        counts = masks.sum(axis=1).astype(int)
        a = a_by_size[counts].astype(float)
        b = b_by_size[counts].astype(float)
        c = c_by_size[counts].astype(float)
    elif isinstance(scheme, ExplicitMaskScheme):
        grouped: dict[tuple, list[float]] = {}
        for mask, law, prob in zip(scheme.masks, scheme.lambda_laws, scheme.probs):
            if len(mask) != d:
                raise ValueError(f"scheme masks have dimension {len(mask)}, spec has {d}")
            lam, om = lambda_rule(law, quad.unit_nodes)
            mean = float(np.sum(om * lam))
            acc = grouped.setdefault(tuple(mask), [0.0, 0.0, 0.0])
            acc[0] += 0.5 * prob * mean
            acc[1] += 0.5 * prob * (1.0 - mean)
            acc[2] += 0.5 * prob
        if len(grouped) > _ENUMERABLE_LIMIT:
            raise ValueError("mask support exceeds the enumerable limit 2^16")
        masks = np.array([m for m in grouped], dtype=float)
        abc = np.array([grouped[tuple(m)] for m in masks])
        a, b, c = abc[:, 0], abc[:, 1], abc[:, 2]
    else:
        raise TypeError(
            "mask coefficients need an enumerable scheme "
            "(BernoulliMaskScheme or ExplicitMaskScheme)"
        )
    mu_k = spec.mu[None, :] * (2.0 * masks - 1.0)
    return MaskCoefficients(
        masks=masks, a=a, b=b, c=c, mu=spec.mu.copy(), sigma=spec.sigma.copy(), mu_k=mu_k
    )


def _mask_sigma_w(masks: np.ndarray, sigma: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Rows ``Sigma_k w`` for all masks without materializing any Sigma_k.

    Uses ``(Sigma * (u v')) w = u * (Sigma (v * w))`` applied to the two
    rank-one blocks of the masking pattern.
    """
    kept = masks * w
    dropped = (1.0 - masks) * w
    return masks * (kept @ sigma) + (1.0 - masks) * (dropped @ sigma)


class _MaskRows:
    """Shared per-evaluation geometry for the masked expected loss."""

    def __init__(self, w, spec, coeffs, n, quad):
        self.w = w
        self.mu = coeffs.mu
        self.m = float(w @ coeffs.mu)
        self.sw_full = coeffs.sigma @ w
        self.r_full = math.sqrt(max(float(w @ self.sw_full), 0.0))
        self.nu = math.sqrt(_inv_kappa(spec))
        self.sw_k = _mask_sigma_w(coeffs.masks, coeffs.sigma, w)
        self.r_k = np.sqrt(np.maximum(np.einsum("j,kj->k", w, self.sw_k), 0.0))
        self.u = coeffs.mu_k @ w
        self.pair = (n - 1) / n
        self.diag = 1.0 / n
        sig = self.nu * self.r_k
        nodes = quad.hermite_nodes
        self.mom_a = logistic_gaussian_moments(self.u, sig, nodes)
        self.mom_b = logistic_gaussian_moments(-self.u, sig, nodes)
        self.mom_c = logistic_gaussian_moments(np.full_like(self.u, self.m), sig, nodes)
        self.mom_d = logistic_gaussian_moments(self.m, self.nu * self.r_full, nodes)


def _mask_prep(w, spec, scheme, n, quad, coeffs):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("n must be an integer >= 1")
    w = _check_w(w, spec)
    if coeffs is None:
        coeffs = mask_coefficients(scheme, spec, quad)
    return w, coeffs


def expected_mask(
    w,
    spec: ProblemSpec,
    scheme: MaskScheme,
    n: int,
    quad: QuadratureConfig | None = None,
    *,
    coeffs: MaskCoefficients | None = None,
) -> float:
    """Expected masked-mixing loss for sample size ``n``.

    Pass a precomputed ``coeffs`` table to amortize the support enumeration
    across many evaluations (optimizers do this).
    """
    quad = quad or _DEFAULT_QUAD
    w, coeffs = _mask_prep(w, spec, scheme, n, quad, coeffs)
    rows = _MaskRows(w, spec, coeffs, int(n), quad)
    pair_part = _extended_sum(
        coeffs.a * rows.mom_a.value
        + coeffs.b * rows.mom_b.value
        + coeffs.c * rows.mom_c.value
    )
    return rows.pair * pair_part + rows.diag * float(rows.mom_d.value)


def expected_mask_grad(
    w,
    spec: ProblemSpec,
    scheme: MaskScheme,
    n: int,
    quad: QuadratureConfig | None = None,
    *,
    coeffs: MaskCoefficients | None = None,
) -> np.ndarray:
    quad = quad or _DEFAULT_QUAD
    w, coeffs = _mask_prep(w, spec, scheme, n, quad, coeffs)
    rows = _MaskRows(w, spec, coeffs, int(n), quad)
    ik = rows.nu**2
    pair = rows.pair

    signed = pair * (coeffs.a * rows.mom_a.d1 - coeffs.b * rows.mom_b.d1)
    grad = signed @ coeffs.mu_k
    grad += (pair * _extended_sum(coeffs.c * rows.mom_c.d1) + rows.diag * float(rows.mom_d.d1)) * rows.mu
    curv = pair * ik * (
        coeffs.a * rows.mom_a.d2 + coeffs.b * rows.mom_b.d2 + coeffs.c * rows.mom_c.d2
    )
    grad += curv @ rows.sw_k
    grad += rows.diag * ik * float(rows.mom_d.d2) * rows.sw_full
    return grad


def expected_mask_hess(
    w,
    spec: ProblemSpec,
    scheme: MaskScheme,
    n: int,
    quad: QuadratureConfig | None = None,
    *,
    coeffs: MaskCoefficients | None = None,
) -> np.ndarray:
    quad = quad or _DEFAULT_QUAD
    w, coeffs = _mask_prep(w, spec, scheme, n, quad, coeffs)
    rows = _MaskRows(w, spec, coeffs, int(n), quad)
    ik = rows.nu**2
    pair = rows.pair
    mu, mu_k, masks = rows.mu, coeffs.mu_k, coeffs.masks

    # mean-mean blocks
    gram_coef = pair * (coeffs.a * rows.mom_a.d2 + coeffs.b * rows.mom_b.d2)
    hess = (mu_k * gram_coef[:, None]).T @ mu_k
    mu_coef = pair * _extended_sum(coeffs.c * rows.mom_c.d2) + rows.diag * float(rows.mom_d.d2)
    hess += mu_coef * np.outer(mu, mu)

    # covariance blocks: sum_k coef_k Sigma_k, assembled through the masking
    # pattern identity instead of materializing each Sigma_k.
    cov_coef = pair * ik * (
        coeffs.a * rows.mom_a.d2 + coeffs.b * rows.mom_b.d2 + coeffs.c * rows.mom_c.d2
    )
    kept = (masks * cov_coef[:, None]).T @ masks
    dropped = ((1.0 - masks) * cov_coef[:, None]).T @ (1.0 - masks)
    hess += coeffs.sigma * (kept + dropped)
    hess += rows.diag * ik * float(rows.mom_d.d2) * coeffs.sigma

    # direction blocks from the sigma-derivative (vanish at w = 0)
    safe_r = np.where(rows.r_k > 0.0, rows.r_k, 1.0)
    q_k = rows.sw_k / safe_r[:, None]
    active = rows.r_k > 0.0
    qq_coef = pair * ik * np.where(
        active,
        coeffs.a * rows.mom_a.zz_d2
        + coeffs.b * rows.mom_b.zz_d2
        + coeffs.c * rows.mom_c.zz_d2,
        0.0,
    )
    hess += (q_k * qq_coef[:, None]).T @ q_k
    cross_signed = pair * rows.nu * np.where(
        active, coeffs.a * rows.mom_a.z_d2 - coeffs.b * rows.mom_b.z_d2, 0.0
    )
    block = (q_k * cross_signed[:, None]).T @ mu_k
    hess += block + block.T
    cross_mu = pair * rows.nu * np.where(active, coeffs.c * rows.mom_c.z_d2, 0.0)
    v = cross_mu @ q_k
    hess += np.outer(v, mu) + np.outer(mu, v)

    if rows.r_full > 0.0:
        q = rows.sw_full / rows.r_full
        hess += rows.diag * ik * float(rows.mom_d.zz_d2) * np.outer(q, q)
        cd = rows.diag * rows.nu * float(rows.mom_d.z_d2)
        hess += cd * (np.outer(q, mu) + np.outer(mu, q))
    return hess


def expected_mask_infty(w, coeffs: MaskCoefficients, n: int) -> float:
    """Noiseless-limit masked loss: an exact finite sum, no quadrature."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("n must be an integer >= 1")
    w = np.asarray(w, dtype=float)
    u = coeffs.mu_k @ w
    m = float(w @ coeffs.mu)
    pair = _extended_sum(
        coeffs.a * logistic_loss(u)
        + coeffs.b * logistic_loss(-u)
        + coeffs.c * logistic_loss(m)
    )
    return (n - 1) / n * pair + logistic_loss(m) / n


def expected_mask_infty_grad(w, coeffs: MaskCoefficients, n: int) -> np.ndarray:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("n must be an integer >= 1")
    w = np.asarray(w, dtype=float)
    u = coeffs.mu_k @ w
    m = float(w @ coeffs.mu)
    pair = (n - 1) / n
    signed = pair * (coeffs.a * logistic_d1(u) - coeffs.b * logistic_d1(-u))
    grad = signed @ coeffs.mu_k
    mu_coef = (pair * float(np.sum(coeffs.c)) + 1.0 / n) * logistic_d1(m)
    return grad + mu_coef * coeffs.mu


def expected_mask_infty_hess(w, coeffs: MaskCoefficients, n: int) -> np.ndarray:
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("n must be an integer >= 1")
    w = np.asarray(w, dtype=float)
    u = coeffs.mu_k @ w
    m = float(w @ coeffs.mu)
    pair = (n - 1) / n
    gram_coef = pair * (coeffs.a * logistic_d2(u) + coeffs.b * logistic_d2(-u))
    hess = (coeffs.mu_k * gram_coef[:, None]).T @ coeffs.mu_k
    mu_coef = (pair * float(np.sum(coeffs.c)) + 1.0 / n) * logistic_d2(m)
    return hess + mu_coef * np.outer(coeffs.mu, coeffs.mu)


def expected_mask_mc(
    w,
    spec: ProblemSpec,
    scheme: MaskScheme,
    n: int,
    mask_samples: int = 10_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo estimate of the masked expected loss over sampled masks.

    Returns ``(estimate, standard_error)``.  This is the fallback for mask
    supports too large for :func:`mask_coefficients`; the inner Gaussian
    integral is still evaluated by quadrature, only the mask average is
    sampled.
    """
    if mask_samples < 2:
        raise ValueError("mask_samples must be at least 2")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError("n must be an integer >= 1")
    w = _check_w(w, spec)
    rng = np.random.Generator(np.random.Philox(seed))
    masks, lam = scheme.sample(rng, mask_samples, spec.d)
    masks = masks.astype(float)

    nu = math.sqrt(_inv_kappa(spec))
    sw_k = _mask_sigma_w(masks, spec.sigma, w)
    sig = nu * np.sqrt(np.maximum(np.einsum("j,kj->k", w, sw_k), 0.0))
    u = (spec.mu[None, :] * (2.0 * masks - 1.0)) @ w
    m = float(w @ spec.mu)

    plus = logistic_gaussian_moments(u, sig).value
    minus = logistic_gaussian_moments(-u, sig).value
    center = logistic_gaussian_moments(np.full_like(u, m), sig).value
    per_draw = 0.5 * (lam * plus + (1.0 - lam) * minus + center)

    r_full = math.sqrt(max(float(w @ (spec.sigma @ w)), 0.0))
    diag = float(logistic_gaussian_moments(m, nu * r_full).value)

    pair = (n - 1) / n
    estimate = pair * float(np.mean(per_draw)) + diag / n
    se = pair * float(np.std(per_draw, ddof=1)) / math.sqrt(mask_samples)
    return estimate, se
