"""Numerical certificates for the closed-form claims behind the expected losses.

Every ``check_*`` routine measures one claim with an independent numerical
method (ray profiles, quadrature, Monte Carlo, exhaustive enumeration) and
returns a :class:`CheckReport` whose ``passed`` flag is forced to agree with
the measured ``worst_violation``.  The checks never soften a failure: a
violation above the stated tolerance always yields ``passed == False``, and
degenerate inputs (invalid mixing schemes, mask laws whose signed means do
not span) are rejected with ``ValueError`` instead of producing a vacuous
pass.

:func:`build_pair_partition` is a constructive helper rather than a check: it
splits the ordered off-diagonal index pairs of ``[0, N)`` into batches whose
pairs share no index, which is what lets pairwise losses be treated as sums
of independent blocks.  :func:`check_pair_partition` certifies the
construction exhaustively over a range of ``N``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence

import numpy as np

from ._quad import lambda_rule, logistic_gaussian_moments
from .expected import (
    QuadratureConfig,
    expected_erm,
    expected_erm_grad,
    expected_erm_hess,
    expected_mask,
    expected_mask_grad,
    expected_mask_hess,
    expected_mask_infty,
    expected_mask_infty_grad,
    expected_mask_infty_hess,
    expected_mixup,
    expected_mixup_grad,
    expected_mixup_hess,
    mask_coefficients,
)
from .losses import (
    BernoulliMaskScheme,
    BetaLaw,
    MaskScheme,
    MixupScheme,
    logistic_loss,
    logistic_d2,
)
from .minimize import Objective, newton_minimize
from .model import (
    ProblemSpec,
    bayes_direction,
    cosine_similarity,
    default_spec_d10,
)

__all__ = [
    "CheckReport",
    "PairPartition",
    "build_pair_partition",
    "check_erm_norm_bounds",
    "check_gaussian_norm_bound",
    "check_mask_distortion",
    "check_mask_limit",
    "check_mixup_norm_bounds",
    "check_pair_partition",
    "check_pointwise_inequalities",
    "example_spec_d2",
    "run_suite",
    "write_reports",
    "SUITE_NAMES",
]


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one numerical certificate.

    ``worst_violation`` is the largest signed margin by which any assertion
    in the check exceeded its threshold; negative values mean every
    assertion held with room to spare.  Construction enforces
    ``passed == (worst_violation <= tolerance)``, so a report can never
    claim success while carrying an above-threshold violation.
    """

    name: str
    passed: bool
    worst_violation: float
    witnesses: tuple = ()
    tolerance: float = 0.0
    seed: int | None = None
    note: str | None = None

    def __post_init__(self):
        consistent = bool(self.worst_violation <= self.tolerance) == bool(self.passed)
        if not consistent:
            raise ValueError(
                f"inconsistent report {self.name!r}: passed={self.passed} but "
                f"worst_violation={self.worst_violation!r} vs tolerance={self.tolerance!r}"
            )

    def to_json_line(self) -> str:
        return json.dumps(
            {
                "name": self.name,
                "passed": self.passed,
                "worst_violation": self.worst_violation,
                "seed": self.seed,
            }
        )


def _report(
    name: str,
    violations: Sequence[float],
    witnesses: Sequence[dict],
    tolerance: float,
    seed: int | None = None,
    note: str | None = None,
) -> CheckReport:
    worst = max(violations) if len(violations) else 0.0
    return CheckReport(
        name=name,
        passed=bool(worst <= tolerance),
        worst_violation=float(worst),
        witnesses=tuple(witnesses),
        tolerance=tolerance,
        seed=seed,
        note=note,
    )


def write_reports(reports: Sequence[CheckReport], path) -> None:
    """Write one JSON line per report (name, passed, worst_violation, seed)."""
    with open(path, "w") as fh:
        for rep in reports:
            fh.write(rep.to_json_line() + "\n")


# ------------------------------------------------------------ ray minimizer


def _ray_minimum(
    value_fn: Callable[[float], float],
    deriv_fn: Callable[[float], tuple[float, float]],
    hi: float,
    bracket_rel: float = 1e-3,
    step_rel: float = 1e-13,
) -> float:
    """Minimum of a strictly convex profile over ``[0, hi]``.

    Golden-section narrows ``[0, hi]`` to a relative width of ``bracket_rel``
    using values only, then Newton iterations on the slope polish to full
    precision.  Raises ``RuntimeError`` instead of returning a doubtful
    point when the polish loses convexity or fails to settle.
    """
    if not (math.isfinite(hi) and hi > 0.0):
        raise ValueError("hi must be a finite positive bracket end")
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.0, float(hi)
    c1 = b - inv * (b - a)
    c2 = a + inv * (b - a)
    f1 = value_fn(c1)
    f2 = value_fn(c2)
    while b - a > bracket_rel * max(1.0, hi):
        if f1 < f2:
            b, c2, f2 = c2, c1, f1
            c1 = b - inv * (b - a)
            f1 = value_fn(c1)
        else:
            a, c1, f1 = c1, c2, f2
            c2 = a + inv * (b - a)
            f2 = value_fn(c2)
    c = 0.5 * (a + b)
    for _ in range(60):
        slope, curv = deriv_fn(c)
        if not (math.isfinite(slope) and curv > 0.0):
            raise RuntimeError("ray profile lost convexity during the polish")
        nxt = min(max(c - slope / curv, 0.0), hi)
        if abs(nxt - c) <= step_rel * max(1.0, abs(nxt)):
            return nxt
        c = nxt
    raise RuntimeError("ray-minimum polish did not settle in 60 steps")


def _settle(oracle: Objective, w0: np.ndarray, max_iters: int = 200) -> np.ndarray:
    """Newton-iterate until the line search can no longer improve.

    Near the optimum of a very flat profile the gradient norm can sit many
    orders of magnitude below any fixed tolerance, so instead of a gradient
    test this runs with ``grad_tol=0`` and accepts the stall point.
    """
    res = newton_minimize(oracle, w0, grad_tol=0.0, max_iters=max_iters)
    w = res.w_star
    if not np.all(np.isfinite(w)):
        raise RuntimeError("full-space polish diverged")
    return w


# ------------------------------------------------------- norm-bound checks


def check_erm_norm_bounds(
    spec: ProblemSpec,
    kappa_list: Sequence[float],
    quad: QuadratureConfig | None = None,
    rel_tol: float = 1e-6,
) -> CheckReport:
    """Certify the bracket on the plain-loss minimizer norm.

    With ``s = mu' Sigma^{-1} mu``, the expected plain loss restricted to the
    ray ``w = c Sigma^{-1} mu`` equals ``E[l(c X)]`` for ``X ~ N(s, s/kappa)``.
    For each ``kappa`` the profile minimum ``c*`` must land inside
    ``[4 kappa / 3, 4 kappa]`` up to ``rel_tol * kappa``, and the full-space
    Newton minimizer must match ``c* Sigma^{-1} mu`` coordinatewise to the
    same relative tolerance.
    """
    quad = quad or QuadratureConfig()
    bayes = bayes_direction(spec)
    s = float(spec.mu @ bayes)
    violations: list[float] = []
    witnesses: list[dict] = []
    for kappa in kappa_list:
        kappa = float(kappa)
        if not (kappa > 0.0 and math.isfinite(kappa)):
            raise ValueError("kappa entries must be finite and positive")
        tau = math.sqrt(s / kappa)

        def value_fn(c: float) -> float:
            mom = logistic_gaussian_moments(c * s, c * tau, quad.hermite_nodes)
            return float(mom.value)

        def deriv_fn(c: float) -> tuple[float, float]:
            mom = logistic_gaussian_moments(c * s, c * tau, quad.hermite_nodes)
            d1 = float(mom.d1)
            d2 = float(mom.d2)
            slope = s * d1 + c * tau * tau * d2
            curv = s * s * d2 + 2.0 * s * tau * float(mom.z_d2) + tau * tau * (
                float(mom.zz_d2) + d2
            )
            return slope, curv

        c_star = _ray_minimum(value_fn, deriv_fn, hi=6.0 * kappa)
        lower, upper = 4.0 * kappa / 3.0, 4.0 * kappa
        interval_violation = max(lower - c_star, c_star - upper) / kappa

        spec_k = spec.with_kappa(kappa)
        oracle = Objective(
            value=lambda w, sk=spec_k: expected_erm(w, sk, quad),
            grad=lambda w, sk=spec_k: expected_erm_grad(w, sk, quad),
            hess=lambda w, sk=spec_k: expected_erm_hess(w, sk, quad),
        )
        w_full = _settle(oracle, np.zeros(spec.d))
        target = c_star * bayes
        denom = np.maximum(np.abs(target), 1e-12 * np.max(np.abs(target)))
        newton_rel = float(np.max(np.abs(w_full - target) / denom))

        worst_here = max(interval_violation, newton_rel)
        violations.append(worst_here)
        if worst_here > rel_tol:
            witnesses.append(
                {
                    "kappa": kappa,
                    "c_star": c_star,
                    "interval": [lower, upper],
                    "newton_rel_err": newton_rel,
                }
            )
    return _report("erm_norm_bounds", violations, witnesses, rel_tol)


def check_mixup_norm_bounds(
    spec: ProblemSpec,
    scheme: MixupScheme,
    n: int,
    kappa_list: Sequence[float],
    quad: QuadratureConfig | None = None,
    tol: float = 1e-9,
) -> CheckReport:
    """Certify the kappa-free bracket on the mixed-loss minimizer norm.

    Writing ``g`` for the scheme's mixing map and ``s = mu' Sigma^{-1} mu``,
    the ray-profile minimum ``c*`` at every ``kappa`` must satisfy::

        E[(2L-1)(2g(L)-1)]
        ------------------------------------------------  <=  c*  <
        (2 E[g^2+(1-g)^2] + 1)/kappa + s E[(2g-1)^2 + 2]

                 4 log 2 / (E[min(L, 1-L) |2g(L)-1|] s)

    where ``L`` is the mixing weight.  Because the upper bound does not
    involve ``kappa``, ``c*`` must also be nearly flat in ``kappa``: the
    check additionally requires a spread below 10% across ``kappa_list``.
    """
    scheme.require_valid()
    quad = quad or QuadratureConfig()
    n = int(n)
    bayes = bayes_direction(spec)
    s = float(spec.mu @ bayes)

    lam, om = lambda_rule(scheme.lambda_law, quad.unit_nodes)
    g = np.asarray(scheme.g(lam), dtype=float)
    swing = 2.0 * g - 1.0
    e_align = float(om @ ((2.0 * lam - 1.0) * swing))
    e_square = float(om @ (g * g + (1.0 - g) * (1.0 - g)))
    e_spread = float(om @ (swing * swing)) + 2.0
    e_kink = float(om @ (np.minimum(lam, 1.0 - lam) * np.abs(swing)))
    if not (e_kink > 0.0):
        raise ValueError("mixing scheme has no usable kink mass; bounds degenerate")
    upper = 4.0 * math.log(2.0) / (e_kink * s)

    c_stars: list[float] = []
    violations: list[float] = []
    witnesses: list[dict] = []
    for kappa in kappa_list:
        kappa = float(kappa)
        if not (kappa > 0.0 and math.isfinite(kappa)):
            raise ValueError("kappa entries must be finite and positive")
        spec_k = spec.with_kappa(kappa)

        def value_fn(c: float) -> float:
            return expected_mixup(c * bayes, spec_k, scheme, n, quad)

        def deriv_fn(c: float) -> tuple[float, float]:
            w = c * bayes
            slope = float(expected_mixup_grad(w, spec_k, scheme, n, quad) @ bayes)
            curv = float(bayes @ (expected_mixup_hess(w, spec_k, scheme, n, quad) @ bayes))
            return slope, curv

        c_star = _ray_minimum(value_fn, deriv_fn, hi=upper)
        lower = e_align / ((2.0 * e_square + 1.0) / kappa + s * e_spread)
        worst_here = max(lower - c_star, c_star - upper)
        c_stars.append(c_star)
        violations.append(worst_here)
        if worst_here > tol:
            witnesses.append(
                {"kappa": kappa, "c_star": c_star, "lower": lower, "upper": upper}
            )
    spread = (max(c_stars) - min(c_stars)) / min(c_stars)
    violations.append(spread - 0.1)
    if spread > 0.1:
        witnesses.append({"kappa_spread": spread, "c_stars": c_stars})
    return _report("mixup_norm_bounds", violations, witnesses, tol)


# ------------------------------------------------------------- mask checks


def example_spec_d2() -> ProblemSpec:
    """Small anisotropic planar instance for the mask-limit certificates.

    The mean is deliberately not an eigenvector of the covariance, and both
    coordinates are nonzero so every mask scheme's span assumption holds.
    """
    sigma = np.array([[1.0, 0.3], [0.3, 0.7]])
    top = 0.5 * (1.7 + math.sqrt(0.45))
    mu = math.sqrt(top) / math.hypot(0.8, 0.6) * np.array([0.8, 0.6])
    return ProblemSpec(mu, sigma, 1.0)


def _mask_infty_objective(coeffs, n: int) -> Objective:
    return Objective(
        value=lambda w: expected_mask_infty(w, coeffs, n),
        grad=lambda w: expected_mask_infty_grad(w, coeffs, n),
        hess=lambda w: expected_mask_infty_hess(w, coeffs, n),
    )


def check_mask_limit(
    spec: ProblemSpec,
    scheme: MaskScheme,
    kappa_grid: Sequence[float],
    n: int = 500,
    quad: QuadratureConfig | None = None,
    gap_at_end: float = 1e-2,
    tol: float = 1e-9,
) -> CheckReport:
    """Certify convergence of masked minimizers to the noiseless limit.

    Solves the masked expected loss at each ``kappa`` in the increasing grid
    and the exact noiseless objective once, then asserts that the distances
    ``||w*_kappa - w*_inf||`` are nonincreasing along the grid and fall below
    ``gap_at_end`` at the final (largest) ``kappa``.  The noiseless minimizer
    must also be unique in practice: Newton from the origin and from a
    far-off start must land within 1e-8 of each other.
    """
    if not scheme.assumption_holds(spec.mu):
        raise ValueError(
            "mask scheme violates the span assumption for this mu; "
            "the noiseless objective has no unique minimizer"
        )
    kappas = [float(k) for k in kappa_grid]
    if len(kappas) < 2 or any(b <= a for a, b in zip(kappas, kappas[1:])):
        raise ValueError("kappa_grid must be strictly increasing with >= 2 entries")
    quad = quad or QuadratureConfig()
    n = int(n)
    coeffs = mask_coefficients(scheme, spec, quad)
    inf_obj = _mask_infty_objective(coeffs, n)
    w_inf = _settle(inf_obj, np.zeros(spec.d))
    far = np.zeros(spec.d)
    far[0] = 5.0
    w_inf_alt = _settle(inf_obj, far)
    uniqueness_gap = float(np.linalg.norm(w_inf - w_inf_alt))

    dists: list[float] = []
    for kappa in kappas:
        spec_k = spec.with_kappa(kappa)
        oracle = Objective(
            value=lambda w, sk=spec_k: expected_mask(w, sk, scheme, n, quad, coeffs=coeffs),
            grad=lambda w, sk=spec_k: expected_mask_grad(w, sk, scheme, n, quad, coeffs=coeffs),
            hess=lambda w, sk=spec_k: expected_mask_hess(w, sk, scheme, n, quad, coeffs=coeffs),
        )
        w_k = _settle(oracle, np.zeros(spec.d))
        dists.append(float(np.linalg.norm(w_k - w_inf)))

    violations = [uniqueness_gap - 1e-8]
    violations.extend(b - a for a, b in zip(dists, dists[1:]))
    violations.append(dists[-1] - gap_at_end)
    witnesses: list[dict] = []
    if max(violations) > tol:
        witnesses.append(
            {
                "kappa_grid": kappas,
                "distances": dists,
                "uniqueness_gap": uniqueness_gap,
            }
        )
    return _report("mask_limit", violations, witnesses, tol)


def check_mask_distortion(
    spec: ProblemSpec,
    scheme: MaskScheme,
    n: int = 500,
    mixup_scheme: MixupScheme | None = None,
    quad: QuadratureConfig | None = None,
) -> CheckReport:
    """Certify that masking tilts the noiseless minimizer off the Bayes ray.

    For an anisotropic covariance the noiseless masked minimizer must make a
    definite angle with ``Sigma^{-1} mu`` (cosine below ``1 - 1e-3``), while
    the pairwise mixed loss on the same instance stays aligned to
    ``1 - 1e-8``.  An isotropic covariance leaves nothing to distort, so the
    check reports "not applicable" instead of a spurious verdict.
    """
    if not scheme.assumption_holds(spec.mu):
        raise ValueError(
            "mask scheme violates the span assumption for this mu; "
            "the noiseless objective has no unique minimizer"
        )
    quad = quad or QuadratureConfig()
    n = int(n)
    iso_level = float(np.trace(spec.sigma)) / spec.d
    if np.max(np.abs(spec.sigma - iso_level * np.eye(spec.d))) <= 1e-12 * spec.spectral_norm:
        return CheckReport(
            name="mask_distortion",
            passed=True,
            worst_violation=0.0,
            note="not applicable: isotropic covariance leaves no direction to distort",
        )
    coeffs = mask_coefficients(scheme, spec, quad)
    w_inf = _settle(_mask_infty_objective(coeffs, n), np.zeros(spec.d))
    bayes = bayes_direction(spec)
    sim_mask = cosine_similarity(w_inf, bayes)

    mixup_scheme = mixup_scheme or MixupScheme(BetaLaw(1.0))
    mixup_scheme.require_valid()
    oracle = Objective(
        value=lambda w: expected_mixup(w, spec, mixup_scheme, n, quad),
        grad=lambda w: expected_mixup_grad(w, spec, mixup_scheme, n, quad),
        hess=lambda w: expected_mixup_hess(w, spec, mixup_scheme, n, quad),
    )
    w_mix = _settle(oracle, np.zeros(spec.d))
    sim_mix = cosine_similarity(w_mix, bayes)

    violations = [sim_mask - (1.0 - 1e-3), (1.0 - 1e-8) - sim_mix]
    witnesses: list[dict] = []
    if max(violations) > 0.0:
        witnesses.append({"sim_mask": sim_mask, "sim_mixup": sim_mix})
    return _report("mask_distortion", violations, witnesses, 0.0)


# ------------------------------------------------- pointwise-bound checks


def check_pointwise_inequalities(
    grid_size: int = 100_000,
    seed: int = 0,
    quad: QuadratureConfig | None = None,
    tol: float = 1e-12,
) -> CheckReport:
    """Certify the scalar and small-matrix bounds the norm proofs lean on.

    Four families, each checked on dense random grids plus adversarial
    points:

    * curvature floor: ``l''(z) >= exp(-z^2/2)/4`` on ``[-50, 50]``, with
      exact equality at ``z = 0``;
    * product bound: ``z/(1+e^z) >= z/2 - z^2/4`` on the same grid;
    * smoothing gap: ``0 <= E[l(m + sigma Z)] - l(m) <= sigma`` for a grid of
      means in ``[-20, 20]`` and sigmas in ``[1e-4, 10]``;
    * moment bound: for random positive-definite ``M`` with ``||M|| <= 1``
      and dimension at most 6, the Monte Carlo mean of ``exp(||z||)`` for
      ``z ~ N(0, M)`` stays below ``exp(4 ||M||) + 2^{k/2}`` plus four
      standard errors.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    quad = quad or QuadratureConfig()
    rng = np.random.Generator(np.random.Philox(seed))
    edge = np.array([1e-12, 1e-6, 1e-3, 0.5, 1.0, 5.0, 10.0, 25.0, 49.999, 50.0])
    z = np.concatenate(
        [rng.uniform(-50.0, 50.0, size=grid_size), [0.0], edge, -edge]
    )

    curvature_viol = float(np.max(0.25 * np.exp(-0.5 * z * z) - logistic_d2(z)))
    equality_viol = abs(float(logistic_d2(np.array([0.0]))[0]) - 0.25)

    product_lhs = z * np.exp(-np.logaddexp(0.0, z))
    product_viol = float(np.max(0.5 * z - 0.25 * z * z - product_lhs))

    means = np.repeat(np.linspace(-20.0, 20.0, 41), 25)
    sigmas = np.tile(np.geomspace(1e-4, 10.0, 25), 41)
    mom = logistic_gaussian_moments(means, sigmas, quad.hermite_nodes)
    gap = mom.value - logistic_loss(means)
    gap_low_viol = float(np.max(-gap))
    gap_high_viol = float(np.max(gap - sigmas))

    draws = min(int(grid_size), 200_000)
    moment_viol = -math.inf
    moment_witness: dict | None = None
    for _ in range(10):
        k = int(rng.integers(1, 7))
        a = rng.standard_normal((k, k))
        m = a @ a.T + 1e-3 * np.eye(k)
        target = float(rng.uniform(0.2, 1.0))
        m *= target / float(np.linalg.norm(m, 2))
        chol = np.linalg.cholesky(m)
        sample = rng.standard_normal((draws, k)) @ chol.T
        vals = np.exp(np.linalg.norm(sample, axis=1))
        mean = float(np.mean(vals))
        stderr = float(np.std(vals) / math.sqrt(draws))
        bound = math.exp(4.0 * target) + 2.0 ** (k / 2.0)
        if mean - bound - 4.0 * stderr > moment_viol:
            moment_viol = mean - bound - 4.0 * stderr
            moment_witness = {"k": k, "norm": target, "mc_mean": mean, "bound": bound}

    labelled = {
        "curvature_floor": curvature_viol,
        "curvature_equality_at_zero": equality_viol,
        "product_bound": product_viol,
        "smoothing_gap_lower": gap_low_viol,
        "smoothing_gap_upper": gap_high_viol,
        "moment_bound": moment_viol,
    }
    witnesses = [
        {"family": fam, "violation": v} for fam, v in labelled.items() if v > tol
    ]
    if any(w["family"] == "moment_bound" for w in witnesses) and moment_witness:
        witnesses.append(moment_witness)
    return _report(
        "pointwise_inequalities", list(labelled.values()), witnesses, tol, seed=seed
    )


def check_gaussian_norm_bound(
    M,
    delta: float,
    trials: int = 100_000,
    seed: int = 0,
) -> CheckReport:
    """Certify the high-probability norm bound for a centered Gaussian.

    For ``z ~ N(0, M)`` the event ``||z|| > sqrt(tr M) + sqrt(2 ||M||
    log(1/delta))`` must have frequency at most ``delta`` plus three binomial
    standard errors over ``trials`` draws.  At ``delta = 1`` the log term
    vanishes and the statement is vacuous; the report says so rather than
    pretending it learned something.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("M must be a square matrix")
    if np.max(np.abs(M - M.T)) > 1e-10:
        raise ValueError("M must be symmetric")
    if not (0.0 < delta <= 1.0):
        raise ValueError("delta must lie in (0, 1]")
    if trials < 100:
        raise ValueError("trials must be at least 100")
    try:
        chol = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise ValueError("M must be positive definite") from exc

    bound = math.sqrt(float(np.trace(M)))
    if delta < 1.0:
        bound += math.sqrt(2.0 * float(np.linalg.norm(M, 2)) * math.log(1.0 / delta))
    rng = np.random.Generator(np.random.Philox(seed))
    sample = rng.standard_normal((int(trials), M.shape[0])) @ chol.T
    freq = float(np.mean(np.linalg.norm(sample, axis=1) > bound))
    stderr = math.sqrt(delta * (1.0 - delta) / trials)
    violation = freq - delta - 3.0 * stderr
    witnesses: list[dict] = []
    if violation > 0.0:
        witnesses.append({"frequency": freq, "bound": bound, "delta": delta})
    note = f"frequency {freq:.5f} against bound {bound:.6g} at delta {delta:g}"
    if delta == 1.0:
        note += "; vacuous: the deviation term vanishes at delta = 1"
    return _report(
        "gaussian_norm_bound", [violation], witnesses, 0.0, seed=seed, note=note
    )


# ------------------------------------------------------- pair partitions


class PairPartition(NamedTuple):
    """Off-diagonal index pairs of ``[0, N)`` split into index-disjoint
    batches, plus the diagonal pairs kept separate."""

    batches: list[list[tuple[int, int]]]
    diagonal: list[tuple[int, int]]


def build_pair_partition(N: int) -> PairPartition:
    """Partition all ordered pairs over ``[0, N)`` into index-disjoint batches.

    Every ordered pair ``(i, j)`` with ``i != j`` lands in exactly one batch,
    no two pairs within a batch share an index, and every batch has the same
    size: ``(N-1)/2`` pairs across ``2N`` batches for odd ``N``, ``N/2``
    pairs across ``2(N-1)`` batches for even ``N``.  The construction is
    modular: pairs are grouped by ``i + j mod N`` (odd ``N``) or ``mod N-1``
    with the last index patched in via the half-class (even ``N``).
    """
    if not isinstance(N, (int, np.integer)) or isinstance(N, bool) or N < 2:
        raise ValueError("N must be an integer >= 2")
    N = int(N)
    diagonal = [(i, i) for i in range(N)]
    batches: list[list[tuple[int, int]]] = []
    if N % 2 == 1:
        for c in range(N):
            fwd = [
                (a, b)
                for a in range(N)
                for b in range(a + 1, N)
                if (a + b) % N == c
            ]
            batches.append(fwd)
            batches.append([(b, a) for a, b in fwd])
    else:
        m = N - 1
        half = (m + 1) // 2  # multiplicative inverse of 2 modulo the odd m
        for c in range(m):
            fwd = [
                (a, b)
                for a in range(m)
                for b in range(a + 1, m)
                if (a + b) % m == c
            ]
            fwd.append(((c * half) % m, N - 1))
            batches.append(fwd)
            batches.append([(b, a) for a, b in fwd])
    return PairPartition(batches, diagonal)


def check_pair_partition(n_min: int = 2, n_max: int = 64) -> CheckReport:
    """Exhaustively certify :func:`build_pair_partition` over a range of N.

    For each ``N`` the batches must have the advertised count and uniform
    size, contain no index twice within a batch, and together with the
    diagonal cover every ordered pair over ``[0, N)`` exactly once.
    ``worst_violation`` counts the offending values of ``N``.
    """
    if n_min < 2 or n_max < n_min:
        raise ValueError("need 2 <= n_min <= n_max")
    witnesses: list[dict] = []
    for N in range(n_min, n_max + 1):
        part = build_pair_partition(N)
        problems: list[str] = []
        want_batches = 2 * N if N % 2 else 2 * (N - 1)
        want_size = (N - 1) // 2 if N % 2 else N // 2
        if len(part.batches) != want_batches:
            problems.append(f"{len(part.batches)} batches, wanted {want_batches}")
        if any(len(b) != want_size for b in part.batches):
            problems.append("uneven batch sizes")
        for b in part.batches:
            flat = [i for pair in b for i in pair]
            if len(set(flat)) != len(flat):
                problems.append("index reused within a batch")
                break
        seen: set[tuple[int, int]] = set()
        total = 0
        for b in part.batches:
            seen.update(b)
            total += len(b)
        seen.update(part.diagonal)
        total += len(part.diagonal)
        if total != N * N or len(seen) != N * N:
            problems.append("batches plus diagonal do not cover each pair once")
        if any(not (0 <= i < N and 0 <= j < N) for i, j in seen):
            problems.append("index out of range")
        if part.diagonal != [(i, i) for i in range(N)]:
            problems.append("malformed diagonal")
        if problems:
            witnesses.append({"N": N, "problems": problems})
    return _report(
        "pair_partition", [float(len(witnesses))], witnesses, 0.0
    )


# --------------------------------------------------------------- suites


SUITE_NAMES = ("norms", "mask", "inequalities", "all")


def run_suite(suite: str = "all", seed: int = 0) -> list[CheckReport]:
    """Run a named bundle of checks on the canned instances.

    ``norms`` covers the minimizer-norm brackets, ``mask`` the noiseless
    limit and distortion certificates, ``inequalities`` the pointwise
    bounds, the pair partition, and the Gaussian norm tail.  ``all`` runs
    everything.  Reports come back in execution order.
    """
    if suite not in SUITE_NAMES:
        raise ValueError(f"unknown suite {suite!r}; choose from {SUITE_NAMES}")
    reports: list[CheckReport] = []
    if suite in ("norms", "all"):
        d10 = default_spec_d10()
        reports.append(check_erm_norm_bounds(d10, [0.5, 1.0, 2.0, 5.0, 10.0, 20.0]))
        reports.append(
            check_mixup_norm_bounds(
                d10, MixupScheme(BetaLaw(1.0)), n=500, kappa_list=[1.0, 5.0, 50.0]
            )
        )
    if suite in ("mask", "all"):
        reports.append(
            check_mask_limit(
                example_spec_d2(),
                BernoulliMaskScheme(1.0),
                kappa_grid=[10.0, 100.0, 1000.0, 10000.0],
            )
        )
        reports.append(check_mask_distortion(default_spec_d10(), BernoulliMaskScheme(1.0)))
    if suite in ("inequalities", "all"):
        reports.append(check_pointwise_inequalities(seed=seed))
        reports.append(check_pair_partition())
        reports.append(check_gaussian_norm_bound(np.eye(1), delta=0.5, seed=seed))
        reports.append(check_gaussian_norm_bound(np.eye(2), delta=1.0, seed=seed + 1))
        d10 = default_spec_d10()
        reports.append(
            check_gaussian_norm_bound(d10.sigma / 50.0, delta=0.01, seed=seed + 2)
        )
    return reports
