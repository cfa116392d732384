"""Hard-margin maximum-margin solver and linear-separability test.

Solves min ||w||^2 subject to (2y_i - 1) w^T x_i >= 1 by coordinate ascent on
the hard-margin dual over the signed points z_i = (2y_i - 1) x_i.  The dual
variables double as KKT certificates: stationarity (w is the alpha-weighted
sum of signed points), primal feasibility (unit margins), and complementary
slackness are all checkable from the returned solution.  On data that are not
strictly separable the dual is unbounded and the ascent never meets the
gradient tolerance, which is how infeasibility is reported.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset

__all__ = ["MarginSolution", "solve_max_margin", "is_separable"]


@dataclass(frozen=True)
class MarginSolution:
    """Outcome of the hard-margin problem on one dataset.

    ``feasible`` is True only when the dual converged, so ``w_bar`` carries a
    full KKT certificate; otherwise ``w_bar`` and ``alphas`` hold the last
    iterate and ``residual`` the remaining dual-gradient violation.
    """

    w_bar: np.ndarray
    alphas: np.ndarray
    feasible: bool
    iterations: int
    residual: float

    def margins(self, data: Dataset) -> np.ndarray:
        signs = 2.0 * data.y.astype(float) - 1.0
        return signs * (data.x @ self.w_bar)


def _signed_points(data: Dataset) -> np.ndarray:
    signs = 2.0 * data.y.astype(float) - 1.0
    return signs[:, None] * data.x


def _dual_objective(z: np.ndarray, alphas: np.ndarray) -> float:
    w = alphas @ z
    return float(alphas.sum() - 0.5 * (w @ w))


def _polish(z: np.ndarray, alphas: np.ndarray) -> np.ndarray | None:
    """Solve the KKT equalities exactly on the current working set.

    Coordinate ascent is slow once the support is known but the margins are
    nearly degenerate; a direct solve on the active Gram system jumps to the
    exact solution.  Coordinates whose multiplier comes out negative are
    dropped and the system re-solved.  Returns None when no usable candidate
    emerges.
    """
    active = np.flatnonzero(alphas > 0.0)
    for _ in range(active.size + 1):
        if active.size == 0:
            return None
        zs = z[active]
        gram = zs @ zs.T
        try:
            sub = np.linalg.solve(gram, np.ones(active.size))
        except np.linalg.LinAlgError:
            sub, *_ = np.linalg.lstsq(gram, np.ones(active.size), rcond=None)
            if np.max(np.abs(gram @ sub - 1.0)) > 1e-9:
                return None
        if not np.all(np.isfinite(sub)):
            return None
        if np.min(sub) >= 0.0:
            cand = np.zeros_like(alphas)
            cand[active] = sub
            return cand
        active = active[sub > 0.0]
    return None


def solve_max_margin(
    data: Dataset,
    tol: float = 1e-10,
    max_iters: int = 20_000,
) -> MarginSolution:
    """Greedy dual coordinate ascent for the minimum-norm separating vector.

    Each step updates the dual coordinate with the largest projected-gradient
    violation (``1 - z_i^T w``, clipped at zero for inactive coordinates) and
    stops once the worst violation falls below ``tol``.  Every 512 steps the
    KKT equalities are solved exactly on the current working set, which
    finishes nearly degenerate margins that plain ascent approaches only
    slowly.  A run that has not converged after ``max_iters`` steps gets one
    warm retry with a tenfold budget, so hard instances are not misreported;
    only after that is the data declared non-separable.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    z = _signed_points(data)
    n = z.shape[0]
    sq = np.einsum("ij,ij->i", z, z)
    alphas = np.zeros(n)
    if np.any(sq == 0.0):
        # a zero sample makes its constraint 0 >= 1 unsatisfiable
        return MarginSolution(np.zeros(data.d), alphas, False, 0, np.inf)
    w = np.zeros(data.d)
    budget = max_iters
    it = 0
    worst = np.inf
    while True:
        while it < budget:
            if it % 512 == 0:
                if it > 0:
                    cand = _polish(z, alphas)
                    if cand is not None and _dual_objective(z, cand) > _dual_objective(z, alphas):
                        alphas = cand
                # rebuild w from the duals to shed incremental-update drift
                w = alphas @ z
            gaps = 1.0 - z @ w
            viol = np.where(alphas > 0.0, np.abs(gaps), np.maximum(gaps, 0.0))
            i = int(np.argmax(viol))
            worst = float(viol[i])
            if worst <= tol:
                return MarginSolution(alphas @ z, alphas, True, it, worst)
            new_alpha = max(0.0, alphas[i] + gaps[i] / sq[i])
            w = w + (new_alpha - alphas[i]) * z[i]
            alphas[i] = new_alpha
            it += 1
        if budget >= 10 * max_iters:
            return MarginSolution(alphas @ z, alphas, False, it, worst)
        budget = 10 * max_iters


def is_separable(data: Dataset, tol: float = 1e-10, max_iters: int = 20_000) -> bool:
    """Whether some hyperplane classifies every sample with a strict margin."""
    return solve_max_margin(data, tol=tol, max_iters=max_iters).feasible
