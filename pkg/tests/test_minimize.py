import csv

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from sepmix.expected import (
    expected_erm,
    expected_erm_grad,
    expected_erm_hess,
    expected_mask,
    expected_mask_grad,
    expected_mask_hess,
    expected_mixup,
    expected_mixup_grad,
    expected_mixup_hess,
    mask_coefficients,
)
from sepmix.losses import (
    BernoulliMaskScheme,
    BetaLaw,
    MixupScheme,
    erm_grad,
    erm_loss,
    make_mixup_pairs,
    mixup_grad,
    mixup_loss,
)
from sepmix.maxmargin import solve_max_margin
from sepmix.minimize import (
    MinimizeResult,
    MinimizeStatus,
    Objective,
    Trace,
    adam_minimize,
    detect_divergence,
    gd_minimize,
    newton_minimize,
)
from sepmix.model import (
    Dataset,
    bayes_direction,
    cosine_similarity,
    default_spec_d10,
)

SCHEME_U = MixupScheme(BetaLaw(1.0))


def quadratic(center, mat) -> Objective:
    a = np.asarray(center, dtype=float)
    m = np.asarray(mat, dtype=float)
    return Objective(
        value=lambda w: float(0.5 * (w - a) @ m @ (w - a)),
        grad=lambda w: m @ (w - a),
        hess=lambda w: m.copy(),
    )


def erm_objective(spec) -> Objective:
    return Objective(
        value=lambda w: expected_erm(w, spec),
        grad=lambda w: expected_erm_grad(w, spec),
        hess=lambda w: expected_erm_hess(w, spec),
    )


def mixup_objective(spec, scheme, n) -> Objective:
    return Objective(
        value=lambda w: expected_mixup(w, spec, scheme, n),
        grad=lambda w: expected_mixup_grad(w, spec, scheme, n),
        hess=lambda w: expected_mixup_hess(w, spec, scheme, n),
    )


def empirical_erm_objective(data) -> Objective:
    return Objective(
        value=lambda w: erm_loss(w, data),
        grad=lambda w: erm_grad(w, data),
    )


# ------------------------------------------------------------------- newton


def test_newton_solves_quadratic_in_one_step():
    center = np.array([1.0, -2.0, 0.5])
    obj = quadratic(center, np.diag([3.0, 1.0, 0.25]))
    res = newton_minimize(obj, np.zeros(3))
    assert res.status is MinimizeStatus.CONVERGED
    assert res.converged
    assert res.iterations == 1
    assert res.final_grad_norm <= 1e-10
    assert_allclose(res.w_star, center, rtol=0, atol=1e-12)


def test_newton_trace_has_one_row_per_visited_iterate():
    obj = quadratic([2.0, 2.0], np.eye(2))
    res = newton_minimize(obj, np.zeros(2))
    tr = res.trace
    assert tr.epochs == [0, 1]
    assert tr.losses[0] > tr.losses[1]
    assert tr.grad_norms[1] <= 1e-10


def test_newton_requires_a_hessian():
    obj = Objective(value=lambda w: float(w @ w), grad=lambda w: 2.0 * w)
    with pytest.raises(ValueError, match="Hessian"):
        newton_minimize(obj, np.zeros(2))


def test_newton_erm_recovers_population_direction():
    spec = default_spec_d10(kappa=1.0)
    res = newton_minimize(erm_objective(spec), np.zeros(10))
    assert res.status is MinimizeStatus.CONVERGED
    assert res.iterations <= 100
    assert cosine_similarity(res.w_star, bayes_direction(spec)) >= 1.0 - 1e-10


def test_newton_mixup_recovers_population_direction():
    spec = default_spec_d10(kappa=2.0)
    res = newton_minimize(mixup_objective(spec, SCHEME_U, 500), np.zeros(10))
    assert res.status is MinimizeStatus.CONVERGED
    assert res.iterations <= 100
    assert cosine_similarity(res.w_star, bayes_direction(spec)) >= 1.0 - 1e-10


@pytest.mark.parametrize("kappa", [0.1, 1.0, 10.0, 50.0])
def test_newton_budget_across_noise_levels(kappa):
    spec = default_spec_d10(kappa)
    for obj in (erm_objective(spec), mixup_objective(spec, SCHEME_U, 500)):
        res = newton_minimize(obj, np.zeros(10))
        assert res.status is MinimizeStatus.CONVERGED
        assert res.iterations <= 100
        assert res.final_grad_norm <= 1e-10


@pytest.mark.parametrize("kappa", [0.1, 50.0])
def test_newton_budget_for_masked_objective(kappa):
    spec = default_spec_d10(kappa)
    scheme = BernoulliMaskScheme(1.0)
    coeffs = mask_coefficients(scheme, spec)
    obj = Objective(
        value=lambda w: expected_mask(w, spec, scheme, 500, coeffs=coeffs),
        grad=lambda w: expected_mask_grad(w, spec, scheme, 500, coeffs=coeffs),
        hess=lambda w: expected_mask_hess(w, spec, scheme, 500, coeffs=coeffs),
    )
    res = newton_minimize(obj, np.zeros(10))
    assert res.status is MinimizeStatus.CONVERGED
    assert res.iterations <= 100


def test_newton_singular_hessian_falls_back_to_ridge():
    # flat in the second coordinate: the plain solve raises, the smallest
    # ridge shift already yields the exact step
    obj = Objective(
        value=lambda w: float((w[0] - 1.0) ** 2),
        grad=lambda w: np.array([2.0 * (w[0] - 1.0), 0.0]),
        hess=lambda w: np.array([[2.0, 0.0], [0.0, 0.0]]),
    )
    res = newton_minimize(obj, np.array([5.0, 3.0]))
    assert res.status is MinimizeStatus.CONVERGED
    assert_allclose(res.w_star, [1.0, 3.0], rtol=0, atol=1e-10)


def test_newton_reports_diverged_when_no_descent_direction_exists():
    obj = Objective(
        value=lambda w: float(-(w @ w)),
        grad=lambda w: -2.0 * w,
        hess=lambda w: -2.0 * np.eye(w.size),
    )
    res = newton_minimize(obj, np.array([1.0]))
    assert res.status is MinimizeStatus.DIVERGED
    assert res.iterations == 0


# ----------------------------------------------------------------------- gd


def test_gd_single_step_is_plain_gradient_update():
    obj = quadratic([1.0, -2.0], [[3.0, 0.5], [0.5, 1.0]])
    w0 = np.array([0.25, 0.75])
    lr = 0.125
    res = gd_minimize(obj, w0, lr=lr, epochs=1)
    assert_array_equal(res.w_star, w0 - lr * obj.grad(w0))
    assert res.status is MinimizeStatus.MAX_ITERS
    assert res.iterations == 1


def test_gd_monotone_below_critical_rate():
    mat = np.array([[3.0, 0.5], [0.5, 1.0]])
    lipschitz = float(np.linalg.eigvalsh(mat).max())
    obj = quadratic([1.0, -2.0], mat)
    res = gd_minimize(obj, np.zeros(2), lr=1.9 / lipschitz, epochs=200)
    assert np.all(np.diff(res.trace.losses) <= 0.0)
    assert res.trace.losses[-1] <= 1e-15


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_gd_overflow_stops_with_offending_epoch():
    obj = quadratic([1.0, -2.0], [[3.0, 0.5], [0.5, 1.0]])
    res = gd_minimize(obj, np.zeros(2), lr=10.0, epochs=1000)
    assert res.status is MinimizeStatus.DIVERGED
    assert 0 < res.iterations < 1000
    assert len(res.trace) == res.iterations + 1
    assert not np.isfinite(res.trace.losses[-1])


def test_gd_optional_tolerance_stops_early():
    obj = quadratic([1.0, -2.0], np.eye(2))
    res = gd_minimize(obj, np.zeros(2), lr=0.5, epochs=10_000, grad_tol=1e-8)
    assert res.status is MinimizeStatus.CONVERGED
    assert res.final_grad_norm <= 1e-8
    assert res.iterations < 10_000


def test_gd_rejects_nonpositive_learning_rate():
    obj = quadratic([0.0], np.eye(1))
    with pytest.raises(ValueError, match="lr"):
        gd_minimize(obj, np.zeros(1), lr=0.0, epochs=1)


# --------------------------------------------------------------------- adam


def test_adam_zero_gradient_is_a_fixed_point():
    obj = Objective(value=lambda w: 1.0, grad=lambda w: np.zeros_like(w))
    w0 = np.array([0.3, -0.7])
    res = adam_minimize(obj, w0, epochs=10)
    assert_array_equal(res.w_star, w0)
    assert res.status is MinimizeStatus.MAX_ITERS


def test_adam_first_step_normalizes_the_gradient():
    obj = Objective(value=lambda w: float(w @ w), grad=lambda w: 2.0 * w)
    w0 = np.array([0.3, -1.2, 2.0])
    res = adam_minimize(obj, w0, epochs=1)
    g = 2.0 * w0
    # bias correction cancels at t=1, so the step is lr * g / (|g| + eps)
    assert_allclose(res.w_star, w0 - 0.001 * g / (np.abs(g) + 1e-8), rtol=1e-14)


def test_adam_drives_squared_norm_to_zero():
    obj = Objective(value=lambda w: float(w @ w), grad=lambda w: 2.0 * w)
    res = adam_minimize(obj, np.array([1.0, -2.0, 0.5]), epochs=5000, record_trace=False)
    assert obj.value(res.w_star) <= 1e-3


def test_adam_validates_hyperparameters():
    obj = Objective(value=lambda w: float(w @ w), grad=lambda w: 2.0 * w)
    with pytest.raises(ValueError, match="lr"):
        adam_minimize(obj, np.zeros(1), lr=-0.1)
    with pytest.raises(ValueError, match="beta"):
        adam_minimize(obj, np.zeros(1), beta1=1.0)


# ------------------------------------------------------------------- traces


def test_traces_are_bitwise_reproducible():
    spec = default_spec_d10(kappa=1.0)
    ref = bayes_direction(spec)
    runs = [
        gd_minimize(erm_objective(spec), np.zeros(10), lr=0.5, epochs=50, reference=ref)
        for _ in range(2)
    ]
    assert runs[0].trace.losses == runs[1].trace.losses
    assert runs[0].trace.grad_norms == runs[1].trace.grad_norms
    assert runs[0].trace.sims[1:] == runs[1].trace.sims[1:]
    assert_array_equal(runs[0].w_star, runs[1].w_star)
    newtons = [newton_minimize(erm_objective(spec), np.zeros(10)) for _ in range(2)]
    assert newtons[0].trace.losses == newtons[1].trace.losses


def test_trace_alignment_column():
    center = np.array([2.0, 1.0])
    obj = quadratic(center, np.eye(2))
    res = gd_minimize(obj, np.zeros(2), lr=0.25, epochs=100, reference=center)
    assert np.isnan(res.trace.sims[0])  # zero start has no direction
    assert res.trace.sims[-1] == cosine_similarity(res.w_star, center)
    assert res.trace.sims[-1] > 0.999


def test_trace_csv_round_trip(tmp_path):
    obj = quadratic([1.0, -1.0], np.eye(2))
    res = gd_minimize(obj, np.zeros(2), lr=0.3, epochs=5, reference=np.array([1.0, -1.0]))
    path = tmp_path / "trace.csv"
    res.trace.to_csv(path)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["epoch", "loss", "grad_norm", "sim"]
    assert len(rows) == len(res.trace) + 1
    for row, loss, gn, sim in zip(rows[1:], res.trace.losses, res.trace.grad_norms, res.trace.sims):
        assert float(row[1]) == loss
        assert float(row[2]) == gn
        parsed = float(row[3])
        assert parsed == sim or (np.isnan(parsed) and np.isnan(sim))


# -------------------------------------------------------- divergence checks


def two_point_data() -> Dataset:
    return Dataset(np.array([[1.0, 1.0], [-1.0, -1.0]]), np.array([1, 0]), seed=0)


def test_separable_descent_is_flagged_divergent():
    data = two_point_data()
    obj = empirical_erm_objective(data)
    res = gd_minimize(obj, np.zeros(2), lr=1.0, epochs=10_000, record_trace=False)
    assert res.status is MinimizeStatus.MAX_ITERS
    assert detect_divergence(obj, res)


def test_bounded_objectives_are_not_flagged():
    data = two_point_data()
    pairs = make_mixup_pairs(data, SCHEME_U, seed=7)
    obj = Objective(
        value=lambda w: mixup_loss(w, data, pairs),
        grad=lambda w: mixup_grad(w, data, pairs),
    )
    res = gd_minimize(obj, np.zeros(2), lr=0.5, epochs=20_000, record_trace=False)
    assert not detect_divergence(obj, res)

    quad = quadratic([1.0, -2.0], [[3.0, 0.5], [0.5, 1.0]])
    newton = newton_minimize(quad, np.zeros(2))
    assert not detect_divergence(quad, newton, radius=1e3 * np.sqrt(5.0))


def test_radius_rule_needs_a_decreasing_trace():
    obj = quadratic([0.0, 0.0], np.eye(2))
    w_far = np.array([100.0, 0.0])
    shrinking = Trace([0, 1], [1.0, 0.5], [1.0, 0.5], [np.nan, np.nan])
    growing = Trace([0, 1], [0.5, 1.0], [0.5, 1.0], [np.nan, np.nan])
    flagged = MinimizeResult(w_far, MinimizeStatus.MAX_ITERS, 1, 0.5, shrinking)
    spared = MinimizeResult(w_far, MinimizeStatus.MAX_ITERS, 1, 1.0, growing)
    assert detect_divergence(obj, flagged, radius=10.0)
    assert not detect_divergence(obj, spared, radius=10.0)
    assert not detect_divergence(obj, flagged, radius=1e6)


def test_implicit_bias_aligns_with_max_margin_direction():
    rng = np.random.default_rng(11)
    y = np.array([1, 1, 1, 0, 0, 0])
    x = rng.standard_normal((6, 2)) * 0.4 + (2.0 * y - 1.0)[:, None] * np.array([1.5, 0.3])
    data = Dataset(x, y, seed=11)
    margin = solve_max_margin(data)
    assert margin.feasible
    obj = empirical_erm_objective(data)
    res = gd_minimize(obj, np.zeros(2), lr=1.0, epochs=100_000, record_trace=False)
    assert cosine_similarity(res.w_star, margin.w_bar) >= 0.99


def test_status_literals():
    assert MinimizeStatus.CONVERGED.value == "Converged"
    assert MinimizeStatus.MAX_ITERS.value == "MaxIters"
    assert MinimizeStatus.DIVERGED.value == "Diverged"
