import math

import numpy as np
import pytest

from sepmix.model import Dataset
from sepmix.losses import (
    BernoulliMaskScheme,
    BetaLaw,
    ExplicitMaskScheme,
    IdentityMap,
    MidpointMap,
    MixupScheme,
    PointMassLaw,
    TabulatedMap,
    UniformLaw,
    erm_grad,
    erm_hess,
    erm_loss,
    logistic_d2,
    logistic_loss,
    make_mask_pairs,
    make_mixup_pairs,
    mask_grad,
    mask_hess,
    mask_loss,
    mixup_grad,
    mixup_hess,
    mixup_loss,
)

LOG2 = math.log(2.0)


def random_dataset(rng, n, d):
    x = rng.standard_normal((n, d))
    y = rng.integers(0, 2, size=n)
    if y.min() == y.max():  # ensure both labels appear
        y[0] = 1 - y[0]
    return Dataset(x, y, seed=0)


def scheme_uniform():
    return MixupScheme(BetaLaw(1.0), IdentityMap())


# ------------------------------------------------------------------ logistic


def test_logistic_loss_reference_values():
    assert logistic_loss(0.0) == pytest.approx(LOG2, abs=1e-16)
    assert logistic_loss(1.0) == pytest.approx(0.31326168751822286, abs=1e-15)
    # stability at extreme arguments: exact asymptotes, no overflow
    assert logistic_loss(1000.0) == 0.0
    assert logistic_loss(-1000.0) == 1000.0


def test_logistic_derivatives_match_finite_differences():
    zs = np.linspace(-30, 30, 101)
    h = 1e-6
    d1_fd = (logistic_loss(zs + h) - logistic_loss(zs - h)) / (2 * h)
    from sepmix.losses import logistic_d1

    assert np.max(np.abs(logistic_d1(zs) - d1_fd)) < 1e-8
    h2 = 1e-4  # second difference needs a wider step to beat roundoff
    d2_fd = (logistic_loss(zs + h2) - 2 * logistic_loss(zs) + logistic_loss(zs - h2)) / h2**2
    assert np.max(np.abs(logistic_d2(zs) - d2_fd)) < 1e-6


# ----------------------------------------------------------------- erm basics


def test_erm_loss_at_zero_is_log2():
    rng = np.random.default_rng(1)
    data = random_dataset(rng, 13, 3)
    assert erm_loss(np.zeros(3), data) == pytest.approx(LOG2, abs=1e-15)


def test_erm_single_sample_values():
    data = Dataset(np.array([[1.0, 0.0]]), np.array([1]), seed=0)
    w = np.array([1.0, 0.0])
    assert erm_loss(w, data) == pytest.approx(0.31326168751822286, abs=1e-15)
    grad0 = erm_grad(np.zeros(2), data)
    assert np.allclose(grad0, [-0.5, 0.0], atol=1e-16)


def test_erm_hessian_at_zero():
    rng = np.random.default_rng(2)
    data = random_dataset(rng, 9, 4)
    expect = data.x.T @ data.x / (4 * data.n)
    assert np.allclose(erm_hess(np.zeros(4), data), expect, atol=1e-14)


def test_erm_loss_matches_unvectorized_sum():
    rng = np.random.default_rng(3)
    for trial in range(20):
        data = random_dataset(rng, 5, 3)
        w = rng.standard_normal(3)
        acc = []
        for i in range(data.n):
            z = float(w @ data.x[i])
            if data.y[i] == 1:
                acc.append(math.log1p(math.exp(-abs(z))) + max(-z, 0.0))
            else:
                acc.append(math.log1p(math.exp(-abs(-z))) + max(z, 0.0))
        assert abs(erm_loss(w, data) - math.fsum(acc) / data.n) < 1e-14


def test_erm_dimension_mismatch():
    rng = np.random.default_rng(4)
    data = random_dataset(rng, 5, 3)
    with pytest.raises(ValueError):
        erm_loss(np.zeros(4), data)


# --------------------------------------------------------------- mixup basics


def test_mixup_loss_at_zero_is_log2():
    rng = np.random.default_rng(5)
    data = random_dataset(rng, 8, 3)
    pairs = make_mixup_pairs(data, scheme_uniform(), seed=9)
    assert mixup_loss(np.zeros(3), data, pairs) == pytest.approx(LOG2, abs=1e-15)


def test_mixup_midpoint_hand_computation():
    # lambda fixed at 1/2 with identity g: both cross pairs sit at the
    # midpoint with label 1/2
    data = Dataset(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1, 0]), seed=0)
    # lambda == 1/2 with identity g is degenerate (g(lambda) == 1/2 surely),
    # so the validity gate must be bypassed for this hand computation
    scheme = MixupScheme(PointMassLaw(0.5), IdentityMap())
    assert not scheme.valid
    pairs = make_mixup_pairs(data, scheme, seed=0, check_scheme=False)
    w = np.array([0.7, -0.4])
    a, b = 0.7, -0.4
    mid = 0.5 * a + 0.5 * b
    expect = (
        logistic_loss(a)
        + 0.5 * logistic_loss(mid) + 0.5 * logistic_loss(-mid)
        + 0.5 * logistic_loss(mid) + 0.5 * logistic_loss(-mid)
        + logistic_loss(-b)
    ) / 4.0
    assert mixup_loss(w, data, pairs) == pytest.approx(float(expect), abs=1e-15)


def test_mixup_point_mass_one_reduces_to_erm():
    rng = np.random.default_rng(6)
    data = random_dataset(rng, 6, 2)
    scheme = MixupScheme(PointMassLaw(1.0), IdentityMap())
    pairs = make_mixup_pairs(data, scheme, seed=1, check_scheme=False)
    for _ in range(5):
        w = rng.standard_normal(2)
        assert mixup_loss(w, data, pairs) == pytest.approx(erm_loss(w, data), abs=1e-15)
        assert np.allclose(mixup_grad(w, data, pairs), erm_grad(w, data), atol=1e-15)


def test_mixup_matches_pair_enumeration():
    rng = np.random.default_rng(7)
    for trial in range(10):
        data = random_dataset(rng, 4, 2)
        pairs = make_mixup_pairs(data, scheme_uniform(), seed=100 + trial)
        w = rng.standard_normal(2)
        acc = []
        gacc = np.zeros(2)
        for i in range(4):
            for j in range(4):
                lam = pairs.lam[i, j]
                g = lam  # identity map
                xt = g * data.x[i] + (1 - g) * data.x[j]
                yt = lam * data.y[i] + (1 - lam) * data.y[j]
                z = float(w @ xt)
                acc.append(yt * float(logistic_loss(z)) + (1 - yt) * float(logistic_loss(-z)))
                s = 1.0 / (1.0 + math.exp(-z)) - yt
                gacc += s * xt
        assert abs(mixup_loss(w, data, pairs) - math.fsum(acc) / 16) < 1e-14
        assert np.max(np.abs(mixup_grad(w, data, pairs) - gacc / 16)) < 1e-14


def test_mixup_diagonal_pairs_are_raw_points():
    rng = np.random.default_rng(8)
    data = random_dataset(rng, 5, 3)
    pairs = make_mixup_pairs(data, scheme_uniform(), seed=3)
    ymix = pairs.mixed_labels(data)
    assert np.allclose(np.diag(ymix), data.y, atol=0)


def test_mixup_requires_two_points():
    data = Dataset(np.array([[1.0, 0.0]]), np.array([1]), seed=0)
    with pytest.raises(ValueError):
        make_mixup_pairs(data, scheme_uniform(), seed=0)


# ---------------------------------------------------------------- mask basics


def test_mask_coordinate_paste():
    data = Dataset(np.array([[1.0, 2.0], [3.0, 4.0]]), np.array([1, 0]), seed=0)
    scheme = ExplicitMaskScheme.from_entries([((1, 0), PointMassLaw(0.5), 1.0)])
    pairs = make_mask_pairs(data, scheme, seed=0)
    mixed = pairs.mixed_inputs(data).reshape(2, 2, 2)
    assert np.array_equal(mixed[0, 1], [1.0, 4.0])
    assert np.array_equal(mixed[1, 0], [3.0, 2.0])
    assert np.array_equal(mixed[0, 0], data.x[0])


def test_mask_loss_at_zero_is_log2():
    rng = np.random.default_rng(9)
    data = random_dataset(rng, 6, 3)
    pairs = make_mask_pairs(data, BernoulliMaskScheme(1.0), seed=2)
    assert mask_loss(np.zeros(3), data, pairs) == pytest.approx(LOG2, abs=1e-15)


def test_mask_all_ones_lambda_one_reduces_to_erm():
    rng = np.random.default_rng(10)
    data = random_dataset(rng, 5, 2)
    scheme = ExplicitMaskScheme.from_entries([((1, 1), PointMassLaw(1.0), 1.0)])
    pairs = make_mask_pairs(data, scheme, seed=4)
    for _ in range(5):
        w = rng.standard_normal(2)
        assert mask_loss(w, data, pairs) == pytest.approx(erm_loss(w, data), abs=1e-15)


def test_mask_matches_pair_enumeration():
    rng = np.random.default_rng(11)
    for trial in range(10):
        data = random_dataset(rng, 3, 2)
        pairs = make_mask_pairs(data, BernoulliMaskScheme(1.0), seed=200 + trial)
        w = rng.standard_normal(2)
        acc = []
        for i in range(3):
            for j in range(3):
                m = pairs.masks[i, j].astype(float)
                lam = pairs.lam[i, j]
                xt = m * data.x[i] + (1 - m) * data.x[j]
                yt = lam * data.y[i] + (1 - lam) * data.y[j]
                z = float(w @ xt)
                acc.append(yt * float(logistic_loss(z)) + (1 - yt) * float(logistic_loss(-z)))
        assert abs(mask_loss(w, data, pairs) - math.fsum(acc) / 9) < 1e-14


# ----------------------------------------------- shared derivative properties


def _fd_grad(fun, w, h=1e-5):
    g = np.zeros_like(w)
    for k in range(len(w)):
        e = np.zeros_like(w)
        e[k] = h
        g[k] = (fun(w + e) - fun(w - e)) / (2 * h)
    return g


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(12)
    checked = 0
    for trial in range(34):
        n = int(rng.integers(3, 8))
        d = int(rng.integers(2, 5))
        data = random_dataset(rng, n, d)
        w = rng.standard_normal(d)
        mpairs = make_mixup_pairs(data, scheme_uniform(), seed=trial)
        kpairs = make_mask_pairs(data, BernoulliMaskScheme(1.0), seed=trial)
        cases = [
            (lambda v: erm_loss(v, data), lambda v: erm_grad(v, data)),
            (lambda v: mixup_loss(v, data, mpairs), lambda v: mixup_grad(v, data, mpairs)),
            (lambda v: mask_loss(v, data, kpairs), lambda v: mask_grad(v, data, kpairs)),
        ]
        for fun, grad in cases:
            g = grad(w)
            fd = _fd_grad(fun, w)
            denom = max(np.linalg.norm(g), 1e-8)
            assert np.linalg.norm(g - fd) / denom < 1e-6
            checked += 1
    assert checked >= 100


def test_hessians_symmetric_psd_and_match_fd():
    rng = np.random.default_rng(13)
    for trial in range(10):
        data = random_dataset(rng, 5, 3)
        w = rng.standard_normal(3)
        mpairs = make_mixup_pairs(data, scheme_uniform(), seed=trial)
        kpairs = make_mask_pairs(data, BernoulliMaskScheme(1.0), seed=trial)
        cases = [
            (lambda v: erm_grad(v, data), erm_hess(w, data)),
            (lambda v: mixup_grad(v, data, mpairs), mixup_hess(w, data, mpairs)),
            (lambda v: mask_grad(v, data, kpairs), mask_hess(w, data, kpairs)),
        ]
        for gradfun, hess in cases:
            assert np.max(np.abs(hess - hess.T)) <= 1e-12
            assert np.min(np.linalg.eigvalsh(hess)) >= -1e-10
            fd = np.column_stack([
                (gradfun(w + h_e) - gradfun(w - h_e)) / 2e-5
                for h_e in (1e-5 * np.eye(3))
            ])
            assert np.max(np.abs(hess - fd)) < 1e-6


def test_losses_are_convex_along_segments():
    rng = np.random.default_rng(14)
    for trial in range(20):
        data = random_dataset(rng, 6, 3)
        mpairs = make_mixup_pairs(data, scheme_uniform(), seed=trial)
        kpairs = make_mask_pairs(data, BernoulliMaskScheme(1.0), seed=trial)
        w1 = rng.standard_normal(3)
        w2 = rng.standard_normal(3)
        t = float(rng.random())
        for fun in (
            lambda v: erm_loss(v, data),
            lambda v: mixup_loss(v, data, mpairs),
            lambda v: mask_loss(v, data, kpairs),
        ):
            lhs = fun(t * w1 + (1 - t) * w2)
            rhs = t * fun(w1) + (1 - t) * fun(w2)
            assert lhs <= rhs + 1e-12


def test_sign_symmetry_under_label_flip():
    # (x, y) -> (-x, 1 - y) is a symmetry of the data family; each loss is
    # invariant under applying it to the training set with the same w
    rng = np.random.default_rng(15)
    data = random_dataset(rng, 6, 3)
    flipped = Dataset(-data.x, 1 - data.y, seed=data.seed)
    w = rng.standard_normal(3)
    assert erm_loss(w, data) == pytest.approx(erm_loss(w, flipped), abs=1e-15)
    mpairs = make_mixup_pairs(data, scheme_uniform(), seed=77)
    assert mixup_loss(w, data, mpairs) == pytest.approx(
        mixup_loss(w, flipped, mpairs), abs=1e-15
    )
    kpairs = make_mask_pairs(data, BernoulliMaskScheme(1.0), seed=78)
    assert mask_loss(w, data, kpairs) == pytest.approx(
        mask_loss(w, flipped, kpairs), abs=1e-15
    )


# ------------------------------------------------------------ scheme validity


def test_scheme_validity_gates():
    assert MixupScheme(BetaLaw(1.0), IdentityMap()).valid
    assert MixupScheme(UniformLaw(), IdentityMap()).valid
    assert MixupScheme(PointMassLaw(0.3), IdentityMap()).valid
    # g stuck at 1/2 never mixes informatively
    assert not MixupScheme(BetaLaw(1.0), MidpointMap()).valid
    # lambda stuck at an endpoint never mixes at all
    assert not MixupScheme(PointMassLaw(1.0), IdentityMap()).valid
    assert not MixupScheme(PointMassLaw(0.0), IdentityMap()).valid
    # a g map that crosses 1/2 at the wrong place
    bad_g = TabulatedMap([0.0, 1.0], [0.2, 0.4])
    assert not MixupScheme(BetaLaw(1.0), bad_g).valid
    with pytest.raises(ValueError):
        rng = np.random.default_rng(0)
        data = random_dataset(rng, 4, 2)
        make_mixup_pairs(data, MixupScheme(PointMassLaw(1.0)), seed=0)


def test_mask_assumption_check():
    mu = np.array([0.3, -0.2, 0.5])
    assert BernoulliMaskScheme(1.0).assumption_holds(mu)
    assert not BernoulliMaskScheme(1.0).assumption_holds(np.array([0.3, 0.0, 0.5]))
    only_ones = ExplicitMaskScheme.from_entries([((1, 1, 1), BetaLaw(1.0), 1.0)])
    assert not only_ones.assumption_holds(mu)  # rank 1 cannot span R^3
    spanning = ExplicitMaskScheme.from_entries([
        ((1, 1, 1), BetaLaw(1.0), 0.25),
        ((0, 1, 1), BetaLaw(1.0), 0.25),
        ((1, 0, 1), BetaLaw(1.0), 0.25),
        ((1, 1, 0), BetaLaw(1.0), 0.25),
    ])
    assert spanning.assumption_holds(mu)
    degenerate_lambda = ExplicitMaskScheme.from_entries([
        ((1, 1, 1), PointMassLaw(1.0), 0.5),
        ((0, 0, 1), BetaLaw(1.0), 0.5),
    ])
    assert not degenerate_lambda.assumption_holds(mu)


def test_beta_law_sampling_reproducible_and_in_range():
    law = BetaLaw(2.0)
    a = law.sample(np.random.Generator(np.random.Philox(5)), 1000)
    b = law.sample(np.random.Generator(np.random.Philox(5)), 1000)
    assert np.array_equal(a, b)
    assert np.all((a > 0) & (a < 1))
    # symmetric law: mean near 1/2
    assert abs(a.mean() - 0.5) < 0.03


def test_bernoulli_mask_conditional_rate():
    # bits are Bernoulli(lambda) given lambda: regress bit frequency on lambda
    scheme = BernoulliMaskScheme(1.0)
    rng = np.random.Generator(np.random.Philox(6))
    masks, lam = scheme.sample(rng, (20000,), 32)
    rate = masks.mean(axis=1)
    assert np.corrcoef(rate, lam)[0, 1] > 0.95
    assert abs(masks.mean() - 0.5) < 0.01


def test_scheme_serialization_roundtrip():
    scheme = MixupScheme(BetaLaw(1.0), IdentityMap())
    obj = scheme.to_json_dict()
    assert obj == {"type": "beta", "alpha": 1.0, "g": "identity"}
    back = MixupScheme.from_json_dict(obj)
    assert isinstance(back.lambda_law, BetaLaw) and back.lambda_law.alpha == 1.0

    mask = BernoulliMaskScheme(1.0)
    assert mask.to_json_dict() == {"type": "bernoulli_mask", "alpha": 1.0}
