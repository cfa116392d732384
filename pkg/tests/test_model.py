import json

import numpy as np
import pytest

from sepmix.model import (
    KAPPA_INF,
    ConditioningError,
    Dataset,
    ProblemSpec,
    bayes_direction,
    cosine_similarity,
    default_spec_d10,
    default_spec_d20,
    sample_dataset,
)


def spec_2d(kappa=1.0):
    # ||mu||^2 scaled to match the spectral norm of sigma exactly
    sigma = np.array([[1.0, 0.3], [0.3, 0.7]])
    top = np.max(np.linalg.eigvalsh(sigma))
    mu = np.array([2.0, 1.0])
    mu = mu * np.sqrt(top) / np.linalg.norm(mu)
    return ProblemSpec(mu, sigma, kappa)


# ---------------------------------------------------------------- validation


def test_rejects_unnormalized_mu():
    with pytest.raises(ValueError):
        ProblemSpec(np.array([1.0, 0.0]), 2.0 * np.eye(2), 1.0)


def test_rejects_asymmetric_sigma():
    sigma = np.array([[1.0, 0.2], [0.1, 1.0]])
    with pytest.raises(ValueError):
        ProblemSpec(np.array([1.0, 0.0]), sigma, 1.0)


def test_rejects_indefinite_sigma():
    sigma = np.array([[1.0, 0.0], [0.0, -0.5]])
    with pytest.raises(ValueError):
        ProblemSpec(np.array([1.0, 0.0]), sigma, 1.0)


def test_rejects_zero_mu():
    with pytest.raises(ValueError):
        ProblemSpec(np.zeros(2), np.eye(2), 1.0)


def test_rejects_nonpositive_and_float_inf_kappa():
    mu = np.array([1.0, 0.0])
    for bad in (0.0, -1.0, float("inf"), float("nan")):
        with pytest.raises(ValueError):
            ProblemSpec(mu, np.eye(2), bad)
    ProblemSpec(mu, np.eye(2), KAPPA_INF)  # the marker itself is fine


def test_rejects_empty_sample_request():
    with pytest.raises(ValueError):
        sample_dataset(spec_2d(), 0, 1)


# ------------------------------------------------------------------ sampling


def test_infinite_kappa_samples_exactly_on_means():
    mu = np.array([1.0, 0.0])
    spec = ProblemSpec(mu, np.eye(2), KAPPA_INF)
    data = sample_dataset(spec, 4, seed=123)
    for i in range(4):
        sign = 2 * data.y[i] - 1
        assert np.array_equal(data.x[i], sign * mu)


def test_sampling_is_bit_reproducible():
    spec = default_spec_d10(2.0)
    a = sample_dataset(spec, 100, seed=42)
    b = sample_dataset(spec, 100, seed=42)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    c = sample_dataset(spec, 100, seed=43)
    assert not np.array_equal(a.x, c.x)


def test_sample_mean_matches_mu():
    # Monte Carlo moment oracle: the signed sample mean estimates mu with
    # componentwise standard error sqrt(sigma_jj / kappa / N).
    spec = default_spec_d10(2.0)
    n = 10**6
    data = sample_dataset(spec, n, seed=7)
    signed = data.signs()[:, None] * data.x
    est = signed.mean(axis=0)
    se = np.sqrt(np.diag(spec.sigma) / 2.0 / n)
    assert np.all(np.abs(est - spec.mu) < 4.0 * se)


def test_sample_covariance_matches_scaled_sigma():
    mu = np.array([1.0, 0.0])
    spec = ProblemSpec(mu, np.eye(2), 4.0)
    n = 10**6
    data = sample_dataset(spec, n, seed=1)
    resid = data.x - data.signs()[:, None] * mu
    cov = resid.T @ resid / n
    assert np.max(np.abs(cov - 0.25 * np.eye(2))) < 0.01 * 0.25


def test_label_flip_symmetry():
    # (x, y) -> (-x, 1 - y) leaves the joint law invariant; compare the
    # transformed sample with a fresh draw through first and second moments.
    spec = spec_2d(kappa=1.5)
    n = 10**5
    a = sample_dataset(spec, n, seed=11)
    b = sample_dataset(spec, n, seed=12)
    ax, ay = -a.x, 1 - a.y
    for label in (0, 1):
        xa = ax[ay == label]
        xb = b.x[b.y == label]
        se = np.sqrt(np.diag(spec.sigma) / spec.kappa / len(xa))
        assert np.all(np.abs(xa.mean(axis=0) - xb.mean(axis=0)) < 6 * se)
        ca = np.cov(xa.T)
        cb = np.cov(xb.T)
        assert np.max(np.abs(ca - cb)) < 0.05


# ----------------------------------------------------------- bayes direction


def _elimination_solve(a, b):
    """Independent Gaussian elimination with partial pivoting."""
    a = a.astype(float).copy()
    b = b.astype(float).copy()
    n = len(b)
    for col in range(n):
        piv = col + int(np.argmax(np.abs(a[col:, col])))
        if piv != col:
            a[[col, piv]] = a[[piv, col]]
            b[[col, piv]] = b[[piv, col]]
        for row in range(col + 1, n):
            f = a[row, col] / a[col, col]
            a[row, col:] -= f * a[col, col:]
            b[row] -= f * b[col]
    x = np.zeros(n)
    for row in range(n - 1, -1, -1):
        x[row] = (b[row] - a[row, row + 1:] @ x[row + 1:]) / a[row, row]
    return x


def test_bayes_direction_identity_covariance():
    mu = np.array([1.0, 0.0])
    spec = ProblemSpec(mu, np.eye(2), 1.0)
    assert np.allclose(bayes_direction(spec), mu, atol=1e-12)


def test_bayes_direction_diagonal_covariance():
    mu = np.array([1.0, 1.0])
    mu = mu * 2.0 / np.linalg.norm(mu)  # spectral norm of diag(1, 4) is 4
    spec = ProblemSpec(mu, np.diag([1.0, 4.0]), 1.0)
    v = bayes_direction(spec)
    expect = np.array([1.0, 0.25])
    assert abs(cosine_similarity(v, expect) - 1.0) < 1e-12


def test_bayes_direction_matches_elimination_oracle():
    spec = default_spec_d10()
    v = bayes_direction(spec)
    ref = _elimination_solve(spec.sigma, spec.mu)
    assert np.max(np.abs(v - ref) / np.abs(ref)) < 1e-8
    assert np.linalg.norm(spec.sigma @ v - spec.mu) <= 1e-10 * np.linalg.norm(spec.mu)


def test_bayes_direction_scale_invariant():
    base = spec_2d()
    v0 = bayes_direction(base)
    for c in (0.5, 2.0, 10.0):
        spec = ProblemSpec(np.sqrt(c) * base.mu, c * base.sigma, 1.0)
        v = bayes_direction(spec)
        assert abs(cosine_similarity(v, v0) - 1.0) < 1e-12


def test_bayes_direction_conditioning_error():
    sigma = np.diag([1.0, 1e-13])
    mu = np.array([1.0, 0.0])
    spec = ProblemSpec(mu, sigma, 1.0)
    with pytest.raises(ConditioningError):
        bayes_direction(spec)


# --------------------------------------------------------- cosine similarity


def test_cosine_trivials():
    e1 = np.array([1.0, 0.0])
    e2 = np.array([0.0, 1.0])
    assert cosine_similarity(e1, e1) == 1.0
    assert cosine_similarity(e1, e2) == 0.0
    assert abs(cosine_similarity(np.array([1.0, 1.0]), e1) - 0.7071067811865476) < 1e-12


def test_cosine_scaling():
    rng = np.random.default_rng(0)
    u = rng.standard_normal(5)
    for c in (0.1, 3.0):
        assert cosine_similarity(u, c * u) == 1.0
        assert cosine_similarity(u, -c * u) == -1.0


def test_cosine_zero_vector_errors():
    with pytest.raises(ValueError):
        cosine_similarity(np.zeros(3), np.ones(3))


# ----------------------------------------------------------- canned instances


def test_d10_constants():
    spec = default_spec_d10()
    assert spec.mu.shape == (10,)
    assert spec.mu[0] == -0.1067
    assert spec.mu[-1] == -0.2839
    assert spec.sigma[0, 1] == 0.0904
    assert np.array_equal(spec.sigma, spec.sigma.T)
    assert np.min(np.linalg.eigvalsh(spec.sigma)) > 0


def test_d10_spectral_norm_against_dense_eig():
    spec = default_spec_d10()
    top = float(np.max(np.linalg.eigvalsh(spec.sigma)))
    assert abs(spec.spectral_norm - top) < 1e-8 * top


def test_d20_block_structure():
    spec = default_spec_d20(kappa=3.0)
    assert spec.d == 20
    assert np.array_equal(spec.mu[:10], spec.mu[10:])
    assert np.all(spec.sigma[:10, 10:] == 0.0)
    assert np.all(spec.sigma[10:, :10] == 0.0)
    assert np.array_equal(spec.sigma[:10, :10], spec.sigma[10:, 10:])


# -------------------------------------------------------------- serialization


def test_spec_json_roundtrip():
    spec = spec_2d(kappa=2.5)
    again = ProblemSpec.from_json(spec.to_json())
    assert np.array_equal(again.mu, spec.mu)
    assert np.array_equal(again.sigma, spec.sigma)
    assert again.kappa == 2.5

    inf_spec = ProblemSpec(np.array([1.0, 0.0]), np.eye(2), KAPPA_INF)
    obj = json.loads(inf_spec.to_json())
    assert obj["kappa"] == "inf"
    back = ProblemSpec.from_json_dict(obj)
    assert back.kappa is KAPPA_INF


def test_dataset_csv_roundtrip(tmp_path):
    spec = spec_2d()
    data = sample_dataset(spec, 17, seed=5)
    path = tmp_path / "data.csv"
    data.to_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == "x0,x1,y"
    back = Dataset.from_csv(path, seed=5)
    assert np.array_equal(back.x, data.x)
    assert np.array_equal(back.y, data.y)
