"""Empirical training losses for linear classifiers: plain logistic loss,
pairwise-mixed (convex combination) loss, and coordinate-masked loss.

The mixed losses average over all n^2 ordered pairs of training points. A
pair (i, j) contributes a pseudo-point built from x_i and x_j together with
a fractional label; the diagonal pairs reduce to the raw points by
construction. All losses expose analytic gradients and Hessians on the
linear model w.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from .model import Dataset

__all__ = [
    "logistic_loss",
    "logistic_d1",
    "logistic_d2",
    "LambdaLaw",
    "BetaLaw",
    "UniformLaw",
    "PointMassLaw",
    "MixMap",
    "IdentityMap",
    "MidpointMap",
    "TabulatedMap",
    "MixupScheme",
    "MaskScheme",
    "BernoulliMaskScheme",
    "ExplicitMaskScheme",
    "TrainMode",
    "PairDraws",
    "make_mixup_pairs",
    "make_mask_pairs",
    "erm_loss",
    "erm_grad",
    "erm_hess",
    "mixup_loss",
    "mixup_grad",
    "mixup_hess",
    "mask_loss",
    "mask_grad",
    "mask_hess",
]


# ------------------------------------------------------------------ logistic


def logistic_loss(z):
    """log(1 + exp(-z)) evaluated stably for any magnitude of z."""
    z = np.asarray(z, dtype=float)
    return np.log1p(np.exp(-np.abs(z))) + np.maximum(-z, 0.0)


def logistic_d1(z):
    """First derivative -1 / (1 + e^z), written overflow-free."""
    return -expit(-np.asarray(z, dtype=float))


def logistic_d2(z):
    """Second derivative e^z / (1 + e^z)^2 = sigmoid(z) sigmoid(-z)."""
    z = np.asarray(z, dtype=float)
    return expit(z) * expit(-z)


def _extended_sum(a: np.ndarray) -> float:
    # extended-precision accumulation; the n^2 pair grids run to 250k terms
    # and plain float64 reduction would not hold the 1e-14 oracle tolerance
    return float(np.sum(a, dtype=np.longdouble))


# ------------------------------------------------------------- mixing weight


class LambdaLaw:
    """Distribution of the mixing weight, supported on [0, 1]."""

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        raise NotImplementedError

    def density(self, lam: np.ndarray) -> np.ndarray:
        """Density on (0, 1); only meaningful for the continuous laws."""
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    @property
    def is_point(self) -> bool:
        return False


def _beta_from_gammas(rng: np.random.Generator, alpha: float, size) -> np.ndarray:
    g1 = rng.standard_gamma(alpha, size=size)
    g2 = rng.standard_gamma(alpha, size=size)
    return g1 / (g1 + g2)


@dataclass(frozen=True)
class BetaLaw(LambdaLaw):
    """Symmetric Beta(alpha, alpha) mixing weight."""

    alpha: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")

    def sample(self, rng, size):
        return _beta_from_gammas(rng, self.alpha, size)

    def density(self, lam):
        from scipy.stats import beta as beta_dist

        return beta_dist.pdf(np.asarray(lam, dtype=float), self.alpha, self.alpha)

    def mean(self):
        return 0.5


@dataclass(frozen=True)
class UniformLaw(LambdaLaw):
    """Uniform mixing weight on [0, 1]."""

    def sample(self, rng, size):
        return rng.random(size)

    def density(self, lam):
        return np.ones_like(np.asarray(lam, dtype=float))

    def mean(self):
        return 0.5


@dataclass(frozen=True)
class PointMassLaw(LambdaLaw):
    value: float

    def __post_init__(self):
        if not (0.0 <= self.value <= 1.0):
            raise ValueError("point mass must lie in [0, 1]")

    def sample(self, rng, size):
        return np.full(size, self.value)

    def mean(self):
        return self.value

    @property
    def is_point(self):
        return True


# -------------------------------------------------------------------- g maps


class MixMap:
    """Map applied to the mixing weight before forming the input mixture."""

    name = "base"

    def __call__(self, lam: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class IdentityMap(MixMap):
    name = "identity"

    def __call__(self, lam):
        return np.asarray(lam, dtype=float)


class MidpointMap(MixMap):
    """g == 1/2 everywhere. Deliberately degenerate; used in negative tests."""

    name = "midpoint"

    def __call__(self, lam):
        return np.full_like(np.asarray(lam, dtype=float), 0.5)


class TabulatedMap(MixMap):
    """Piecewise-linear g given by sample points on [0, 1]."""

    name = "tabulated"

    def __init__(self, points: Sequence[float], values: Sequence[float]):
        points = np.asarray(points, dtype=float)
        values = np.asarray(values, dtype=float)
        if points.ndim != 1 or points.shape != values.shape or len(points) < 2:
            raise ValueError("need matching 1-d point/value tables")
        if np.any(np.diff(points) <= 0):
            raise ValueError("points must be strictly increasing")
        if np.any(values < 0) or np.any(values > 1):
            raise ValueError("values must lie in [0, 1]")
        self.points = points
        self.values = values

    def __call__(self, lam):
        return np.interp(np.asarray(lam, dtype=float), self.points, self.values)


# ------------------------------------------------------------------- schemes


@dataclass(frozen=True)
class MixupScheme:
    """Mixing law (lambda distribution and g map) for the pairwise loss.

    A scheme is considered valid when mixing actually happens with positive
    probability (some lambda in (0, 1) with g(lambda) != 1/2) and g crosses
    1/2 exactly where lambda does: g(z) > 1/2 iff z > 1/2.
    """

    lambda_law: LambdaLaw
    g: MixMap = field(default_factory=IdentityMap)

    @property
    def valid(self) -> bool:
        zs = np.linspace(0.0, 1.0, 2001)
        gs = self.g(zs)
        upper = zs > 0.5
        if np.any(gs[upper] <= 0.5) or np.any(gs[~upper] > 0.5):
            return False
        law = self.lambda_law
        if law.is_point:
            v = law.value
            return 0.0 < v < 1.0 and float(self.g(np.array([v]))[0]) != 0.5
        interior = (zs > 0.0) & (zs < 1.0)
        return bool(np.any(gs[interior] != 0.5))

    def require_valid(self):
        if not self.valid:
            raise ValueError(
                "degenerate mixing scheme: needs P[lambda in (0,1), g(lambda) != 1/2] > 0 "
                "and g(z) > 1/2 exactly when z > 1/2"
            )

    def to_json_dict(self) -> dict:
        law = self.lambda_law
        if isinstance(law, BetaLaw):
            obj = {"type": "beta", "alpha": law.alpha}
        elif isinstance(law, UniformLaw):
            obj = {"type": "uniform"}
        elif isinstance(law, PointMassLaw):
            obj = {"type": "point", "value": law.value}
        else:
            raise ValueError(f"cannot serialize lambda law {law!r}")
        obj["g"] = self.g.name
        return obj

    @classmethod
    def from_json_dict(cls, obj: dict) -> "MixupScheme":
        kind = obj["type"]
        if kind == "beta":
            law = BetaLaw(float(obj.get("alpha", 1.0)))
        elif kind == "uniform":
            law = UniformLaw()
        elif kind == "point":
            law = PointMassLaw(float(obj["value"]))
        else:
            raise ValueError(f"unknown lambda law type {kind!r}")
        gname = obj.get("g", "identity")
        if gname == "identity":
            g = IdentityMap()
        elif gname == "midpoint":
            g = MidpointMap()
        else:
            raise ValueError(f"unknown g map {gname!r}")
        return cls(law, g)


class MaskScheme:
    """Joint law of a binary coordinate mask and a mixing weight."""

    def sample(self, rng: np.random.Generator, shape, d: int):
        """Draw (masks, lambdas) with masks of shape ``shape + (d,)``."""
        raise NotImplementedError

    def assumption_holds(self, mu: np.ndarray) -> bool:
        """Whether the signed means mu * (2M - 1) span R^d and every mask
        co-occurs with a non-degenerate mixing weight."""
        raise NotImplementedError

    def to_json_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class BernoulliMaskScheme(MaskScheme):
    """lambda ~ Beta(alpha, alpha); mask bits i.i.d. Bernoulli(lambda).

    Conditioned on lambda, P[M = M0 | lambda] = lambda^{|M0|}
    (1-lambda)^{d-|M0|}, so every one of the 2^d masks has positive
    probability.
    """

    alpha: float = 1.0

    def __post_init__(self):
        if not (self.alpha > 0):
            raise ValueError("alpha must be positive")

    def sample(self, rng, shape, d):
        lam = _beta_from_gammas(rng, self.alpha, shape)
        bits = rng.random(tuple(np.atleast_1d(shape)) + (d,)) < lam[..., None]
        return bits.astype(np.uint8), lam

    def assumption_holds(self, mu):
        mu = np.asarray(mu, dtype=float)
        # all sign patterns occur, so the span condition reduces to mu
        # having no zero coordinate; lambda is continuous on (0, 1)
        return bool(np.all(mu != 0.0))

    def to_json_dict(self):
        return {"type": "bernoulli_mask", "alpha": self.alpha}


@dataclass(frozen=True)
class ExplicitMaskScheme(MaskScheme):
    """Finite-support mask law: entries (mask, lambda law, probability)."""

    masks: tuple
    lambda_laws: tuple
    probs: tuple

    @classmethod
    def from_entries(cls, entries) -> "ExplicitMaskScheme":
        masks, laws, probs = [], [], []
        for mask, law, prob in entries:
            masks.append(tuple(int(b) for b in mask))
            laws.append(law)
            probs.append(float(prob))
        if abs(sum(probs) - 1.0) > 1e-12:
            raise ValueError("mask probabilities must sum to 1")
        if any(p <= 0 for p in probs):
            raise ValueError("mask probabilities must be positive")
        return cls(tuple(masks), tuple(laws), tuple(probs))

    def sample(self, rng, shape, d):
        masks = np.asarray(self.masks, dtype=np.uint8)
        if masks.shape[1] != d:
            raise ValueError(f"scheme masks have dimension {masks.shape[1]}, data has {d}")
        shape = tuple(np.atleast_1d(shape))
        idx = rng.choice(len(self.probs), size=shape, p=np.asarray(self.probs))
        lam = np.empty(shape)
        for k, law in enumerate(self.lambda_laws):
            where = idx == k
            count = int(np.count_nonzero(where))
            if count:
                lam[where] = law.sample(rng, count)
        return masks[idx], lam

    def assumption_holds(self, mu):
        mu = np.asarray(mu, dtype=float)
        signed = mu[None, :] * (2.0 * np.asarray(self.masks, dtype=float) - 1.0)
        if np.linalg.matrix_rank(signed) < mu.shape[0]:
            return False
        for law in self.lambda_laws:
            if law.is_point and not (0.0 < law.value < 1.0):
                return False
        return True

    def to_json_dict(self):
        return {
            "type": "explicit_mask",
            "entries": [
                {"mask": list(m), "lambda": _law_json(law), "prob": p}
                for m, law, p in zip(self.masks, self.lambda_laws, self.probs)
            ],
        }


def _law_json(law: LambdaLaw) -> dict:
    if isinstance(law, BetaLaw):
        return {"type": "beta", "alpha": law.alpha}
    if isinstance(law, UniformLaw):
        return {"type": "uniform"}
    if isinstance(law, PointMassLaw):
        return {"type": "point", "value": law.value}
    raise ValueError(f"cannot serialize lambda law {law!r}")


def mask_scheme_from_json_dict(obj: dict) -> MaskScheme:
    if obj["type"] == "bernoulli_mask":
        return BernoulliMaskScheme(float(obj.get("alpha", 1.0)))
    if obj["type"] == "explicit_mask":
        entries = []
        for ent in obj["entries"]:
            law_obj = ent["lambda"]
            if law_obj["type"] == "beta":
                law = BetaLaw(float(law_obj["alpha"]))
            elif law_obj["type"] == "uniform":
                law = UniformLaw()
            else:
                law = PointMassLaw(float(law_obj["value"]))
            entries.append((ent["mask"], law, ent["prob"]))
        return ExplicitMaskScheme.from_entries(entries)
    raise ValueError(f"unknown mask scheme type {obj['type']!r}")


# ---------------------------------------------------------------- pair draws


class TrainMode(str, Enum):
    """Whether pair draws stay fixed for a whole training run or are
    redrawn every epoch. The loss definition fixes one draw per ordered
    pair; per-epoch resampling is the common practice variant."""

    FIXED_PER_PAIR = "FixedPerPair"
    RESAMPLE_PER_EPOCH = "ResamplePerEpoch"


@dataclass(eq=False)
class PairDraws:
    """One realization of the mixing randomness over the n x n pair grid."""

    kind: str  # "mixup" or "mask"
    mode: TrainMode
    seed: int
    n: int
    lam: np.ndarray  # (n, n)
    g_of_lam: Optional[np.ndarray] = None  # (n, n), mixup only
    masks: Optional[np.ndarray] = None  # (n, n, d) uint8, mask only
    _mixed: Optional[np.ndarray] = field(default=None, repr=False)
    _mixed_key: Optional[int] = field(default=None, repr=False)

    def mixed_inputs(self, data: Dataset) -> np.ndarray:
        """All n^2 masked pseudo-inputs as an (n^2, d) array.

        Cached per dataset; the cache is rebuilt if the draws are evaluated
        against a different Dataset object of the same size.
        """
        if self.kind != "mask":
            raise ValueError("mixed_inputs is only materialized for mask draws")
        if self._mixed is None or self._mixed_key != id(data):
            mf = self.masks.astype(float)
            mixed = mf * data.x[:, None, :] + (1.0 - mf) * data.x[None, :, :]
            self._mixed = mixed.reshape(self.n * self.n, data.d)
            self._mixed_key = id(data)
        return self._mixed

    def mixed_labels(self, data: Dataset) -> np.ndarray:
        y = data.y.astype(float)
        return self.lam * y[:, None] + (1.0 - self.lam) * y[None, :]


def make_mixup_pairs(
    data: Dataset,
    scheme: MixupScheme,
    seed: int,
    mode: TrainMode = TrainMode.FIXED_PER_PAIR,
    check_scheme: bool = True,
) -> PairDraws:
    """Draw i.i.d. mixing weights for every ordered pair of points.

    ``check_scheme=False`` skips the validity gate; deliberately degenerate
    schemes (for example a point mass at 1) are useful in tests.
    """
    if data.n < 2:
        raise ValueError("pairwise mixing needs at least two points")
    if check_scheme:
        scheme.require_valid()
    rng = np.random.Generator(np.random.Philox(seed))
    lam = scheme.lambda_law.sample(rng, (data.n, data.n))
    return PairDraws(
        kind="mixup",
        mode=mode,
        seed=seed,
        n=data.n,
        lam=lam,
        g_of_lam=scheme.g(lam),
    )


def make_mask_pairs(
    data: Dataset,
    scheme: MaskScheme,
    seed: int,
    mode: TrainMode = TrainMode.FIXED_PER_PAIR,
) -> PairDraws:
    """Draw (mask, lambda) for every ordered pair of points."""
    if data.n < 2:
        raise ValueError("pairwise mixing needs at least two points")
    rng = np.random.Generator(np.random.Philox(seed))
    masks, lam = scheme.sample(rng, (data.n, data.n), data.d)
    return PairDraws(
        kind="mask",
        mode=mode,
        seed=seed,
        n=data.n,
        lam=lam,
        masks=masks,
    )


# ----------------------------------------------------------------- plain loss


def _check_dim(w: np.ndarray, data: Dataset) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (data.d,):
        raise ValueError(f"w has shape {w.shape}, expected ({data.d},)")
    return w


def erm_loss(w, data: Dataset) -> float:
    """(1/n) sum_i [y_i l(w.x_i) + (1 - y_i) l(-w.x_i)]."""
    w = _check_dim(w, data)
    z = data.x @ w
    return _extended_sum(logistic_loss(data.signs() * z)) / data.n


def erm_grad(w, data: Dataset) -> np.ndarray:
    w = _check_dim(w, data)
    z = data.x @ w
    s = expit(z) - data.y
    return data.x.T @ s / data.n


def erm_hess(w, data: Dataset) -> np.ndarray:
    w = _check_dim(w, data)
    z = data.x @ w
    d2 = logistic_d2(z)
    return (data.x * d2[:, None]).T @ data.x / data.n


# ----------------------------------------------------------------- mixup loss


def _mixup_arrays(w, data, pairs):
    if pairs.kind != "mixup" or pairs.n != data.n:
        raise ValueError("pair draws do not belong to this dataset")
    w = _check_dim(w, data)
    u = data.x @ w
    g = pairs.g_of_lam
    z = g * u[:, None] + (1.0 - g) * u[None, :]
    ymix = pairs.mixed_labels(data)
    return w, u, g, z, ymix


def mixup_loss(w, data: Dataset, pairs: PairDraws) -> float:
    """(1/n^2) sum over ordered pairs of the fractional-label logistic loss."""
    _, _, _, z, ymix = _mixup_arrays(w, data, pairs)
    terms = ymix * logistic_loss(z) + (1.0 - ymix) * logistic_loss(-z)
    return _extended_sum(terms) / (data.n**2)


def mixup_grad(w, data: Dataset, pairs: PairDraws) -> np.ndarray:
    _, _, g, z, ymix = _mixup_arrays(w, data, pairs)
    s = expit(z) - ymix
    weights = (s * g).sum(axis=1) + (s * (1.0 - g)).sum(axis=0)
    return data.x.T @ weights / (data.n**2)


def mixup_hess(w, data: Dataset, pairs: PairDraws) -> np.ndarray:
    _, _, g, z, ymix = _mixup_arrays(w, data, pairs)
    d2 = logistic_d2(z)
    mid = d2 * g * (1.0 - g)
    row = (d2 * g * g).sum(axis=1)
    col = (d2 * (1.0 - g) ** 2).sum(axis=0)
    cross = data.x.T @ (mid @ data.x)
    diag_part = (data.x * (row + col)[:, None]).T @ data.x
    return (diag_part + cross + cross.T) / (data.n**2)


# ------------------------------------------------------------------ mask loss


def _mask_arrays(w, data, pairs):
    if pairs.kind != "mask" or pairs.n != data.n:
        raise ValueError("pair draws do not belong to this dataset")
    w = _check_dim(w, data)
    mixed = pairs.mixed_inputs(data)
    z = mixed @ w
    ymix = pairs.mixed_labels(data).reshape(-1)
    return w, mixed, z, ymix


def mask_loss(w, data: Dataset, pairs: PairDraws) -> float:
    _, _, z, ymix = _mask_arrays(w, data, pairs)
    terms = ymix * logistic_loss(z) + (1.0 - ymix) * logistic_loss(-z)
    return _extended_sum(terms) / (data.n**2)


def mask_grad(w, data: Dataset, pairs: PairDraws) -> np.ndarray:
    _, mixed, z, ymix = _mask_arrays(w, data, pairs)
    s = expit(z) - ymix
    return mixed.T @ s / (data.n**2)


def mask_hess(w, data: Dataset, pairs: PairDraws) -> np.ndarray:
    _, mixed, z, _ = _mask_arrays(w, data, pairs)
    d2 = logistic_d2(z)
    return (mixed * d2[:, None]).T @ mixed / (data.n**2)
