"""Two-layer ReLU experiments on planar data with a sine-shaped class split.

The linear theory in the rest of the package says plain training loses the
shape of the optimal separator once classes grow far apart, while pairwise
mixing keeps it.  This module reproduces that contrast on a nonlinear model:
two horizontal bands of points whose boundary oscillates like a sine curve,
fit by a small ReLU network under plain, mixed, or masked-mixing training.
Decision surfaces are exported as sign grids for external plotting, and a
nonlinearity score (deviation of the zero-level curve from its own
least-squares line) quantifies how much of the oscillation a trained model
kept.

Training is full-batch Adam in float64 on a single thread, so runs are
bitwise reproducible per seed; the mixing draws come from a numpy Philox
stream and the parameter initialization from a private torch generator,
leaving global RNG state untouched.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Union

import numpy as np
import torch

from .losses import BernoulliMaskScheme, BetaLaw, MaskScheme, MixupScheme
from .model import Dataset

__all__ = [
    "AdamConfig",
    "DecisionGrid",
    "ErmTraining",
    "MaskMixupTraining",
    "MixupTraining",
    "SineDataConfig",
    "TwoLayerReLU",
    "classification_accuracy",
    "decision_grid",
    "gen_sine_data",
    "large_noise_config",
    "nonlinearity_score",
    "sign_change_counts",
    "small_noise_config",
    "train_mlp",
    "training_loss",
]


# ---------------------------------------------------------------- data


@dataclass(frozen=True)
class SineDataConfig:
    """Generator settings for the two-band planar dataset.

    Each class draws ``n`` points: the first coordinate uniform on
    ``x_range``, the second at ``+-class_offset/2`` plus
    ``amplitude * sin(frequency * x1)`` plus centered Gaussian noise.
    """

    n: int = 250
    x_range: tuple[float, float] = (-3.0, 3.0)
    amplitude: float = 0.5
    frequency: float = math.pi
    class_offset: float = 2.0
    noise_sd: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError("n must be a positive integer")
        lo, hi = self.x_range
        if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
            raise ValueError("x_range must be a finite increasing interval")
        if not (math.isfinite(self.amplitude) and math.isfinite(self.frequency)):
            raise ValueError("amplitude and frequency must be finite")
        if not (self.class_offset > 0.0):
            raise ValueError("class_offset must be positive")
        if not (self.noise_sd >= 0.0):
            raise ValueError("noise_sd must be nonnegative")


def large_noise_config(seed: int = 0, n: int = 250) -> SineDataConfig:
    """Less separable regime: bands overlap enough that shape matters."""
    return SineDataConfig(n=n, noise_sd=0.4, seed=seed)


def small_noise_config(seed: int = 0, n: int = 250) -> SineDataConfig:
    """Highly separable regime: a wide empty margin between the bands."""
    return SineDataConfig(n=n, noise_sd=0.05, seed=seed)


def gen_sine_data(cfg: SineDataConfig) -> Dataset:
    """Balanced two-class sample; class 0 block first, then class 1."""
    rng = np.random.Generator(np.random.Philox(cfg.seed))
    lo, hi = cfg.x_range
    blocks = []
    for cls in (0, 1):
        x1 = rng.uniform(lo, hi, cfg.n)
        noise = cfg.noise_sd * rng.standard_normal(cfg.n)
        x2 = (2 * cls - 1) * cfg.class_offset / 2.0
        x2 = x2 + cfg.amplitude * np.sin(cfg.frequency * x1) + noise
        blocks.append(np.column_stack([x1, x2]))
    x = np.vstack(blocks)
    y = np.repeat(np.array([0, 1]), cfg.n)
    return Dataset(x=x, y=y, seed=cfg.seed)


# ---------------------------------------------------------------- model


class TwoLayerReLU(torch.nn.Module):
    """One hidden ReLU layer producing a pre-sigmoid logit.

    Parameters are float64 and initialized symmetric-uniform with fan-in
    scaling (``U(-1/sqrt(fan_in), 1/sqrt(fan_in))`` per layer) from a
    private generator, so two models built with the same seed are
    identical.
    """

    def __init__(self, hidden: int = 500, in_dim: int = 2, seed: int = 0):
        super().__init__()
        if hidden < 1 or in_dim < 1:
            raise ValueError("hidden and in_dim must be positive")
        gen = torch.Generator().manual_seed(int(seed))

        def uniform(shape, bound):
            t = torch.empty(shape, dtype=torch.float64)
            t.uniform_(-bound, bound, generator=gen)
            return torch.nn.Parameter(t)

        b_in = 1.0 / math.sqrt(in_dim)
        b_hid = 1.0 / math.sqrt(hidden)
        self.W1 = uniform((hidden, in_dim), b_in)
        self.b1 = uniform((hidden,), b_in)
        self.w2 = uniform((hidden,), b_hid)
        self.b2 = uniform((), b_hid)

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def in_dim(self) -> int:
        return self.W1.shape[1]

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = torch.relu(x @ self.W1.T + self.b1)
        return h @ self.w2 + self.b2

    def to_json_dict(self) -> dict:
        return {
            "w1": self.W1.detach().numpy().tolist(),
            "b1": self.b1.detach().numpy().tolist(),
            "w2": self.w2.detach().numpy().tolist(),
            "b2": float(self.b2.detach()),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TwoLayerReLU":
        w1 = np.asarray(obj["w1"], dtype=float)
        b1 = np.asarray(obj["b1"], dtype=float)
        w2 = np.asarray(obj["w2"], dtype=float)
        b2 = float(obj["b2"])
        if w1.ndim != 2 or b1.shape != (w1.shape[0],) or w2.shape != (w1.shape[0],):
            raise ValueError("checkpoint arrays have inconsistent shapes")
        if not all(
            np.all(np.isfinite(a)) for a in (w1, b1, w2, np.array([b2]))
        ):
            raise ValueError("checkpoint parameters must be finite")
        model = cls(hidden=w1.shape[0], in_dim=w1.shape[1], seed=0)
        with torch.no_grad():
            model.W1.copy_(torch.from_numpy(w1))
            model.b1.copy_(torch.from_numpy(b1))
            model.w2.copy_(torch.from_numpy(w2))
            model.b2.fill_(b2)
        return model

    @classmethod
    def from_json(cls, text: str) -> "TwoLayerReLU":
        return cls.from_json_dict(json.loads(text))


# ------------------------------------------------------------- training


@dataclass(frozen=True)
class AdamConfig:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if not (self.lr > 0.0):
            raise ValueError("lr must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ValueError("betas must lie in [0, 1)")
        if not (self.eps > 0.0):
            raise ValueError("eps must be positive")


@dataclass(frozen=True)
class ErmTraining:
    """Plain logistic training on the raw sample."""


@dataclass(frozen=True)
class MixupTraining:
    """Pairwise input/label mixing with the given scheme."""

    scheme: MixupScheme = field(default_factory=lambda: MixupScheme(BetaLaw(1.0)))


@dataclass(frozen=True)
class MaskMixupTraining:
    """Coordinate-masked pair mixing with the given mask scheme."""

    scheme: MaskScheme = field(default_factory=lambda: BernoulliMaskScheme(1.0))


TrainingMethod = Union[ErmTraining, MixupTraining, MaskMixupTraining]


def training_loss(
    model: TwoLayerReLU, inputs: torch.Tensor, targets: torch.Tensor
) -> torch.Tensor:
    """Mean logistic loss of the logits against (possibly fractional) labels."""
    return torch.nn.functional.binary_cross_entropy_with_logits(
        model(inputs), targets
    )


def _epoch_batch(method, x64, y64, x_t, y_t, idx, rng):
    """Inputs and targets for one epoch; draws consume ``rng`` in order."""
    if isinstance(method, ErmTraining):
        return x_t, y_t
    i_idx, j_idx = idx
    m = i_idx.shape[0]
    if isinstance(method, MixupTraining):
        lam = np.asarray(method.scheme.lambda_law.sample(rng, m), dtype=float)
        g = np.asarray(method.scheme.g(lam), dtype=float)
        if np.all(lam == 1.0) and np.all(g == 1.0):
            # degenerate draw: every pair collapses to its first point, and
            # the grid mean over n copies equals the sample mean, so reuse
            # the plain batch to keep the arithmetic identical
            return x_t, y_t
        inputs = g[:, None] * x64[i_idx] + (1.0 - g[:, None]) * x64[j_idx]
    else:
        masks, lam = method.scheme.sample(rng, m, x64.shape[1])
        mf = masks.astype(float)
        inputs = mf * x64[i_idx] + (1.0 - mf) * x64[j_idx]
    targets = lam * y64[i_idx] + (1.0 - lam) * y64[j_idx]
    return torch.from_numpy(inputs), torch.from_numpy(targets)


def train_mlp(
    data: Dataset,
    method: TrainingMethod,
    adam_cfg: AdamConfig | None = None,
    epochs: int = 1500,
    seed: int = 0,
    pairing: str = "full",
    hidden: int = 500,
    check_scheme: bool = True,
) -> TwoLayerReLU:
    """Full-batch Adam training, bitwise reproducible per seed.

    ``pairing="full"`` mixes over all n^2 ordered pairs each epoch with
    fresh draws; ``pairing="permuted"`` pairs each point with a fresh random
    permutation partner instead (n mixed points per epoch), trading
    fidelity to the pairwise loss for speed.  ``check_scheme=False`` admits
    deliberately degenerate mixing schemes such as a point mass at 1.

    Raises ``ArithmeticError`` naming the epoch if the loss leaves the
    finite range.
    """
    if not isinstance(method, (ErmTraining, MixupTraining, MaskMixupTraining)):
        raise ValueError(f"unknown training method {method!r}")
    if not isinstance(epochs, (int, np.integer)) or epochs < 0:
        raise ValueError("epochs must be a nonnegative integer")
    if pairing not in ("full", "permuted"):
        raise ValueError("pairing must be 'full' or 'permuted'")
    if check_scheme and isinstance(method, MixupTraining):
        method.scheme.require_valid()
    adam_cfg = adam_cfg or AdamConfig()

    model = TwoLayerReLU(hidden=hidden, in_dim=data.d, seed=seed)
    if epochs == 0:
        return model

    x64 = np.array(data.x, dtype=float)
    y64 = np.array(data.y, dtype=float)
    x_t = torch.from_numpy(x64)
    y_t = torch.from_numpy(y64)
    rng = np.random.Generator(np.random.Philox(seed))
    n = data.n
    full_idx = (np.repeat(np.arange(n), n), np.tile(np.arange(n), n))
    optimizer = torch.optim.Adam(
        model.parameters(),
        lr=adam_cfg.lr,
        betas=(adam_cfg.beta1, adam_cfg.beta2),
        eps=adam_cfg.eps,
    )

    prev_threads = torch.get_num_threads()
    torch.set_num_threads(1)
    try:
        for epoch in range(epochs):
            if pairing == "full" or isinstance(method, ErmTraining):
                idx = full_idx
            else:
                idx = (np.arange(n), rng.permutation(n))
            inputs, targets = _epoch_batch(method, x64, y64, x_t, y_t, idx, rng)
            loss = training_loss(model, inputs, targets)
            if not torch.isfinite(loss):
                raise ArithmeticError(
                    f"non-finite training loss at epoch {epoch}"
                )
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
    finally:
        torch.set_num_threads(prev_threads)
    return model


# ------------------------------------------------------- decision surface


class DecisionGrid(NamedTuple):
    """Cell-center coordinates and the logit sign at each cell, row-major
    (one row per y value, scanning x within the row)."""

    xs: np.ndarray
    ys: np.ndarray
    signs: np.ndarray  # (ny, nx) of +-1

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("x,y,sign\n")
            for row, yv in enumerate(self.ys):
                for col, xv in enumerate(self.xs):
                    fh.write(
                        f"{float(xv)!r},{float(yv)!r},{int(self.signs[row, col])}\n"
                    )


def decision_grid(
    model: TwoLayerReLU,
    bounds: tuple[float, float, float, float],
    resolution: tuple[int, int],
) -> DecisionGrid:
    """Sign of the logit at the cell centers of a rectangle.

    ``bounds`` is ``(xmin, xmax, ymin, ymax)`` and ``resolution`` the cell
    counts ``(nx, ny)``; a 1x1 resolution samples the rectangle center.
    Zero logits count as positive.  The whole grid is evaluated in one
    batched forward pass.
    """
    xmin, xmax, ymin, ymax = (float(v) for v in bounds)
    if not (xmin < xmax and ymin < ymax):
        raise ValueError("bounds must describe a nonempty rectangle")
    nx, ny = resolution
    if nx < 1 or ny < 1:
        raise ValueError("resolution must be at least 1x1")
    xs = xmin + (np.arange(nx) + 0.5) * (xmax - xmin) / nx
    ys = ymin + (np.arange(ny) + 0.5) * (ymax - ymin) / ny
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    with torch.no_grad():
        logits = model(torch.from_numpy(points)).numpy().reshape(ny, nx)
    signs = np.where(logits >= 0.0, 1, -1).astype(np.int8)
    return DecisionGrid(xs=xs, ys=ys, signs=signs)


def sign_change_counts(grid: DecisionGrid) -> np.ndarray:
    """Sign flips along each vertical scanline (fixed x, increasing y)."""
    s = grid.signs
    return np.sum(s[1:, :] != s[:-1, :], axis=0)


def classification_accuracy(model: TwoLayerReLU, data: Dataset) -> float:
    """Fraction of points whose logit sign matches the binary label."""
    with torch.no_grad():
        logits = model(torch.from_numpy(np.array(data.x, dtype=float))).numpy()
    return float(np.mean((logits >= 0.0).astype(int) == data.y))


def nonlinearity_score(
    model: TwoLayerReLU,
    x_range: tuple[float, float] = (-3.0, 3.0),
    y_range: tuple[float, float] = (-2.0, 2.0),
    columns: int = 121,
    rows: int = 401,
) -> float:
    """Mean absolute deviation of the zero-level curve from its own line.

    For each of ``columns`` vertical scanlines the logit's zero crossing
    nearest ``y = 0`` is located by linear interpolation on a ``rows``-point
    scan; the score is the mean absolute residual of those crossings around
    their least-squares line.  A straight boundary scores ~0 regardless of
    slope.  Raises ``ValueError`` when fewer than two scanlines cross zero
    inside the window.
    """
    xs = np.linspace(x_range[0], x_range[1], columns)
    ys = np.linspace(y_range[0], y_range[1], rows)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    with torch.no_grad():
        logits = model(torch.from_numpy(points)).numpy().reshape(rows, columns)

    curve_x: list[float] = []
    curve_y: list[float] = []
    for col in range(columns):
        line = logits[:, col]
        flips = np.flatnonzero(np.sign(line[1:]) != np.sign(line[:-1]))
        if flips.size == 0:
            continue
        lo, hi = line[flips], line[flips + 1]
        frac = lo / (lo - hi)
        crossings = ys[flips] + frac * (ys[flips + 1] - ys[flips])
        best = crossings[int(np.argmin(np.abs(crossings)))]
        curve_x.append(float(xs[col]))
        curve_y.append(float(best))
    if len(curve_x) < 2:
        raise ValueError("no zero-level curve inside the scan window")
    coeffs = np.polyfit(curve_x, curve_y, 1)
    resid = np.asarray(curve_y) - np.polyval(coeffs, curve_x)
    return float(np.mean(np.abs(resid)))
