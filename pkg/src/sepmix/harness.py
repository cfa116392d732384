"""Experiment orchestration: seeded trials, factorial sweeps, and persistence.

A trial samples a fresh dataset, trains a linear classifier by the configured
method and optimizer, and records the cosine similarity between the final
weight and a target direction (the Bayes direction unless overridden).  The
sweep runs a full factorial over methods, separability levels, sample sizes,
and repetitions, emits raw and aggregated CSV tables, and is byte-identical
across reruns of the same configuration.  On top of the same trial runner,
:func:`estimate_sample_complexity` searches for the smallest sample size at
which a method hits a similarity target reliably, by doubling then bisection
with Wilson-interval gating.

Per-trial seeds derive from (base_seed, method, kappa, n, repetition) through
``numpy.random.SeedSequence``, so no two cells share a dataset and any single
trial can be replayed in isolation.  Trials are independent; set the
``SEPMIX_WORKERS`` environment variable to run them in worker processes.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .losses import (
    BernoulliMaskScheme,
    BetaLaw,
    MixupScheme,
    TrainMode,
    erm_grad,
    erm_hess,
    erm_loss,
    make_mask_pairs,
    make_mixup_pairs,
    mask_grad,
    mask_hess,
    mask_loss,
    mixup_grad,
    mixup_hess,
    mixup_loss,
)
from .maxmargin import is_separable
from .minimize import (
    MinimizeStatus,
    Objective,
    adam_minimize,
    detect_divergence,
    gd_minimize,
    newton_minimize,
)
from .model import (
    Dataset,
    ProblemSpec,
    bayes_direction,
    cosine_similarity,
    default_spec_d10,
    default_spec_d20,
    sample_dataset,
)

__all__ = [
    "METHODS",
    "AggregateRow",
    "ComplexityResult",
    "SweepConfig",
    "SweepTable",
    "TrainSettings",
    "TrialConfig",
    "TrialResult",
    "estimate_sample_complexity",
    "load_problem_spec",
    "run_trial",
    "sweep",
    "trial_seed",
    "write_sweep",
]

METHODS = ("erm", "mixup", "mask")
_METHOD_ID = {m: k for k, m in enumerate(METHODS)}

# statuses that carry a usable final direction
_DIRECTED = ("converged", "diverged-with-direction")


# ------------------------------------------------------------ configuration


@dataclass(frozen=True)
class TrainSettings:
    """How a single trial trains: a first-order protocol or damped Newton.

    ``optimizer`` is one of ``gd`` / ``adam`` / ``newton``; for ``newton``
    the ``lr`` is ignored and ``epochs`` caps the iteration count.
    """

    optimizer: str = "gd"
    lr: float = 1.0
    epochs: int = 1500

    def __post_init__(self):
        if self.optimizer not in ("gd", "adam", "newton"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if not (self.lr > 0.0 and math.isfinite(self.lr)):
            raise ValueError("lr must be positive and finite")
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 1:
            raise ValueError("epochs must be a positive integer")

    def to_json_dict(self) -> dict:
        return {"optimizer": self.optimizer, "lr": self.lr, "epochs": self.epochs}

    @classmethod
    def from_json_dict(cls, obj: dict) -> "TrainSettings":
        extra = set(obj) - {"optimizer", "lr", "epochs"}
        if extra:
            raise ValueError(f"unknown train settings {sorted(extra)}")
        out = cls(
            optimizer=obj.get("optimizer", "gd"),
            lr=float(obj.get("lr", 1.0)),
            epochs=int(obj.get("epochs", 1500)),
        )
        return out


def load_problem_spec(source: str, kappa: float) -> ProblemSpec:
    """Resolve a spec source name (``d10``/``d20``) or JSON file path.

    Files get the same relaxed norm check (1e-3) as the canned instances:
    hand-authored constants are typically printed to a few decimals, which
    the strict construction-time identity would reject.
    """
    if source == "d10":
        return default_spec_d10(kappa)
    if source == "d20":
        return default_spec_d20(kappa)
    path = Path(source)
    if not path.is_file():
        raise ValueError(
            f"spec source {source!r} is neither a built-in name nor a file"
        )
    spec = ProblemSpec.from_json(path.read_text(), normalization_tol=1e-3)
    return spec.with_kappa(kappa)


@dataclass(frozen=True)
class TrialConfig:
    """Everything one trial needs besides its seed."""

    method: str
    kappa: float
    n: int
    spec_source: str = "d10"
    train: TrainSettings = field(default_factory=TrainSettings)
    alpha: float = 1.0
    pair_mode: TrainMode = TrainMode.FIXED_PER_PAIR
    target_direction: Optional[tuple] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not (self.kappa > 0.0 and math.isfinite(self.kappa)):
            raise ValueError("kappa must be positive and finite")
        if not isinstance(self.n, (int, np.integer)) or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not (self.alpha > 0.0):
            raise ValueError("alpha must be positive")
        if (
            self.train.optimizer == "newton"
            and self.pair_mode is TrainMode.RESAMPLE_PER_EPOCH
        ):
            raise ValueError("newton training needs fixed pair draws")


@dataclass(frozen=True)
class SweepConfig:
    """Factorial sweep: methods x kappa_list x n_list x repetitions."""

    spec_source: str = "d10"
    methods: tuple = ("erm", "mixup", "mask")
    kappa_list: tuple = (0.5, 2.0)
    n_list: tuple = (500,)
    repetitions: int = 50
    train: TrainSettings = field(default_factory=TrainSettings)
    alpha: float = 1.0
    epsilon: float = 0.1
    delta: float = 0.1
    base_seed: int = 0
    out: Optional[str] = None
    pair_mode: TrainMode = TrainMode.FIXED_PER_PAIR

    def __post_init__(self):
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(
            self, "kappa_list", tuple(float(k) for k in self.kappa_list)
        )
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if not self.methods or any(m not in METHODS for m in self.methods):
            raise ValueError(f"methods must be a nonempty subset of {METHODS}")
        if not self.kappa_list or not all(
            k > 0 and math.isfinite(k) for k in self.kappa_list
        ):
            raise ValueError("kappa_list must be nonempty with positive entries")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ValueError("n_list must be nonempty with positive entries")
        if not isinstance(self.repetitions, (int, np.integer)) or self.repetitions < 1:
            raise ValueError("repetitions must be a positive integer")
        if not (0.0 < self.epsilon < 1.0 and 0.0 < self.delta < 1.0):
            raise ValueError("epsilon and delta must lie in (0, 1)")
        if not (self.alpha > 0.0):
            raise ValueError("alpha must be positive")

    def trial(self, method: str, kappa: float, n: int) -> TrialConfig:
        return TrialConfig(
            method=method,
            kappa=float(kappa),
            n=int(n),
            spec_source=self.spec_source,
            train=self.train,
            alpha=self.alpha,
            pair_mode=self.pair_mode,
        )

    def to_json_dict(self) -> dict:
        obj = dataclasses.asdict(self)
        obj["train"] = self.train.to_json_dict()
        obj["pair_mode"] = self.pair_mode.value
        obj["methods"] = list(self.methods)
        obj["kappa_list"] = list(self.kappa_list)
        obj["n_list"] = list(self.n_list)
        return obj

    @classmethod
    def from_json_dict(cls, obj: dict) -> "SweepConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown sweep config keys {sorted(extra)}")
        kwargs = dict(obj)
        if "train" in kwargs:
            kwargs["train"] = TrainSettings.from_json_dict(kwargs["train"])
        if "pair_mode" in kwargs:
            kwargs["pair_mode"] = TrainMode(kwargs["pair_mode"])
        return cls(**kwargs)


# ------------------------------------------------------------------ trials


@dataclass(frozen=True)
class TrialResult:
    """One row of the raw sweep table.

    ``final_sim`` is present exactly when the run produced a usable
    direction: either it finished with a finite minimizer (``converged``)
    or it was escaping to infinity along a settled direction
    (``diverged-with-direction``, the separable plain-loss case).
    """

    method: str
    kappa: float
    n: int
    seed: int
    final_sim: Optional[float]
    status: str
    separable: Optional[bool]
    epochs_run: int

    def __post_init__(self):
        has_sim = self.final_sim is not None
        if has_sim != (self.status in _DIRECTED):
            raise ValueError("final_sim present iff the status carries a direction")
        if has_sim and not (-1.0 <= self.final_sim <= 1.0):
            raise ValueError("final_sim must lie in [-1, 1]")


def trial_seed(base_seed: int, method: str, kappa: float, n: int, rep: int) -> int:
    """Deterministic per-trial seed; distinct across cells and repetitions."""
    entropy = (
        int(base_seed),
        _METHOD_ID[method],
        int(round(float(kappa) * 1_000_000)),
        int(n),
        int(rep),
    )
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])


def _pair_seed(seed: int, epoch: int) -> int:
    return int(
        np.random.SeedSequence((int(seed), 1, int(epoch))).generate_state(
            1, np.uint64
        )[0]
    )


def _objective(trial: TrialConfig, data: Dataset, seed: int) -> Objective:
    if trial.method == "erm":
        return Objective(
            value=lambda w: erm_loss(w, data),
            grad=lambda w: erm_grad(w, data),
            hess=lambda w: erm_hess(w, data),
        )
    if trial.method == "mixup":
        scheme = MixupScheme(BetaLaw(trial.alpha))
        make = lambda ep: make_mixup_pairs(
            data, scheme, seed=_pair_seed(seed, ep), mode=trial.pair_mode
        )
        fns = (mixup_loss, mixup_grad, mixup_hess)
    else:
        scheme = BernoulliMaskScheme(trial.alpha)
        make = lambda ep: make_mask_pairs(
            data, scheme, seed=_pair_seed(seed, ep), mode=trial.pair_mode
        )
        fns = (mask_loss, mask_grad, mask_hess)
    loss_fn, grad_fn, hess_fn = fns

    if trial.pair_mode is TrainMode.FIXED_PER_PAIR:
        pairs = make(0)
        return Objective(
            value=lambda w: loss_fn(w, data, pairs),
            grad=lambda w: grad_fn(w, data, pairs),
            hess=lambda w: hess_fn(w, data, pairs),
        )

    # per-epoch redraws: the optimizer evaluates the gradient exactly once
    # per epoch, so a call counter reproduces the fresh-draws protocol;
    # value/hess reuse the current epoch's draws for diagnostics
    state = {"epoch": 0}

    def grad(w):
        pairs = make(state["epoch"])
        state["epoch"] += 1
        return grad_fn(w, data, pairs)

    def value(w):
        return loss_fn(w, data, make(max(state["epoch"] - 1, 0)))

    return Objective(value=value, grad=grad, hess=None)


def _erm_separable(data: Dataset, w: np.ndarray) -> Optional[bool]:
    """Exact separability when affordable, else a margin certificate."""
    if data.n <= 4096:
        return bool(is_separable(data))
    if np.all(np.isfinite(w)) and np.all(data.signs() * (data.x @ w) > 0.0):
        return True
    return None


def run_trial(trial: TrialConfig, seed: int) -> TrialResult:
    """Sample a dataset, train, and report the final direction quality.

    Optimizer failures are folded into ``status`` (prefixed ``error:``)
    rather than raised, so one bad cell never aborts a sweep.
    """
    base = dict(method=trial.method, kappa=trial.kappa, n=trial.n, seed=seed)
    try:
        spec = load_problem_spec(trial.spec_source, trial.kappa)
        data = sample_dataset(spec, trial.n, seed)
        if trial.target_direction is not None:
            target = np.asarray(trial.target_direction, dtype=float)
        else:
            target = bayes_direction(spec)
        obj = _objective(trial, data, seed)
        w0 = np.zeros(data.d)
        settings = trial.train
        if settings.optimizer == "newton":
            res = newton_minimize(obj, w0, max_iters=settings.epochs)
        elif settings.optimizer == "adam":
            res = adam_minimize(
                obj, w0, lr=settings.lr, epochs=settings.epochs, record_trace=False
            )
        else:
            res = gd_minimize(
                obj, w0, lr=settings.lr, epochs=settings.epochs, record_trace=False
            )
    except Exception as exc:  # noqa: BLE001 - contract: record, never abort
        return TrialResult(
            **base,
            final_sim=None,
            status=f"error: {exc}",
            separable=None,
            epochs_run=0,
        )

    separable = None
    if trial.method == "erm":
        separable = _erm_separable(data, res.w_star)

    # a finite nonzero iterate always carries a direction; losses and
    # gradients here are finite whenever the iterate is, so anything else
    # means the step size blew the run up
    if not (np.all(np.isfinite(res.w_star)) and np.any(res.w_star)):
        return TrialResult(
            **base,
            final_sim=None,
            status=f"error: non-finite run after {res.iterations} epochs",
            separable=separable,
            epochs_run=res.iterations,
        )

    escaping = (
        res.status is MinimizeStatus.DIVERGED
        or detect_divergence(obj, res)
        or separable is True
    )
    status = "diverged-with-direction" if escaping else "converged"
    sim = cosine_similarity(res.w_star, target)
    return TrialResult(
        **base,
        final_sim=float(sim),
        status=status,
        separable=separable,
        epochs_run=res.iterations,
    )


# ------------------------------------------------------------------ sweeps


@dataclass(frozen=True)
class AggregateRow:
    method: str
    kappa: float
    n: int
    trials: int
    with_sim: int
    mean_sim: Optional[float]
    ci_lo: Optional[float]
    ci_hi: Optional[float]


@dataclass(frozen=True)
class SweepTable:
    raw: tuple
    aggregates: tuple

    def raw_csv(self) -> str:
        lines = ["method,kappa,n,seed,final_sim,status,separable"]
        for r in self.raw:
            sim = "" if r.final_sim is None else repr(r.final_sim)
            sep = "" if r.separable is None else str(r.separable).lower()
            lines.append(
                f"{r.method},{r.kappa!r},{r.n},{r.seed},{sim},{r.status},{sep}"
            )
        return "\n".join(lines) + "\n"

    def agg_csv(self) -> str:
        lines = ["method,kappa,n,trials,with_sim,mean_sim,ci_lo,ci_hi"]
        for a in self.aggregates:
            vals = [
                "" if v is None else repr(v)
                for v in (a.mean_sim, a.ci_lo, a.ci_hi)
            ]
            lines.append(
                f"{a.method},{a.kappa!r},{a.n},{a.trials},{a.with_sim},"
                + ",".join(vals)
            )
        return "\n".join(lines) + "\n"


def _aggregate(rows: Sequence[TrialResult]) -> tuple:
    cells: dict = {}
    order = []
    for r in rows:
        key = (r.method, r.kappa, r.n)
        if key not in cells:
            cells[key] = []
            order.append(key)
        cells[key].append(r)
    out = []
    for key in order:
        group = cells[key]
        sims = [r.final_sim for r in group if r.final_sim is not None]
        if sims:
            mean = float(np.mean(sims))
            if len(sims) >= 2:
                half = 1.96 * float(np.std(sims, ddof=1)) / math.sqrt(len(sims))
            else:
                half = 0.0
            agg = (mean, mean - half, mean + half)
        else:
            agg = (None, None, None)
        out.append(
            AggregateRow(
                method=key[0],
                kappa=key[1],
                n=key[2],
                trials=len(group),
                with_sim=len(sims),
                mean_sim=agg[0],
                ci_lo=agg[1],
                ci_hi=agg[2],
            )
        )
    return tuple(out)


def _run_one(task) -> TrialResult:
    trial, seed = task
    return run_trial(trial, seed)


def _worker_count() -> int:
    raw = os.environ.get("SEPMIX_WORKERS", "1")
    try:
        count = int(raw)
    except ValueError as exc:
        raise ValueError(f"SEPMIX_WORKERS must be an integer, got {raw!r}") from exc
    if count < 1:
        raise ValueError("SEPMIX_WORKERS must be at least 1")
    return count


def _run_tasks(tasks) -> list:
    workers = _worker_count()
    if workers == 1 or len(tasks) <= 1:
        return [_run_one(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, tasks, chunksize=1))


def sweep(config: SweepConfig) -> SweepTable:
    """Full factorial sweep; writes CSV artifacts when ``config.out`` is set.

    Row order is deterministic (methods, then kappa_list, then n_list, then
    repetitions, in configuration order) and independent of the worker
    count, so identical configurations produce byte-identical CSV files.
    """
    tasks = []
    for method in config.methods:
        for kappa in config.kappa_list:
            for n in config.n_list:
                trial = config.trial(method, kappa, n)
                for rep in range(config.repetitions):
                    seed = trial_seed(config.base_seed, method, kappa, n, rep)
                    tasks.append((trial, seed))
    rows = tuple(_run_tasks(tasks))
    table = SweepTable(raw=rows, aggregates=_aggregate(rows))
    if config.out is not None:
        write_sweep(table, config.out, config)
    return table


def write_sweep(table: SweepTable, out_dir, config: SweepConfig) -> dict:
    """Persist ``raw.csv``, ``agg.csv`` and ``meta.json``; returns the meta."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    raw = table.raw_csv()
    agg = table.agg_csv()
    (out / "raw.csv").write_text(raw)
    (out / "agg.csv").write_text(agg)
    digest = hashlib.sha256((raw + agg).encode()).hexdigest()
    meta = {
        "config": config.to_json_dict(),
        "trials": len(table.raw),
        "run_hash": digest,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return meta


# -------------------------------------------------------- sample complexity


@dataclass(frozen=True)
class ComplexityResult:
    """Outcome of the smallest-n search for reliable direction recovery.

    ``cells`` lists every probed sample size as (n, successes, trials);
    ``censored`` marks searches that hit ``n_max`` without a passing cell,
    in which case ``n_star`` equals ``n_max`` and is a lower bound only.
    """

    method: str
    kappa: float
    epsilon: float
    delta: float
    n_star: int
    censored: bool
    cells: tuple


def _wilson(successes: int, trials: int, z: float = 1.96) -> tuple:
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = (
        z
        * math.sqrt(p * (1.0 - p) / trials + z * z / (4.0 * trials * trials))
        / denom
    )
    return center - half, center + half


def estimate_sample_complexity(
    method: str,
    kappa: float,
    epsilon: float,
    delta: float,
    config: SweepConfig,
    target_direction: Optional[np.ndarray] = None,
    n_max: int = 100_000,
) -> ComplexityResult:
    """Smallest n with P[final_sim >= 1 - epsilon] >= 1 - delta, empirically.

    Each probed n runs ``config.repetitions`` seeded trials; a cell passes
    when its Wilson 95% lower bound clears 1 - delta and fails when the
    upper bound drops below it.  Undecided cells draw up to three more
    batches of repetitions before falling back to the point estimate, which
    keeps the doubling/bisection search from flapping on noisy frequencies.
    Trials without a usable direction count as failures.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}")
    if not (0.0 < epsilon < 1.0 and 0.0 < delta < 1.0):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    if n_max < 2:
        raise ValueError("n_max must be at least 2")
    target = 1.0 - delta
    if target_direction is not None:
        target_direction = tuple(float(v) for v in np.asarray(target_direction))
    reps = config.repetitions
    cache: dict = {}
    probed = []

    def cell(n: int) -> bool:
        if n in cache:
            return cache[n][2]
        trial = dataclasses.replace(
            config.trial(method, kappa, n), target_direction=target_direction
        )
        successes = 0
        trials = 0
        verdict = None
        while verdict is None:
            for rep in range(trials, trials + reps):
                seed = trial_seed(config.base_seed, method, kappa, n, rep)
                r = run_trial(trial, seed)
                if r.final_sim is not None and r.final_sim >= 1.0 - epsilon:
                    successes += 1
            trials += reps
            lo, hi = _wilson(successes, trials)
            if lo >= target:
                verdict = True
            elif hi <= target:
                verdict = False
            elif trials >= 4 * reps:
                verdict = successes / trials >= target
        cache[n] = (successes, trials, verdict)
        probed.append(n)
        return verdict

    def result(n_star: int, censored: bool) -> ComplexityResult:
        cells = tuple((n,) + cache[n][:2] for n in sorted(cache))
        return ComplexityResult(
            method=method,
            kappa=float(kappa),
            epsilon=epsilon,
            delta=delta,
            n_star=n_star,
            censored=censored,
            cells=cells,
        )

    n = 2
    while not cell(n):
        if n >= n_max:
            return result(n_max, censored=True)
        n = min(2 * n, n_max)
    if n == 2:
        return result(2, censored=False)
    hi_n = n
    lo_n = max(m for m in probed if m < hi_n)
    while hi_n - lo_n > 1:
        mid = (lo_n + hi_n) // 2
        if cell(mid):
            hi_n = mid
        else:
            lo_n = mid
    return result(hi_n, censored=False)
