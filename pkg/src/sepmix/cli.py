"""Command-line front end for sampling, optimization, sweeps, and checks.

Every subcommand reads an optional JSON config file (``--config``) and takes
command-line overrides; ``--seed`` and ``--out`` always win over the file.
Results go to ``--out`` when given and to stdout otherwise.

Exit codes: 0 on success, 1 on a configuration or runtime error (including an
unknown subcommand), 2 when a verification suite reports a failed check.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import click
import numpy as np

from .expected import (
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
from .harness import (
    METHODS,
    SweepConfig,
    estimate_sample_complexity,
    load_problem_spec,
    sweep,
    write_sweep,
)
from .losses import BernoulliMaskScheme, BetaLaw, MixupScheme
from .minimize import Objective, newton_minimize
from .model import bayes_direction, cosine_similarity, sample_dataset
from .verify import SUITE_NAMES, run_suite, write_reports


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise click.ClickException(f"cannot read config {path}: {exc}")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise click.ClickException(f"config {path} is not valid JSON: {exc}")
    if not isinstance(obj, dict):
        raise click.ClickException(f"config {path} must hold a JSON object")
    return obj


def _reject_unknown(cfg: dict, allowed: set) -> None:
    extra = sorted(set(cfg) - allowed)
    if extra:
        raise click.ClickException(f"unknown config keys {extra}")


def _pick(cfg: dict, key: str, override, default):
    """Command-line value if given, else the config entry, else the default."""
    if override is not None:
        return override
    return cfg.get(key, default)


def _emit(payload: dict, out: str | None) -> None:
    text = json.dumps(payload, indent=2)
    if out is None:
        click.echo(text)
    else:
        Path(out).write_text(text + "\n")


@click.group(name="sepmix")
def _cli() -> None:
    """Experiments on linear and shallow classifiers trained with pair mixing.

    The subcommands sample from a two-Gaussian family with tunable class
    separation, minimize the exact expected losses of plain, mixed, and
    coordinate-masked logistic training, run seeded training sweeps and
    sample-size searches, check the library's numerical certificates, and
    train a small planar ReLU network.
    """


@_cli.command("sample")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON file with spec/kappa/n/seed/out defaults.")
@click.option("--spec", "spec_source", default=None,
              help="Built-in instance name (d10, d20) or a spec JSON file.")
@click.option("--kappa", type=float, default=None,
              help="Concentration of the class clouds (higher = more separable).")
@click.option("--n", type=int, default=None, help="Number of labeled points.")
@click.option("--seed", type=int, default=None, help="Generator seed.")
@click.option("--out", type=click.Path(), default=None, help="CSV destination.")
def _sample(config_path, spec_source, kappa, n, seed, out) -> None:
    """Draw a labeled dataset from the two-Gaussian family as CSV."""
    cfg = _load_config(config_path)
    _reject_unknown(cfg, {"spec", "kappa", "n", "seed", "out"})
    spec_source = _pick(cfg, "spec", spec_source, "d10")
    kappa = float(_pick(cfg, "kappa", kappa, 1.0))
    n = int(_pick(cfg, "n", n, 100))
    seed = int(_pick(cfg, "seed", seed, 0))
    out = _pick(cfg, "out", out, None)
    if out is None:
        raise click.ClickException(
            "sample needs an output path (--out or config key 'out')"
        )
    spec = load_problem_spec(str(spec_source), kappa)
    data = sample_dataset(spec, n, seed)
    data.to_csv(out)
    click.echo(f"wrote {data.n} points ({data.d} features) to {out}")


def _expected_objective(method: str, spec, n: int, alpha: float) -> Objective:
    if method == "erm":
        return Objective(
            lambda w: expected_erm(w, spec),
            lambda w: expected_erm_grad(w, spec),
            lambda w: expected_erm_hess(w, spec),
        )
    if method == "mixup":
        scheme = MixupScheme(BetaLaw(alpha))
        return Objective(
            lambda w: expected_mixup(w, spec, scheme, n),
            lambda w: expected_mixup_grad(w, spec, scheme, n),
            lambda w: expected_mixup_hess(w, spec, scheme, n),
        )
    mask = BernoulliMaskScheme(alpha)
    coeffs = mask_coefficients(mask, spec)
    return Objective(
        lambda w: expected_mask(w, spec, mask, n, coeffs=coeffs),
        lambda w: expected_mask_grad(w, spec, mask, n, coeffs=coeffs),
        lambda w: expected_mask_hess(w, spec, mask, n, coeffs=coeffs),
    )


@_cli.command("minimize")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON file with method/spec/kappa/n/alpha/max_iters/out.")
@click.option("--method", type=click.Choice(METHODS), default=None,
              help="Which expected loss to minimize.")
@click.option("--spec", "spec_source", default=None,
              help="Built-in instance name (d10, d20) or a spec JSON file.")
@click.option("--kappa", type=float, default=None)
@click.option("--n", type=int, default=None,
              help="Sample size entering the pair/diagonal weights of the "
                   "mixed losses; ignored for erm.")
@click.option("--alpha", type=float, default=None,
              help="Beta(alpha, alpha) mixing weight law, or the Beta law "
                   "behind the mask keep-probability.")
@click.option("--seed", type=int, default=None,
              help="Accepted for interface uniformity; the expected losses "
                   "are deterministic.")
@click.option("--out", type=click.Path(), default=None,
              help="Write the result JSON here instead of stdout.")
def _minimize(config_path, method, spec_source, kappa, n, alpha, seed, out) -> None:
    """Minimize an expected loss with damped Newton and report the optimum.

    The result records the minimizer, its cosine similarity to the optimal
    linear direction, the final loss, and the optimizer status.
    """
    cfg = _load_config(config_path)
    _reject_unknown(
        cfg, {"method", "spec", "kappa", "n", "alpha", "max_iters", "seed", "out"}
    )
    method = _pick(cfg, "method", method, "erm")
    if method not in METHODS:
        raise click.ClickException(f"unknown method {method!r}; choose from {METHODS}")
    spec_source = _pick(cfg, "spec", spec_source, "d10")
    kappa = float(_pick(cfg, "kappa", kappa, 1.0))
    n = int(_pick(cfg, "n", n, 500))
    alpha = float(_pick(cfg, "alpha", alpha, 1.0))
    max_iters = int(cfg.get("max_iters", 100))
    out = _pick(cfg, "out", out, None)
    spec = load_problem_spec(str(spec_source), kappa)
    oracle = _expected_objective(method, spec, n, alpha)
    res = newton_minimize(oracle, np.zeros(spec.d), max_iters=max_iters)
    norm = float(np.linalg.norm(res.w_star))
    sim = None
    if norm > 0.0 and np.isfinite(norm):
        sim = cosine_similarity(res.w_star, bayes_direction(spec))
    _emit(
        {
            "method": method,
            "spec": str(spec_source),
            "kappa": kappa,
            "n": n,
            "alpha": alpha,
            "status": res.status.value,
            "iterations": res.iterations,
            "grad_norm": res.final_grad_norm,
            "loss": float(oracle.value(res.w_star)),
            "final_sim": sim,
            "w_star": [float(v) for v in res.w_star],
        },
        out,
    )


@_cli.command("sweep")
@click.option("--config", "config_path", type=click.Path(), required=True,
              help="JSON sweep configuration (methods, kappa_list, n_list, "
                   "repetitions, train, ...).")
@click.option("--seed", type=int, default=None, help="Overrides base_seed.")
@click.option("--out", type=click.Path(), default=None,
              help="Overrides the output directory.")
def _sweep(config_path, seed, out) -> None:
    """Run a seeded factorial training sweep and persist raw/aggregate CSVs.

    Without an output directory the aggregate table is printed to stdout.
    Identical configurations produce byte-identical CSV output.
    """
    cfg = SweepConfig.from_json_dict(_load_config(config_path))
    if seed is not None:
        cfg = dataclasses.replace(cfg, base_seed=int(seed))
    if out is not None:
        cfg = dataclasses.replace(cfg, out=str(out))
    table = sweep(cfg)
    if cfg.out is None:
        click.echo(table.agg_csv(), nl=False)
    else:
        meta = write_sweep(table, cfg.out, cfg)
        click.echo(
            f"wrote {meta['trials']} trials to {cfg.out} "
            f"(run_hash {meta['run_hash'][:12]})"
        )


@_cli.command("complexity")
@click.option("--config", "config_path", type=click.Path(), required=True,
              help="JSON object with 'method' and 'kappa', optional 'n_max' "
                   "and 'target_direction', plus sweep-config keys "
                   "(repetitions, epsilon, delta, train, ...).")
@click.option("--seed", type=int, default=None, help="Overrides base_seed.")
@click.option("--out", type=click.Path(), default=None,
              help="Write the result JSON here instead of stdout.")
def _complexity(config_path, seed, out) -> None:
    """Search for the smallest sample size that recovers the target reliably.

    Doubles then bisects the sample size until the frequency of near-optimal
    directions clears 1 - delta, judging each size by a Wilson interval over
    seeded repetitions.
    """
    cfg = _load_config(config_path)
    method = cfg.pop("method", None)
    kappa = cfg.pop("kappa", None)
    if method is None or kappa is None:
        raise click.ClickException("complexity config needs 'method' and 'kappa'")
    n_max = int(cfg.pop("n_max", 100_000))
    target = cfg.pop("target_direction", None)
    if target is not None:
        target = np.asarray(target, dtype=float)
    sweep_cfg = SweepConfig.from_json_dict(cfg)
    if seed is not None:
        sweep_cfg = dataclasses.replace(sweep_cfg, base_seed=int(seed))
    res = estimate_sample_complexity(
        str(method),
        float(kappa),
        sweep_cfg.epsilon,
        sweep_cfg.delta,
        sweep_cfg,
        target_direction=target,
        n_max=n_max,
    )
    _emit(
        {
            "method": res.method,
            "kappa": res.kappa,
            "epsilon": res.epsilon,
            "delta": res.delta,
            "n_star": res.n_star,
            "censored": res.censored,
            "cells": [
                {"n": n, "successes": s, "trials": t} for (n, s, t) in res.cells
            ],
        },
        out,
    )


@_cli.command("verify")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON file with suite/seed/out defaults.")
@click.option("--suite", type=click.Choice(SUITE_NAMES), default=None,
              help="Which bundle of checks to run.")
@click.option("--seed", type=int, default=None,
              help="Seed for the randomized checks.")
@click.option("--out", type=click.Path(), default=None,
              help="Also write one JSON line per check here.")
def _verify(config_path, suite, seed, out) -> int:
    """Run the numerical certificates and print one PASS/FAIL line per check.

    Exits with code 2 if any check fails.
    """
    cfg = _load_config(config_path)
    _reject_unknown(cfg, {"suite", "seed", "out"})
    suite = _pick(cfg, "suite", suite, "all")
    seed = int(_pick(cfg, "seed", seed, 0))
    out = _pick(cfg, "out", out, None)
    reports = run_suite(str(suite), seed=seed)
    for rep in reports:
        if rep.passed:
            click.echo(f"PASS {rep.name}")
        else:
            click.echo(
                f"FAIL {rep.name} (worst violation {rep.worst_violation:.6g}, "
                f"tolerance {rep.tolerance:.6g})"
            )
    if out is not None:
        write_reports(reports, out)
    return 0 if all(r.passed for r in reports) else 2


@_cli.command("mlp2d")
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON file with noise/method/epochs/pairing/hidden/n/"
                   "alpha/seed/out defaults.")
@click.option("--noise", type=click.Choice(("large", "small")), default=None,
              help="Noise regime of the sine-split planar data.")
@click.option("--method", type=click.Choice(METHODS), default=None,
              help="Training method for the two-layer network.")
@click.option("--epochs", type=int, default=None)
@click.option("--pairing", type=click.Choice(("full", "permuted")), default=None,
              help="Mixing pair construction; 'full' uses all n^2 ordered "
                   "pairs per epoch and is much slower.")
@click.option("--hidden", type=int, default=None, help="Hidden layer width.")
@click.option("--n", type=int, default=None, help="Points per class.")
@click.option("--alpha", type=float, default=None,
              help="Mixing weight law parameter, as in minimize.")
@click.option("--seed", type=int, default=None,
              help="Seed for data, initialization, and pair draws.")
@click.option("--out", type=click.Path(), default=None,
              help="Directory for metrics.json, grid.csv, and checkpoint.json.")
def _mlp2d(config_path, noise, method, epochs, pairing, hidden, n, alpha, seed,
           out) -> None:
    """Train a small ReLU net on sine-split planar data and score its boundary.

    Reports training accuracy, the mean number of decision-boundary crossings
    per vertical scanline, and how far the boundary bends away from the best
    straight line (null when no boundary crosses the scan window).
    """
    try:
        from . import mlp2d as planar
    except ModuleNotFoundError as exc:
        raise click.ClickException(
            f"this command needs the optional torch dependency ({exc}); "
            f"install the 'mlp' extra"
        )
    cfg = _load_config(config_path)
    _reject_unknown(
        cfg,
        {"noise", "method", "epochs", "pairing", "hidden", "n", "alpha",
         "seed", "out"},
    )
    noise = _pick(cfg, "noise", noise, "large")
    if noise not in ("large", "small"):
        raise click.ClickException(f"unknown noise regime {noise!r}")
    method = _pick(cfg, "method", method, "erm")
    if method not in METHODS:
        raise click.ClickException(f"unknown method {method!r}; choose from {METHODS}")
    epochs = int(_pick(cfg, "epochs", epochs, 1500))
    pairing = _pick(cfg, "pairing", pairing, "permuted")
    hidden = int(_pick(cfg, "hidden", hidden, 500))
    n = int(_pick(cfg, "n", n, 250))
    alpha = float(_pick(cfg, "alpha", alpha, 1.0))
    seed = int(_pick(cfg, "seed", seed, 0))
    out = _pick(cfg, "out", out, None)
    make_cfg = (
        planar.large_noise_config if noise == "large" else planar.small_noise_config
    )
    data = planar.gen_sine_data(make_cfg(seed=seed, n=n))
    if method == "erm":
        training = planar.ErmTraining()
    elif method == "mixup":
        training = planar.MixupTraining(scheme=MixupScheme(BetaLaw(alpha)))
    else:
        training = planar.MaskMixupTraining(scheme=BernoulliMaskScheme(alpha))
    model = planar.train_mlp(
        data, training, epochs=epochs, seed=seed, pairing=str(pairing),
        hidden=hidden,
    )
    grid = planar.decision_grid(model, (-3.0, 3.0, -2.0, 2.0), (121, 81))
    try:
        bend = planar.nonlinearity_score(model)
    except ValueError:
        bend = None
    metrics = {
        "noise": noise,
        "method": method,
        "epochs": epochs,
        "pairing": str(pairing),
        "hidden": hidden,
        "n_per_class": n,
        "alpha": alpha,
        "seed": seed,
        "accuracy": planar.classification_accuracy(model, data),
        "nonlinearity": bend,
        "mean_sign_changes": float(np.mean(planar.sign_change_counts(grid))),
    }
    if out is None:
        click.echo(json.dumps(metrics, indent=2))
        return
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    grid.to_csv(outdir / "grid.csv")
    (outdir / "checkpoint.json").write_text(
        json.dumps(model.to_json_dict()) + "\n"
    )
    click.echo(f"wrote metrics, grid, and checkpoint to {outdir}")


def main(argv: list | None = None) -> int:
    """Run the CLI on ``argv`` (or ``sys.argv[1:]``) and return the exit code."""
    try:
        rv = _cli.main(args=argv, prog_name="sepmix", standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        return 1
    except click.Abort:
        click.echo("Aborted.", err=True)
        return 1
    except Exception as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    raise SystemExit(main())
