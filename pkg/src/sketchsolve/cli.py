"""Config-driven experiment runner.

Subcommands:

* ``run <config>``      solve with the configured methods, write traces,
                        fitted-versus-predicted rates, diagnostics and a
                        summary with the enabled checks
* ``diagnose <config>`` spectrum and exactness only
* ``validate <config>`` full numerical validation suite

Artifacts are byte-deterministic for a fixed (config, seed): floats are
written in shortest round-trip form, keys are sorted, and row order is
fixed. The only wall-clock text is the one generated_at line in
summary.json. ``--threads`` changes speed, never results.

Exit codes: 0 all enabled checks passed, 1 a check failed, 2 invalid
input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import fit_rate, theoretical_rates
from .config import ConfigError, ExperimentConfig, build_distribution, build_problem, load_config
from .linalg import InconsistentSystemError
from .mmio import ParseError
from .reformulation import build_reformulation
from .solvers import (
    SolverConfig,
    acceleration_parameters,
    run_accelerated,
    run_basic,
    run_parallel,
    stepsize_policy,
)
from .validation import LIBRARY_CHECKS, PROBLEM_CHECKS, ValidationOptions, run_validation

DEFAULT_RUN_CHECKS = ["lemma:pathwise-step-identities", "lemma:spectrum-in-unit-interval"]


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _write_csv(path: Path, header: list[str], rows):
    lines = [",".join(header)]
    lines.extend(",".join(_fmt(cell) for cell in row) for row in rows)
    _write_text(path, "\n".join(lines) + "\n")


def _write_json(path: Path, payload: dict):
    _write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _solver_label(spec: dict, index: int) -> str:
    return spec.get("label", f"{spec['method']}-{index}")


def _resolve_omega(spec: dict, reform, index: int) -> float:
    if "omega" in spec:
        return float(spec["omega"])
    policy = spec.get("policy")
    if policy is None:
        raise ConfigError(f"solvers[{index}]", "needs omega or policy")
    return stepsize_policy(reform.spectrum, policy)


def _run_solver(spec, index, problem, dist, reform, cfg, threads):
    method = spec["method"]
    omega = _resolve_omega(spec, reform, index)
    iters = int(spec.get("iterations", cfg.iterations))
    label = _solver_label(spec, index)
    base = SolverConfig(
        omega=omega,
        max_iters=iters,
        master_seed=cfg.seed,
        tau=int(spec.get("tau", 1)),
        record=("error_sq",),
    )
    if method == "accelerated":
        gamma = spec.get("gamma")
        mu = spec.get("mu", "auto")
        if gamma is None:
            if mu == "auto":
                gamma, mu = acceleration_parameters(reform.spectrum, omega)
            else:
                mu = float(mu)
                gamma = 2.0 / (1.0 + np.sqrt(mu))
        base = replace(base, gamma=float(gamma), mu=None if mu == "auto" else float(mu))

    def one(rep: int):
        if method == "basic":
            return run_basic(problem, dist, base, replication=rep)
        if method == "parallel":
            return run_parallel(problem, dist, base, replication=rep)
        return run_accelerated(problem, dist, base, replication=rep)

    # replications run on independent streams; collecting by index keeps the
    # emitted rows and the reduction identical for any thread count
    if threads > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            traces = list(pool.map(one, range(cfg.replications)))
    else:
        traces = [one(rep) for rep in range(cfg.replications)]

    rows = []
    l2_sum = np.zeros(iters + 1)
    for rep, trace in enumerate(traces):
        for k, value in enumerate(trace.error_sq):
            rows.append((k, "error_sq", value, rep))
        if trace.sketch_loss is not None:
            for k, value in enumerate(trace.sketch_loss):
                rows.append((k, "sketch_loss", value, rep))
            for k, value in enumerate(trace.step_sq):
                rows.append((k, "step_sq", value, rep))
        l2_sum += trace.error_sq
    l2_mean = l2_sum / cfg.replications
    fitted = fit_rate(np.maximum(l2_mean, 0.0)) if iters + 1 >= 5 else None
    if fitted is not None and fitted.floored:
        fitted = None  # trajectories hit exact zero; a geometric fit is meaningless
    rates = theoretical_rates(
        reform.spectrum,
        omega,
        tau=int(spec.get("tau", 1)),
        mu=base.mu if method == "accelerated" else None,
    )
    summary = {
        "label": label,
        "method": method,
        "omega": omega,
        "iterations": iters,
        "replications": cfg.replications,
        "final_l2_mean": float(l2_mean[-1]),
        "predicted": rates.to_dict(),
    }
    if fitted is not None:
        summary["fitted_l2_rate"] = fitted.rate
        summary["fit_residual"] = fitted.residual
    return label, rows, summary


def _diagnostics_payload(reform) -> dict:
    return reform.diagnostics()


def _checks_payload(results) -> list[dict]:
    return [r.to_dict() for r in results]


def _validation_options(cfg: ExperimentConfig, threads: int) -> ValidationOptions:
    omega = 1.0
    tau = 2
    for spec in cfg.solvers:
        if spec["method"] == "basic" and "omega" in spec:
            omega = float(spec["omega"])
            break
    for spec in cfg.solvers:
        if spec["method"] == "parallel" and "tau" in spec:
            tau = int(spec["tau"])
            break
    if not 0.0 < omega < 2.0:
        omega = 1.0  # checks assume the mean-square regime
    return ValidationOptions(
        seed=cfg.seed,
        replications=cfg.replications,
        iterations=cfg.iterations,
        omega=omega,
        tau=tau,
        threads=threads,
    )


def cmd_diagnose(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    problem, _ = build_problem(cfg)
    dist = build_distribution(cfg, problem)
    reform = build_reformulation(
        problem, dist, seed=cfg.seed, n_samples=cfg.expectation_samples, support_cap=cfg.support_cap
    )
    _write_json(out_dir / "diagnostics.json", _diagnostics_payload(reform))
    return 0


def cmd_run(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    problem, _ = build_problem(cfg)
    dist = build_distribution(cfg, problem)
    reform = build_reformulation(
        problem, dist, seed=cfg.seed, n_samples=cfg.expectation_samples, support_cap=cfg.support_cap
    )
    _write_json(out_dir / "diagnostics.json", _diagnostics_payload(reform))

    solver_summaries = []
    rate_rows = []
    for index, spec in enumerate(cfg.solvers):
        label, rows, summary = _run_solver(spec, index, problem, dist, reform, cfg, threads)
        _write_csv(out_dir / f"trace_{label}.csv", ["iter", "metric", "value", "replication"], rows)
        solver_summaries.append(summary)
        if "fitted_l2_rate" in summary:
            rate_rows.append(
                (
                    label,
                    "l2_rate",
                    summary["predicted"]["l2_upper_factor"],
                    summary["fitted_l2_rate"],
                    summary["fit_residual"],
                )
            )
    _write_csv(out_dir / "rates.csv", ["label", "quantity", "predicted", "fitted", "residual"], rate_rows)

    checks = cfg.checks if cfg.checks is not None else DEFAULT_RUN_CHECKS
    results = run_validation(problem, reform, _validation_options(cfg, threads), checks)
    failed = [r.anchor for r in results if not r.passed]
    _write_json(
        out_dir / "summary.json",
        {
            "command": "run",
            "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "seed": cfg.seed,
            "solvers": solver_summaries,
            "checks": _checks_payload(results),
            "failed_checks": failed,
        },
    )
    return 1 if failed else 0


def cmd_validate(cfg: ExperimentConfig, out_dir: Path, threads: int) -> int:
    problem, _ = build_problem(cfg)
    dist = build_distribution(cfg, problem)
    reform = build_reformulation(
        problem, dist, seed=cfg.seed, n_samples=cfg.expectation_samples, support_cap=cfg.support_cap
    )
    _write_json(out_dir / "diagnostics.json", _diagnostics_payload(reform))
    checks = cfg.checks
    if checks is None:
        checks = list(LIBRARY_CHECKS) + list(PROBLEM_CHECKS)
    results = run_validation(problem, reform, _validation_options(cfg, threads), checks)
    _write_csv(
        out_dir / "checks.csv",
        ["anchor", "passed", "margin"],
        [(r.anchor, int(r.passed), r.margin) for r in results],
    )
    failed = [r.anchor for r in results if not r.passed]
    _write_json(
        out_dir / "summary.json",
        {
            "command": "validate",
            "generated_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "seed": cfg.seed,
            "checks": _checks_payload(results),
            "failed_checks": failed,
        },
    )
    for result in results:
        status = "PASS" if result.passed else "FAIL"
        print(f"{status} {result.anchor} margin={result.margin:.3e}")
    return 1 if failed else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="sketchsolve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "diagnose", "validate"):
        cmd = sub.add_parser(name)
        cmd.add_argument("config", help="path to the JSON experiment configuration")
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument("--output-dir", default=None, help="override the output directory")
        cmd.add_argument(
            "--threads", type=int, default=1, help="worker threads (affects speed only)"
        )
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = int(args.seed)
        out_dir = Path(args.output_dir or cfg.output_dir or "out")
        if args.command == "run":
            return cmd_run(cfg, out_dir, args.threads)
        if args.command == "diagnose":
            return cmd_diagnose(cfg, out_dir, args.threads)
        return cmd_validate(cfg, out_dir, args.threads)
    except (ConfigError, ParseError, InconsistentSystemError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
