"""Command-line harness: solve / irl / rairl / divergence / validate.

Configs are JSON documents validated against the schemas shipped under
``regmdp/schemas`` (unknown keys are rejected). Every output file is
accompanied by a copy of the resolved config, and all CSV output uses
shortest-round-trip float formatting so identical configs and seeds
produce byte-identical files.

Exit codes: 0 success, 1 validation/config error, 2 numeric failure
(non-convergence), 3 invariant-suite failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from scipy import stats

from . import acceptance
from .divergence import DiagGaussian, gaussian_bregman_tsallis, heatmap_axes, heatmap_grid
from .envs import make_env, sample_demos
from .errors import NumericError, ValidationError
from .mdp import TabularPolicy, regularized_value_iteration
from .regularizers import RegularizerSpec
from .training import TrainConfig, TrainMetrics, default_probes, rairl_train

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_SUITE = 3


def _load_config(path: str, command: str) -> dict:
    try:
        with open(path) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    schema_text = resources.files("regmdp.schemas").joinpath(f"{command}.schema.json").read_text()
    try:
        jsonschema.validate(config, json.loads(schema_text))
    except jsonschema.ValidationError as exc:
        raise ValidationError(f"config does not match the {command} schema: {exc.message}") from exc
    return config


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_resolved_config(out: Path, command: str, resolved: dict) -> None:
    with open(out / f"{command}_config.json", "w") as fh:
        json.dump(resolved, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [
                    cell if isinstance(cell, str)
                    else (str(cell) if isinstance(cell, (int, np.integer)) else repr(float(cell)))
                    for cell in row
                ]
            )


def _reg_from_config(obj: dict) -> RegularizerSpec:
    return RegularizerSpec.from_json(obj)


def cmd_solve(args) -> int:
    config = _load_config(args.config, "solve")
    mdp, _ = make_env(config["environment"])
    spec = _reg_from_config(config["regularizer"])
    reward = config.get("reward")
    if reward is None and mdp.reward is None:
        raise ValidationError(
            f"environment {config['environment']} has no reward table; supply one in the config"
        )
    tol = float(config.get("tol", 1e-10))
    solution = regularized_value_iteration(
        mdp, spec, tol=tol, reward=None if reward is None else np.array(reward, dtype=float)
    )
    out = _out_dir(args)
    with open(out / "solution.json", "w") as fh:
        json.dump(solution.to_json(), fh, indent=2)
        fh.write("\n")
    rows = [
        (s, a, solution.policy.probs[s, a])
        for s in range(mdp.n_states)
        for a in range(mdp.n_actions)
    ]
    _write_csv(out / "policy.csv", ["s", "a", "prob"], rows)
    resolved = {
        "environment": config["environment"],
        "regularizer": spec.to_json(),
        "reward": reward,
        "tol": tol,
    }
    _write_resolved_config(out, "solve", resolved)
    print(f"solved {config['environment']} in {solution.n_iter} sweeps -> {out}")
    return EXIT_OK


def _resolve_expert(config: dict, mdp, env_expert) -> TabularPolicy:
    if "expert" in config:
        return TabularPolicy(np.array(config["expert"], dtype=float))
    if env_expert is None:
        raise ValidationError(
            f"environment {config['environment']} has no built-in expert; supply 'expert'"
        )
    return env_expert


def cmd_irl(args) -> int:
    from .irl import exact_irl_reward, reward_table_to_csv

    config = _load_config(args.config, "irl")
    mdp, env_expert = make_env(config["environment"])
    spec = _reg_from_config(config["regularizer"])
    expert = _resolve_expert(config, mdp, env_expert)
    try:
        reward = exact_irl_reward(expert, spec)
    except ValidationError as exc:
        raise ValidationError(f"reward recovery failed: {exc}") from exc
    out = _out_dir(args)
    with open(out / "reward.json", "w") as fh:
        json.dump(reward.tolist(), fh)
        fh.write("\n")
    reward_table_to_csv(reward, out / "reward.csv")
    tol = float(config.get("tol", 1e-10))
    resolved = {
        "environment": config["environment"],
        "regularizer": spec.to_json(),
        "expert": expert.probs.tolist(),
        "tol": tol,
    }
    _write_resolved_config(out, "irl", resolved)
    if args.verify:
        solution = regularized_value_iteration(mdp, spec, tol=tol, reward=reward)
        max_tv = solution.policy.max_tv_distance(expert)
        with open(out / "verify.json", "w") as fh:
            json.dump({"max_tv": max_tv}, fh)
            fh.write("\n")
        print(f"verify: re-solved policy max per-state TV to expert = {max_tv:.3e}")
    print(f"wrote recovered reward -> {out}")
    return EXIT_OK


def _resolve_rairl(config: dict, seed: int) -> TrainConfig:
    spec = _reg_from_config(config["regularizer"])
    train = dict(config.get("train", {}))
    return TrainConfig(
        reg=spec,
        seed=seed,
        reward_model=config.get("model", "dbm"),
        **train,
    )


def _probe_list(config: dict, lam: float):
    if "probes" not in config:
        return default_probes(lam)
    probes = []
    for q in config["probes"]:
        name = f"mean_bregman_q{q:g}"
        if q == 1:
            probes.append((name, RegularizerSpec("shannon", lam=lam)))
        else:
            probes.append((name, RegularizerSpec("tsallis", lam=lam, k=1.0, q=float(q))))
    return probes


def _run_rairl_seed(payload):
    """Single-seed worker; module-level so process pools can pickle it."""
    config, seed, out_dir = payload
    mdp, env_expert = make_env(config["environment"])
    expert = _resolve_expert(config, mdp, env_expert)
    demos = sample_demos(mdp, expert, int(config.get("demos", 10_000)),
                         seed=int(config.get("demo_seed", 9)) + seed)
    train_config = _resolve_rairl(config, seed)
    probes = _probe_list(config, train_config.reg.lam)
    out = Path(out_dir)
    metrics_path = out / f"metrics_seed{seed}.csv"
    metrics = TrainMetrics(probe_names=[name for name, _ in probes])
    with open(metrics_path, "w", newline="") as fh:
        fh.write(",".join(metrics.columns) + "\n")
        fh.flush()

        def sink(row):
            cells = []
            for col in metrics.columns:
                val = row.get(col)
                cells.append("" if val is None else (str(val) if col == "iter" else repr(float(val))))
            fh.write(",".join(cells) + "\n")
            fh.flush()

        policy, model, metrics = rairl_train(mdp, demos, train_config, probes=probes,
                                             metrics_sink=sink)
    with open(out / f"policy_seed{seed}.json", "w") as fh:
        json.dump(policy.probs.tolist(), fh)
        fh.write("\n")
    with open(out / f"model_seed{seed}.json", "w") as fh:
        json.dump(model.to_json(), fh)
        fh.write("\n")
    from .irl import reward_table_to_csv
    from .training import model_reward_table

    reward_table_to_csv(
        model_reward_table(model, train_config.reg), out / f"reward_seed{seed}.csv"
    )
    return seed, metrics


def _aggregate_metrics(per_seed: dict, out: Path) -> None:
    """Mean and 95% t-interval (n-1 degrees of freedom) across seeds, per row."""
    seeds = sorted(per_seed)
    first = per_seed[seeds[0]]
    columns = first.columns
    header = ["iter"]
    for col in columns[1:]:
        header += [f"{col}_mean", f"{col}_ci95"]
    rows = []
    n = len(seeds)
    for idx, row in enumerate(first.rows):
        out_row = [str(row["iter"])]
        for col in columns[1:]:
            vals = [per_seed[s].rows[idx].get(col) for s in seeds]
            if any(v is None for v in vals):
                out_row += ["", ""]
                continue
            vals = np.array(vals, dtype=float)
            mean = float(vals.mean())
            if n > 1 and np.isfinite(vals).all():
                half = float(stats.t.ppf(0.975, n - 1) * vals.std(ddof=1) / math.sqrt(n))
            else:
                half = 0.0
            out_row += [repr(mean), repr(half)]
        rows.append(out_row)
    with open(out / "aggregate.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def cmd_rairl(args) -> int:
    config = _load_config(args.config, "rairl")
    if args.seeds:
        seeds = [int(s) for s in args.seeds.split(",")]
    else:
        seeds = [int(s) for s in config.get("seeds", [0, 1, 2, 3, 4])]
    out = _out_dir(args)
    payloads = [(config, seed, str(out)) for seed in seeds]
    per_seed = {}
    failures = []
    if args.parallel and len(seeds) > 1:
        workers = int(os.environ.get("REGMDP_THREADS", "0")) or min(len(seeds), os.cpu_count() or 1)
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_run_rairl_seed, p): p[1] for p in payloads}
            for future in concurrent.futures.as_completed(futures):
                seed = futures[future]
                try:
                    _, metrics = future.result()
                    per_seed[seed] = metrics
                except (ValidationError, NumericError) as exc:
                    failures.append((seed, str(exc)))
    else:
        for payload in payloads:
            try:
                _, metrics = _run_rairl_seed(payload)
                per_seed[payload[1]] = metrics
            except (ValidationError, NumericError) as exc:
                failures.append((payload[1], str(exc)))
    for seed, message in failures:
        print(f"seed {seed} failed: {message}", file=sys.stderr)
    resolved = {
        "environment": config["environment"],
        "regularizer": _reg_from_config(config["regularizer"]).to_json(),
        "model": config.get("model", "dbm"),
        "train": {
            k: v
            for k, v in vars(_resolve_rairl(config, seeds[0])).items()
            if k not in ("reg", "seed")
        },
        "demos": int(config.get("demos", 10_000)),
        "demo_seed": int(config.get("demo_seed", 9)),
        "probes": config.get("probes", [1, 1.5, 2]),
        "seeds": seeds,
    }
    _write_resolved_config(out, "rairl", resolved)
    if not per_seed:
        return EXIT_NUMERIC
    _aggregate_metrics(per_seed, out)
    print(f"trained {len(per_seed)}/{len(seeds)} seeds -> {out}")
    return EXIT_OK if not failures else EXIT_NUMERIC


def cmd_divergence(args) -> int:
    config = _load_config(args.config, "divergence")
    expert = DiagGaussian(
        np.array(config["expert"]["mean"], dtype=float),
        np.array(config["expert"]["stddev"], dtype=float),
    )
    resolution = int(config["resolution"])
    out = _out_dir(args)
    mus, log_sigmas = heatmap_axes(config["mu_range"], config["log_sigma_range"], resolution)
    for q in config["qs"]:
        grid = heatmap_grid(expert, config["mu_range"], config["log_sigma_range"], resolution, q)
        rows = [
            (mus[i], log_sigmas[j], grid[i, j])
            for i in range(resolution)
            for j in range(resolution)
        ]
        _write_csv(out / f"heatmap_q{q:g}.csv", ["mu", "log_sigma", "value"], rows)
    _write_resolved_config(out, "divergence", config)
    print(f"wrote {len(config['qs'])} heatmap grids -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    selected = None
    if args.config:
        config = _load_config(args.config, "validate")
        selected = config.get("criteria")
    if args.criteria:
        selected = [int(c) for c in args.criteria.split(",")]
    results = acceptance.run_all(selected=selected)
    if args.out:
        out = _out_dir(args)
        payload = [
            {"name": r.name, "passed": r.passed, "detail": r.detail, "seconds": r.seconds}
            for r in results
        ]
        with open(out / "validate_report.json", "w") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
        _write_resolved_config(out, "validate", {"criteria": selected})
    return EXIT_OK if all(r.passed for r in results) else EXIT_SUITE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="regmdp",
        description="Regularized-MDP solvers, reward recovery, and adversarial training",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve = sub.add_parser("solve", help="regularized value iteration on an environment")
    solve.add_argument("--config", required=True)
    solve.add_argument("--out", required=True)
    solve.set_defaults(func=cmd_solve)

    irl = sub.add_parser("irl", help="closed-form reward recovery from an expert policy")
    irl.add_argument("--config", required=True)
    irl.add_argument("--out", required=True)
    irl.add_argument("--verify", action="store_true",
                     help="re-solve the recovered reward and report the max TV to the expert")
    irl.set_defaults(func=cmd_irl)

    rairl = sub.add_parser("rairl", help="adversarial reward learning over one or more seeds")
    rairl.add_argument("--config", required=True)
    rairl.add_argument("--out", required=True)
    rairl.add_argument("--seeds", help="comma-separated seed list (overrides the config)")
    rairl.add_argument("--parallel", action="store_true",
                       help="run seeds in separate processes (REGMDP_THREADS caps workers)")
    rairl.set_defaults(func=cmd_rairl)

    div = sub.add_parser("divergence", help="normalized Gaussian divergence grids, one CSV per q")
    div.add_argument("--config", required=True)
    div.add_argument("--out", required=True)
    div.set_defaults(func=cmd_divergence)

    validate = sub.add_parser("validate", help="run the acceptance suite")
    validate.add_argument("--config")
    validate.add_argument("--out")
    validate.add_argument("--criteria", help="comma-separated criterion numbers, e.g. 1,4,7")
    validate.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
