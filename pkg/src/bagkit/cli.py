"""Command-line interface: validate, run, variance, prune, report.

Batch-and-file workflow: point a verb at input files, collect output files.
Exit codes: 0 success, 2 usage, 3 validation error, 4 partial batch failure,
5 I/O error, 1 anything else. Output files are written atomically
(temp-then-rename), so rerunning over a previous output directory is safe.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from .config import load_data_dir, parse_config_file
from .errors import BagkitError, ConfigError, DataError
from .experiment import (
    DEFAULT_HYPER,
    MemberSpec,
    run_config,
    sampling_manifest,
    variance_analysis,
    write_report,
    write_variance_report,
)
from .ioutil import atomic_write_text
from .predictor import FeatureSpec, load_model, param_count, save_model
from .prune import PruneSpec, prune_magnitude, sparsity
from .resample import make_plan, plan_to_manifest

EXIT_OK = 0
EXIT_OTHER = 1
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_PARTIAL = 4
EXIT_IO = 5

RESULTS_NAME = "results.csv"
MANIFEST_NAME = "run_manifest.json"


def _estimated_params(member: MemberSpec, num_classes: int = 2) -> int:
    """Parameter count assuming a binary task (validate-time estimate)."""
    dims, hidden = member.feature_spec.dims, member.effective_hidden()
    if hidden == 0:
        return dims * num_classes + num_classes
    return dims * hidden + hidden + hidden * num_classes + num_classes


def cmd_validate(args) -> int:
    configs = parse_config_file(args.config)
    for config in configs:
        est = sum(_estimated_params(m) for m in config.members)
        print(
            f"{config.config_id}: type={config.config_type} "
            f"members={len(config.members)} est_params={est}"
        )
    print(f"{len(configs)} configuration(s) valid")
    return EXIT_OK


def cmd_run(args) -> int:
    configs = parse_config_file(args.config)
    if args.seed is not None:
        configs = tuple(replace(c, base_seed=args.seed) for c in configs)

    all_tasks = sorted({t for c in configs for t in c.tasks})
    data = {}
    task_errors = {}
    for task in all_tasks:
        try:
            data.update(load_data_dir(args.data, [task]))
        except (DataError, ConfigError) as exc:
            task_errors[task] = str(exc)

    def run_one(config):
        bad = [t for t in config.tasks if t in task_errors]
        if bad:
            raise ConfigError(f"config {config.config_id!r}: unavailable tasks {bad}")
        return run_config(config, data)

    results = []
    failures = []
    with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
        futures = [(c.config_id, pool.submit(run_one, c)) for c in configs]
        for config_id, future in futures:
            try:
                results.append(future.result())
            except BagkitError as exc:
                failures.append((config_id, str(exc)))

    out_dir = Path(args.out)
    if results:
        write_report(results, out_dir / RESULTS_NAME)
        succeeded = {r.config_id for r in results}
        manifest = sampling_manifest([c for c in configs if c.config_id in succeeded], data)
        atomic_write_text(out_dir / MANIFEST_NAME, json.dumps(manifest, indent=2) + "\n")
        print(f"wrote {out_dir / RESULTS_NAME} ({len(results)} row(s))")
        _print_top(results, args.top)

    for config_id, message in failures:
        print(f"FAILED {config_id}: {message}", file=sys.stderr)
    if failures:
        print(f"{len(failures)} of {len(configs)} configuration(s) failed", file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


def _print_top(results, top: int) -> None:
    ranked = sorted(results, key=lambda r: (-r.avg_accuracy, r.config_id))[:top]
    print(f"top {len(ranked)} by average accuracy:")
    for r in ranked:
        print(
            f"  {r.avg_accuracy:.4f}  {r.config_id}  [{r.experiment_type}]  "
            f"params={r.total_params}"
        )


def cmd_variance(args) -> int:
    data = load_data_dir(args.data, [args.task])
    task_data = data[args.task]

    hyper_override = None
    if args.model == "mlp" and args.hidden != DEFAULT_HYPER["mlp"].hidden_size:
        hyper_override = replace(DEFAULT_HYPER["mlp"], hidden_size=args.hidden)
    member = MemberSpec(
        model_kind=args.model,
        feature_spec=FeatureSpec(dims=args.dims),
        hyper_override=hyper_override,
        prune_fraction=args.prune,
        bagged=True,
    )

    report = variance_analysis(
        task_data, member, args.n, args.m, args.seed, task_name=args.task
    )
    out_dir = Path(args.out)
    csv_path = out_dir / f"variance_{args.task}.csv"
    write_variance_report(report, csv_path)
    plan = make_plan(args.n, args.m, len(task_data.train), args.seed)
    atomic_write_text(out_dir / f"plan_{args.task}.json", plan_to_manifest(plan))
    print(f"wrote {csv_path}")
    print(
        f"{args.task} {report.model} n={report.n} m={report.m} metric={report.metric}: "
        f"single {report.single_mean:.4f}±{report.single_std:.4f} vs "
        f"ensemble {report.ensemble_mean:.4f}±{report.ensemble_std:.4f}"
    )
    return EXIT_OK


def cmd_prune(args) -> int:
    model = load_model(args.model)
    pruned = prune_magnitude(model, PruneSpec(args.fraction))
    save_model(pruned, args.out)
    print(
        f"wrote {args.out}: params={param_count(pruned)} "
        f"sparsity={sparsity(pruned):.4f}"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.results)
    if not path.is_file():
        raise DataError(f"results file not found: {path}")
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DataError(f"results file is empty: {path}")
    for line in lines[: args.top + 1]:
        print(line)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bagkit",
        description="Bagging experiments: bootstrap training, pruning, soft-vote ensembles.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("validate", help="check a batch config file")
    p.add_argument("--config", required=True, help="batch config JSON file")
    p.set_defaults(handler=cmd_validate)

    p = sub.add_parser("run", help="run every configuration in a batch")
    p.add_argument("--config", required=True, help="batch config JSON file")
    p.add_argument("--data", required=True, help="data directory of task subdirectories")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override every config's base_seed")
    p.add_argument("--jobs", type=int, default=1, help="concurrent configuration runs")
    p.add_argument("--top", type=int, default=15, help="result rows to print")
    p.set_defaults(handler=cmd_run)

    p = sub.add_parser("variance", help="single vs ensemble spread on one task")
    p.add_argument("--task", required=True)
    p.add_argument("--data", required=True, help="data directory of task subdirectories")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--model", choices=["logreg", "mlp"], default="logreg")
    p.add_argument("--dims", type=int, default=1024, help="hashed feature space size")
    p.add_argument("--hidden", type=int, default=DEFAULT_HYPER["mlp"].hidden_size)
    p.add_argument("--prune", type=float, default=0.0, help="member prune fraction")
    p.add_argument("--n", type=int, required=True, help="first-level sample count (>= 2)")
    p.add_argument("--m", type=int, required=True, help="members per ensemble (>= 1)")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_variance)

    p = sub.add_parser("prune", help="magnitude-prune a saved model file")
    p.add_argument("--model", required=True, help="input model .npz")
    p.add_argument("--out", required=True, help="output model .npz")
    p.add_argument("--fraction", type=float, required=True)
    p.set_defaults(handler=cmd_prune)

    p = sub.add_parser("report", help="print the top rows of a results CSV")
    p.add_argument("--results", required=True, help="results CSV from a run")
    p.add_argument("--top", type=int, default=15)
    p.set_defaults(handler=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verb == "variance":
        if args.n < 2:
            parser.error(f"--n must be >= 2, got {args.n}")
        if args.m < 1:
            parser.error(f"--m must be >= 1, got {args.m}")
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except BagkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_OTHER


if __name__ == "__main__":
    raise SystemExit(main())
