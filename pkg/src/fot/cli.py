"""Command-line front end.

Subcommands: run, bench, optimize, cache {stats|gc|verify}, export-dot.
Exit codes: 0 ok, 2 operation failure, 3 deadlock, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import re
import sys
import time
from pathlib import Path

from fot.backends import (
    HttpBackend,
    MockBackend,
    PriceTable,
    RecordingBackend,
    ReplayBackend,
)
from fot.cache import CacheFacade, PersistentCache
from fot.errors import ConfigError, DeadlockError, FotError, OpFailedError
from fot.graph.serialize import canonical_serialize, serialize_reasoning_graph, to_dot
from fot.optimize import Objective, HyperparameterSpace, run_study
from fot.report import (
    render_bench_figure,
    render_study_figure,
    write_csv,
    write_json,
    write_jsonl,
    write_markdown_table,
)
from fot.runtime import RunConfig
from fot.schemes import get_scheme, run_instance
from fot.schemes.datasets import (
    gen_decomp_dataset,
    gen_go24_dataset,
    gen_sorting_dataset,
    load_jsonl,
)
from fot.schemes.decomp import make_decomp_backend

EXIT_OK = 0
EXIT_OP_FAILURE = 2
EXIT_DEADLOCK = 3
EXIT_USAGE = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--backend", choices=("mock", "replay", "http"), default="mock")
    parser.add_argument("--cache", choices=("none", "process", "persistent"), default="none")
    parser.add_argument("--cache-dir", default=None)
    parser.add_argument("--concurrency", type=int, default=1, help="0 means unbounded")
    parser.add_argument("--strategy", choices=("fifo", "breadth_first", "depth_first"), default="fifo")
    parser.add_argument("--virtual-clock", action=argparse.BooleanOptionalAction, default=True)
    parser.add_argument("--record", default=None, help="record file (written, or replayed with --backend replay)")
    parser.add_argument("--latency-ms", type=int, default=100, help="simulated per-call latency of mock backends")
    parser.add_argument("--price-table", default=None)
    parser.add_argument("--base-url", default="http://localhost:8000/v1")
    parser.add_argument("--model", default="gpt-4o")
    parser.add_argument("--failure-policy", choices=("fail_fast", "skip_subtree"), default="fail_fast")
    parser.add_argument("--output", "-o", default="out")


def build_parser() -> _Parser:
    parser = _Parser(prog="fot", description="Run, benchmark, and optimize reasoning schemes.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", parents=[], help="run a scheme over a dataset")
    p_run.add_argument("--scheme", required=True)
    p_run.add_argument("--dataset", required=True)
    p_run.add_argument("--hp", default=None, help="hyperparameter overrides as JSON")
    p_run.add_argument("--export-dot", action="store_true")
    _add_common(p_run)

    p_bench = sub.add_parser("bench", help="compare execution/cache configurations")
    p_bench.add_argument("--scheme", required=True)
    p_bench.add_argument("--dataset", required=True)
    p_bench.add_argument("--hp", default=None, help="hyperparameter overrides as JSON")
    p_bench.add_argument(
        "--configs",
        default="S+none,S+process,S+persistent,P+none,P+process,P+persistent",
        help="comma-separated {S|P}+{none|process|persistent} entries",
    )
    _add_common(p_bench)

    p_opt = sub.add_parser("optimize", help="run a hyperparameter study")
    p_opt.add_argument("--study", required=True, help="study spec JSON file")
    _add_common(p_opt)

    p_cache = sub.add_parser("cache", help="inspect or maintain a persistent cache")
    p_cache.add_argument("action", choices=("stats", "gc", "verify"))
    p_cache.add_argument("--cache-dir", required=True)
    p_cache.add_argument("--older-than", default=None, help="age threshold for gc, e.g. 30d, 12h, 45m, 600s")

    p_dot = sub.add_parser("export-dot", help="run instances and export DOT graphs")
    p_dot.add_argument("--scheme", required=True)
    p_dot.add_argument("--dataset", required=True)
    p_dot.add_argument("--hp", default=None)
    _add_common(p_dot)

    return parser


def _load_dataset(spec) -> list[dict]:
    if isinstance(spec, list):
        return spec
    if isinstance(spec, dict):
        kind = spec.get("generator")
        if kind == "go24":
            return gen_go24_dataset(
                spec.get("n", 10), seed=spec.get("seed", 0),
                solvable_only=spec.get("solvable_only", False),
            )
        if kind == "sorting":
            return gen_sorting_dataset(
                spec.get("n", 5), seed=spec.get("seed", 0), length=spec.get("length", 128)
            )
        if kind == "decomp":
            return gen_decomp_dataset()
        raise ConfigError(f"unknown dataset generator {kind!r}")
    path = Path(spec)
    if not path.exists():
        raise ConfigError(f"dataset file not found: {path}")
    return load_jsonl(path)


def _price_table(args) -> PriceTable:
    if getattr(args, "price_table", None):
        return PriceTable.from_file(args.price_table)
    return PriceTable()


def _make_backend(args, scheme, instance: dict | None):
    if args.backend == "replay":
        if not args.record:
            raise ConfigError("--backend replay needs --record <file>")
        return ReplayBackend(args.record)
    if args.backend == "http":
        backend = HttpBackend(args.base_url, args.model, price_table=_price_table(args))
    else:
        latency = getattr(args, "latency_ms", 100)
        if scheme.name == "dynamic-decomp":
            if instance is None or "fixture" not in instance:
                raise ConfigError("dynamic-decomp instances need a scripted 'fixture'")
            backend = make_decomp_backend(instance["fixture"], latency_ms=latency)
        elif scheme.make_oracle_backend is not None:
            backend = scheme.make_oracle_backend(price_table=_price_table(args), latency_ms=latency)
        else:
            backend = MockBackend(price_table=_price_table(args), latency_ms=latency)
    if args.record and args.backend != "replay":
        backend = RecordingBackend(backend, args.record)
    return backend


def _concurrency(args) -> int | None:
    if args.concurrency is not None and args.concurrency < 0:
        raise ConfigError("--concurrency must be >= 0")
    return None if args.concurrency == 0 else args.concurrency


def _run_dataset(args, scheme, dataset, hp, out_dir: Path, export_dot: bool):
    """Shared run loop: persistent cache spans the dataset, process caches are
    per instance. Returns (rows, aggregate, exit_code)."""
    persistent_facade = None
    if args.cache == "persistent":
        cache_dir = args.cache_dir or str(out_dir / "cache")
        persistent_facade = CacheFacade.create("persistent", cache_dir)
    rows = []
    failed = 0
    exit_code = EXIT_OK
    for instance in dataset:
        backend = _make_backend(args, scheme, instance)
        if args.cache == "process":
            facade = CacheFacade.create("process")
        else:
            facade = persistent_facade
        config = RunConfig(
            backend=backend,
            cache=facade,
            strategy=args.strategy,
            max_concurrency=_concurrency(args),
            seed=args.seed,
            virtual_clock=args.virtual_clock,
            failure_policy=args.failure_policy,
        )
        try:
            score, output, result = run_instance(scheme, instance, hp, config)
        except DeadlockError as err:
            print(f"deadlock on {instance.get('id')}: {err}", file=sys.stderr)
            return rows, None, EXIT_DEADLOCK
        except OpFailedError as err:
            print(f"operation failure on {instance.get('id')}: {err}", file=sys.stderr)
            return rows, None, EXIT_OP_FAILURE
        if result.failed_ops:
            failed += 1
            exit_code = EXIT_OP_FAILURE
        instance_id = instance.get("id", f"instance-{len(rows)}")
        graph_path = out_dir / "graphs" / f"{instance_id}.json"
        graph_path.parent.mkdir(parents=True, exist_ok=True)
        graph_path.write_bytes(canonical_serialize(result.graph))
        reasoning_path = out_dir / "reasoning" / f"{instance_id}.json"
        reasoning_path.parent.mkdir(parents=True, exist_ok=True)
        reasoning_path.write_bytes(serialize_reasoning_graph(result.reasoning))
        rows.append(
            {
                "id": instance.get("id"),
                "score": score,
                "output": output,
                "metrics": result.metrics.to_json(),
                "graph_path": str(graph_path.relative_to(out_dir)),
                "reasoning_path": str(reasoning_path.relative_to(out_dir)),
                "wall_ms": result.metrics.wall_ms,
                "critical_path_ms": result.metrics.critical_path_ms,
                "cost_usd": result.metrics.total_cost_usd,
                "backend_calls": result.metrics.backend_calls,
                "failed_ops": result.failed_ops,
            }
        )
        if export_dot:
            dot_path = out_dir / "dot" / f"{instance_id}.dot"
            dot_path.parent.mkdir(parents=True, exist_ok=True)
            dot_path.write_text(to_dot(result.graph), encoding="utf-8")
    aggregate = {
        "instances": len(rows),
        "mean_score": sum(r["score"] for r in rows) / len(rows) if rows else 0.0,
        "total_cost_usd": sum(r["cost_usd"] for r in rows),
        "mean_wall_ms": sum(r["wall_ms"] for r in rows) / len(rows) if rows else 0.0,
        "backend_calls": sum(r["backend_calls"] for r in rows),
        "failed_instances": failed,
        "cache": persistent_facade.stats.to_json() if persistent_facade else {},
    }
    return rows, aggregate, exit_code


def cmd_run(args) -> int:
    scheme = get_scheme(args.scheme)
    dataset = _load_dataset(args.dataset)
    hp = json.loads(args.hp) if args.hp else None
    out_dir = Path(args.output)
    rows, aggregate, exit_code = _run_dataset(args, scheme, dataset, hp, out_dir, args.export_dot)
    if aggregate is None:
        return exit_code
    write_jsonl(out_dir / "results.jsonl", rows)
    write_json(
        out_dir / "report.json",
        {
            "scheme": scheme.name,
            "dataset": str(args.dataset),
            "seed": args.seed,
            "strategy": args.strategy,
            "concurrency": args.concurrency,
            "cache": args.cache,
            "aggregate": aggregate,
        },
    )
    print(
        f"{scheme.name}: {aggregate['instances']} instances, "
        f"mean score {aggregate['mean_score']:.3f}, "
        f"total cost ${aggregate['total_cost_usd']:.4f}, "
        f"backend calls {aggregate['backend_calls']}"
    )
    return exit_code


_CONFIG_RE = re.compile(r"^(S|P)\+(none|process|persistent)$")


def cmd_bench(args) -> int:
    scheme = get_scheme(args.scheme)
    dataset = _load_dataset(args.dataset)
    hp = json.loads(args.hp) if args.hp else None
    configs = [c.strip() for c in args.configs.split(",") if c.strip()]
    if len(configs) < 2:
        raise ConfigError("bench needs at least 2 configurations")
    for config in configs:
        if not _CONFIG_RE.match(config):
            raise ConfigError(f"bad config {config!r}; expected e.g. S+none or P+persistent")
    out_dir = Path(args.output)
    rows = []
    for label in configs:
        mode, tier = label.split("+")
        bench_args = argparse.Namespace(**vars(args))
        bench_args.cache = tier
        bench_args.cache_dir = str(out_dir / "cache" / label.replace("+", "_"))
        bench_args.concurrency = 1 if mode == "S" else (args.concurrency if args.concurrency > 1 else 0)
        result_rows, aggregate, exit_code = _run_dataset(
            bench_args, scheme, dataset, hp, out_dir / label.replace("+", "_"), False
        )
        if aggregate is None:
            return exit_code
        rows.append(
            {
                "config": label,
                "mean_runtime_ms": aggregate["mean_wall_ms"],
                "total_cost_usd": aggregate["total_cost_usd"],
                "mean_score": aggregate["mean_score"],
                "backend_calls": aggregate["backend_calls"],
            }
        )
    base_runtime = next((r["mean_runtime_ms"] for r in rows if r["config"] == "S+none"), rows[0]["mean_runtime_ms"])
    cost_base = {}
    for row in rows:
        mode = row["config"].split("+")[0]
        if row["config"].endswith("+none"):
            cost_base[mode] = row["total_cost_usd"]
    for row in rows:
        mode = row["config"].split("+")[0]
        row["speedup"] = base_runtime / row["mean_runtime_ms"] if row["mean_runtime_ms"] else float("inf")
        base_cost = cost_base.get(mode, rows[0]["total_cost_usd"])
        row["relative_cost"] = row["total_cost_usd"] / base_cost if base_cost else 1.0
    columns = ["config", "mean_runtime_ms", "speedup", "total_cost_usd", "relative_cost", "mean_score", "backend_calls"]
    table_rows = [
        {**row,
         "mean_runtime_ms": f"{row['mean_runtime_ms']:.1f}",
         "speedup": f"{row['speedup']:.2f}",
         "total_cost_usd": f"{row['total_cost_usd']:.4f}",
         "relative_cost": f"{row['relative_cost'] * 100:.0f}%"}
        for row in rows
    ]
    write_csv(out_dir / "bench.csv", table_rows, columns)
    write_markdown_table(out_dir / "bench.md", table_rows, columns, title=f"bench: {scheme.name}")
    render_bench_figure(rows, out_dir / "bench.png")
    for row in table_rows:
        print(f"{row['config']:>14}: {row['mean_runtime_ms']:>10} ms  ({row['speedup']}x)  cost {row['relative_cost']}")
    return EXIT_OK


def cmd_optimize(args) -> int:
    with open(args.study, "r", encoding="utf-8") as fh:
        study = json.load(fh)
    scheme = get_scheme(study["scheme"])
    dataset = _load_dataset(study.get("dataset", {"generator": "go24", "n": 5}))
    space = HyperparameterSpace.from_json(study.get("space", scheme.hp_space))
    objective_spec = study.get("objective", {})
    objective = Objective(
        direction=objective_spec.get("direction", scheme.direction),
        weights=objective_spec.get("weights", {"score": 1.0, "cost": 0.0, "runtime": 0.0}),
        cost_ceiling_usd=objective_spec.get("cost_ceiling_usd"),
    )
    out_dir = Path(args.output)
    cache_tier = study.get("cache", args.cache)
    facade = None
    if cache_tier == "persistent":
        facade = CacheFacade.create("persistent", study.get("cache_dir", args.cache_dir or str(out_dir / "cache")))
    elif cache_tier == "process":
        facade = CacheFacade.create("process")

    run_args = argparse.Namespace(**vars(args))
    run_args.backend = study.get("backend", args.backend)

    def make_run_config(trial_seed: int) -> RunConfig:
        return RunConfig(
            backend=_make_backend(run_args, scheme, dataset[0] if dataset else None),
            cache=facade,
            strategy=args.strategy,
            max_concurrency=_concurrency(args),
            seed=trial_seed,
            virtual_clock=args.virtual_clock,
        )

    report = run_study(
        scheme,
        dataset,
        space,
        objective,
        n_trials=int(study.get("n_trials", 25)),
        sampler=study.get("sampler", "tpe"),
        seed=int(study.get("seed", args.seed)),
        make_run_config=make_run_config,
        trial_concurrency=int(study.get("trial_concurrency", 1)),
        cache=facade,
    )
    doc = report.to_json()
    write_json(out_dir / "study_report.json", doc)
    columns = ["id", "objective", "score", "cost_usd", "runtime_ms", "backend_calls", "feasible", "status", "assignment"]
    trial_rows = [
        {**t, "assignment": json.dumps(t["assignment"], sort_keys=True)} for t in doc["trials"]
    ]
    write_csv(out_dir / "trials.csv", trial_rows, columns)
    render_study_figure(doc["trials"], objective.direction, out_dir / "study.png")
    if report.best is not None:
        print(
            f"best trial {report.best.id}: objective {report.best.objective:.4f}, "
            f"assignment {json.dumps(report.best.assignment, sort_keys=True)}"
        )
    else:
        print("no feasible successful trial")
    return EXIT_OK


_AGE_RE = re.compile(r"^(\d+)([smhd])$")
_AGE_UNITS = {"s": 1, "m": 60, "h": 3600, "d": 86400}


def cmd_cache(args) -> int:
    store = PersistentCache(args.cache_dir)
    if args.action == "stats":
        paths = store.entry_paths()
        total = sum(p.stat().st_size for p in paths)
        print(f"entries: {len(paths)}")
        print(f"bytes: {total}")
        return EXIT_OK
    if args.action == "verify":
        corrupt = store.verify()
        print(f"checked: {len(store.entry_paths()) + len(corrupt)}")
        print(f"corrupt: {len(corrupt)}")
        for path in corrupt:
            print(f"  {path}")
        return EXIT_OK
    if args.action == "gc":
        if not args.older_than:
            raise ConfigError("cache gc needs --older-than, e.g. 30d")
        match = _AGE_RE.match(args.older_than)
        if not match:
            raise ConfigError(f"bad --older-than value {args.older_than!r}")
        seconds = int(match.group(1)) * _AGE_UNITS[match.group(2)]
        removed = store.gc(seconds, now=time.time())
        print(f"removed: {removed}")
        return EXIT_OK
    raise ConfigError(f"unknown cache action {args.action!r}")


def cmd_export_dot(args) -> int:
    scheme = get_scheme(args.scheme)
    dataset = _load_dataset(args.dataset)
    hp = json.loads(args.hp) if args.hp else None
    out_dir = Path(args.output)
    rows, aggregate, exit_code = _run_dataset(args, scheme, dataset, hp, out_dir, True)
    if aggregate is None:
        return exit_code
    print(f"wrote {len(rows)} DOT graphs under {out_dir / 'dot'}")
    return exit_code


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {
            "run": cmd_run,
            "bench": cmd_bench,
            "optimize": cmd_optimize,
            "cache": cmd_cache,
            "export-dot": cmd_export_dot,
        }[args.command]
        return handler(args)
    except (_UsageError, ConfigError) as err:
        print(f"usage error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except DeadlockError as err:
        print(str(err), file=sys.stderr)
        return EXIT_DEADLOCK
    except OpFailedError as err:
        print(str(err), file=sys.stderr)
        return EXIT_OP_FAILURE
    except FotError as err:
        print(str(err), file=sys.stderr)
        return EXIT_OP_FAILURE


if __name__ == "__main__":
    sys.exit(main())
