"""Command-line surface: run, resume, simulate, distill, bench, map-render.

Exit codes: 0 success, 2 configuration/usage error, 3 runtime error.  Every
command is deterministic given its config and rng seed; language-model
operators are the exception unless the config selects the scripted mock
transport.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .config import ConfigError, LlmSettings, RunConfig, load_config
from .dataset import (
    DatasetError,
    dataset_stats,
    filter_archives,
    final_map_distill,
    load_archives,
    split_holdout,
    stats_csv,
    threshold_distill,
    write_dataset,
)
from .engine import (
    EngineError,
    MapState,
    load_snapshot,
    max_fitness,
    niches_filled,
    qd_score,
    save_snapshot,
    seed_map,
    evolve,
)
from .gp import (
    GpError,
    build_task,
    exact_success_prob,
    llm_fix,
    run_trials,
    tune_rate,
)
from .llm import LlmClient, MockTransport, TransportError, client_from_env
from .mutation import export_accepted_diffs, make_operator
from .physics import PhysicsError, SimConfig, initial_state, make_terrain, simulate, step
from .svg import AXIS_NAMES, render_map_slice, render_scene
from .walker import WalkerError, parse, validate
from .workerexec import WorkerError, WorkerPoolExecutor

import numpy as np

BENCH_HEADER = ["task", "k_bugs", "operator", "trials", "successes", "rate", "oracle_rate"]
TRAJECTORY_HEADER = ["t", "x", "y"]

_RUNTIME_ERRORS = (EngineError, PhysicsError, WalkerError, DatasetError, GpError,
                   TransportError, WorkerError, OSError)


def _client_for(llm: LlmSettings) -> LlmClient:
    if llm.transport == "mock":
        return LlmClient(MockTransport(list(llm.mock_script)), retry_delays=())
    return client_from_env()


def _build_operator(config: RunConfig):
    if config.operator == "spec":
        return make_operator("spec")
    return make_operator(config.operator, _client_for(config.llm))


def _read_seeds(paths: list[str]) -> list[tuple[str, str]]:
    seeds = []
    for raw in paths:
        path = Path(raw)
        if not path.is_file():
            raise ConfigError(f"seed program not found: {path}")
        seeds.append((path.stem, path.read_text()))
    return seeds


def _make_executor(args):
    if getattr(args, "executor", "inprocess") == "worker":
        cmd = tuple(args.worker_cmd.split()) if args.worker_cmd else None
        return WorkerPoolExecutor(cmd=cmd, workers=getattr(args, "worker_count", 1))
    return None  # engine default: in-process


def _write_artifacts(out_dir: Path, map_state, runlog) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    save_snapshot(map_state, out_dir / "snapshot.json", runlog)
    runlog.to_csv(out_dir / "runlog.csv")
    export_accepted_diffs(map_state, out_dir / "accepted_diffs.jsonl")


def _summary(map_state, runlog) -> str:
    return (f"run {map_state.run_id}: iterations={len(runlog.rows)} "
            f"evals={map_state.evals} niches={niches_filled(map_state)} "
            f"qd={qd_score(map_state):.6g} max_fitness={max_fitness(map_state):.6g}")


def _snapshot_writer(out_dir: Path, every: int):
    if every <= 0:
        return None

    def write(iteration: int, map_state, runlog) -> None:
        if iteration % every == 0:
            save_snapshot(map_state, out_dir / f"snapshot_iter{iteration:05d}.json", runlog)

    return write


# ---------------------------------------------------------------------------
# commands


def cmd_run(args) -> int:
    config = load_config(args.config)
    if args.jobs is not None:
        config.jobs = args.jobs
    out_dir = Path(args.output_dir or config.output_dir)
    seeds = _read_seeds(config.seeds)
    terrain = make_terrain(config.terrain, **config.terrain_params)
    operator = _build_operator(config)
    map_state = MapState.create(grid=config.grid, seed=config.rng_seed,
                                run_id=config.run_id)
    executor = _make_executor(args)
    try:
        seed_map(map_state, seeds, terrain, config.physics, executor=executor)
        out_dir.mkdir(parents=True, exist_ok=True)
        runlog = evolve(
            map_state, operator, terrain, config.physics,
            iterations=config.iterations, batch_size=config.batch_size,
            executor=executor, jobs=config.jobs,
            on_iteration=_snapshot_writer(out_dir, config.snapshot_every),
        )
    finally:
        if executor is not None:
            executor.close()
    _write_artifacts(out_dir, map_state, runlog)
    print(_summary(map_state, runlog))
    return 0


def cmd_resume(args) -> int:
    config = load_config(args.config)
    if args.jobs is not None:
        config.jobs = args.jobs
    map_state, runlog = load_snapshot(args.snapshot)
    out_dir = Path(args.output_dir or config.output_dir)
    terrain = make_terrain(config.terrain, **config.terrain_params)
    operator = _build_operator(config)
    executor = _make_executor(args)
    try:
        runlog = evolve(
            map_state, operator, terrain, config.physics,
            iterations=args.iterations, batch_size=config.batch_size,
            executor=executor, jobs=config.jobs, runlog=runlog,
            on_iteration=_snapshot_writer(out_dir, config.snapshot_every),
        )
    finally:
        if executor is not None:
            executor.close()
    _write_artifacts(out_dir, map_state, runlog)
    print(_summary(map_state, runlog))
    return 0


def cmd_simulate(args) -> int:
    spec = parse(Path(args.spec_file).read_text())
    report = validate(spec)
    if not report.ok:
        raise WalkerError("walker fails validation: " + ", ".join(sorted(report.rules())))
    params = {}
    for item in args.terrain_param or []:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"terrain param must look like name=value, got {item!r}")
        try:
            params[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"terrain param {key!r} needs a numeric value") from exc
    terrain = make_terrain(args.terrain, **params)
    sim_config = SimConfig(duration=args.duration) if args.duration is not None else SimConfig()
    result = simulate(spec, terrain, sim_config)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRAJECTORY_HEADER)
            for t, x, y in result.trajectory_rows(sim_config.dt):
                writer.writerow([repr(t), repr(x), repr(y)])
    if args.dump_svg:
        state = initial_state(spec, terrain, sim_config)
        for _ in range(sim_config.frames):
            state = step(state, terrain, sim_config)
        Path(args.dump_svg).write_text(
            render_scene(spec, terrain, x=state.x, y=state.y))
    print(f"fitness={result.fitness!r}")
    return 0


def cmd_distill(args) -> int:
    archives = load_archives(args.archives, jobs=args.jobs or 1)
    archives = filter_archives(archives, exclude_seeds=args.exclude_seed or ())
    if args.method == "threshold":
        ds = threshold_distill(archives, args.pct)
    else:
        ds = final_map_distill(archives)
    holdout = None
    if args.holdout_fraction:
        ds, holdout = split_holdout(ds, args.holdout_fraction, seed=args.holdout_seed)
    out = Path(args.out)
    write_dataset(ds, out)
    if holdout is not None:
        holdout_path = out.parent / (out.stem + ".holdout" + out.suffix)
        write_dataset(holdout, holdout_path)
        print(f"held out {len(holdout)} examples to {holdout_path}")
    if args.stats:
        stats_csv(dataset_stats(ds), args.stats)
    print(f"wrote {len(ds)} examples to {out}")
    return 0


def cmd_bench(args) -> int:
    task = build_task(args.task)
    max_k = 5 if args.task == "four_parity" else 2
    k_max = args.k_max if args.k_max is not None else max_k
    if not 0 <= args.k_min <= k_max <= max_k:
        raise ConfigError(f"need 0 <= k-min <= k-max <= {max_k} for {args.task}")
    rows = []
    if args.operator == "gp-node":
        rate = args.rate if args.rate is not None else tune_rate(task)
        rng = np.random.default_rng(args.seed)
        for k in range(args.k_min, k_max + 1):
            report = run_trials(task, k, rate, args.trials, rng)
            rows.append([task.name, k, report.operator, report.n_trials,
                         report.successes, repr(rate),
                         repr(exact_success_prob(task, k, rate))])
    else:
        if args.mock_script:
            script = json.loads(Path(args.mock_script).read_text())
            if not isinstance(script, list):
                raise ConfigError("--mock-script file must hold a JSON list of strings")
            client = LlmClient(MockTransport(script), retry_delays=())
        else:
            client = client_from_env()
        for k in range(args.k_min, k_max + 1):
            report = llm_fix(task, k, client, args.trials, operator=args.operator)
            rows.append([task.name, k, report.operator, report.n_trials,
                         report.successes, "", ""])
    target = open(args.out, "w", newline="") if args.out else sys.stdout
    writer = csv.writer(target)
    writer.writerow(BENCH_HEADER)
    writer.writerows(rows)
    if args.out:
        target.close()
    return 0


def cmd_map_render(args) -> int:
    map_state, _ = load_snapshot(args.snapshot)
    Path(args.out).write_text(render_map_slice(map_state, args.slice, args.index))
    print(f"rendered {args.slice} slice {args.index} to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# argument surface


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elmrace",
        description="Quality-diversity evolution of 2D mass-spring walkers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_exec_flags(p):
        p.add_argument("--jobs", type=int, default=None,
                       help="physics evaluation processes (overrides config)")
        p.add_argument("--executor", choices=("inprocess", "worker"), default="inprocess",
                       help="where candidate programs execute")
        p.add_argument("--worker-cmd", default=None,
                       help="command line launching one worker process")
        p.add_argument("--worker-count", type=int, default=1,
                       help="worker processes when --executor worker")
        p.add_argument("--output-dir", default=None,
                       help="artifact directory (overrides config)")

    p = sub.add_parser("run", help="full evolution run from a config file")
    p.add_argument("--config", required=True)
    add_exec_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("resume", help="continue a run from a snapshot")
    p.add_argument("--config", required=True)
    p.add_argument("--snapshot", required=True)
    p.add_argument("--iterations", type=int, required=True,
                   help="additional iterations to run (0 re-emits artifacts)")
    add_exec_flags(p)
    p.set_defaults(func=cmd_resume)

    p = sub.add_parser("simulate", help="score one walker spec file")
    p.add_argument("spec_file")
    p.add_argument("--terrain", default="flat",
                   choices=("flat", "left_wall", "right_wall", "tunnel", "bumpy"))
    p.add_argument("--terrain-param", action="append", metavar="NAME=VALUE")
    p.add_argument("--duration", type=float, default=None)
    p.add_argument("--out", default=None, help="trajectory CSV path")
    p.add_argument("--dump-svg", default=None, help="render the final frame as SVG")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("distill", help="build a fine-tuning dataset from snapshots")
    p.add_argument("archives", nargs="+", help="map snapshot files")
    p.add_argument("--method", choices=("threshold", "final-map"), default="threshold")
    p.add_argument("--pct", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.add_argument("--stats", default=None, help="statistics CSV path")
    p.add_argument("--exclude-seed", action="append", metavar="SEED_NAME")
    p.add_argument("--holdout-fraction", type=float, default=0.0)
    p.add_argument("--holdout-seed", type=int, default=0)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("bench", help="mutation-operator repair benchmark")
    p.add_argument("--task", choices=("four_parity", "quadratic"), required=True)
    p.add_argument("--operator", choices=("gp-node", "llm-prompt", "llm-diff"),
                   default="gp-node")
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--rate", type=float, default=None,
                   help="node mutation rate (default: tuned per task)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--mock-script", default=None,
                   help="JSON list of scripted completions (testing)")
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("map-render", help="SVG heatmap of a map snapshot slice")
    p.add_argument("snapshot")
    p.add_argument("--slice", choices=AXIS_NAMES, default="mass")
    p.add_argument("--index", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_map_render)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except _RUNTIME_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
