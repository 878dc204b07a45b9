"""Command-line orchestration: train, evaluate, ablate, replay.

``train`` runs the evolution loop with a worker pool fanned out over genome
evaluations, writing per-generation stats, periodic checkpoints, the champion
genome and an atomically rewritten run manifest. ``evaluate`` replays a saved
champion for several strict-mode trials and emits trajectory CSVs plus SVG
figures. ``ablate`` sweeps the head yaw limit and tabulates the outcomes.
``replay`` re-runs one episode with textual status and snapshot frames.

Evaluation seeds derive from (run seed, generation, genome id), so worker
count and scheduling cannot change results. Exit codes: 0 success, 1 usage,
2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import multiprocessing
import os
import sys
import time
from dataclasses import replace
from pathlib import Path

from .arena import ArenaError, build_arena
from .config import ConfigError, NeatConfig, apply_env_overrides, dump_config, load_config
from .evolution import Evolution, TotalExtinctionError
from .gait import (EvaluationSetup, TRAJECTORY_COLUMNS, episode_for_genome,
                   evaluate_genome, run_episode)
from .network import compile_network
from .physics import SnakeWorld
from .serialize import (SerializationError, load_checkpoint, load_genome,
                        parameter_count, save_checkpoint, save_genome)
from .svgplot import Panel, write_arena_overlay, write_panels

ABLATION_ANGLES = (30.0, 45.0, 60.0, 90.0, 180.0)
STATS_COLUMNS = ("gen", "best", "mean", "species_count", "best_genome_size")


def genome_seed(run_seed: int, generation: int, genome_id: int) -> int:
    """Stable per-evaluation seed, independent of scheduling."""
    digest = hashlib.blake2b(f"{run_seed}:{generation}:{genome_id}".encode(),
                             digest_size=8).digest()
    return int.from_bytes(digest, "big")


# -- parallel evaluation -------------------------------------------------------

_WORKER_SETUP: EvaluationSetup | None = None


def _init_worker(setup: EvaluationSetup) -> None:
    global _WORKER_SETUP
    _WORKER_SETUP = setup


def _eval_task(task):
    gid, genome, seed = task
    return gid, evaluate_genome(genome, _WORKER_SETUP, seed)


class PopulationEvaluator:
    """Maps a population to fitnesses, optionally across worker processes."""

    def __init__(self, setup: EvaluationSetup, run_seed: int, workers: int = 1):
        self.setup = setup
        self.run_seed = run_seed
        self.workers = max(1, workers)
        self._pool = None
        if self.workers > 1:
            ctx = multiprocessing.get_context()
            self._pool = ctx.Pool(self.workers, initializer=_init_worker,
                                  initargs=(setup,))

    def __call__(self, population, generation: int) -> dict[int, float]:
        tasks = [(gid, population[gid],
                  genome_seed(self.run_seed, generation, gid))
                 for gid in sorted(population)]
        if self._pool is None:
            return {gid: evaluate_genome(genome, self.setup, seed)
                    for gid, genome, seed in tasks}
        results = self._pool.map(_eval_task, tasks, chunksize=4)
        return dict(results)

    def close(self) -> None:
        if self._pool is not None:
            self._pool.close()
            self._pool.join()
            self._pool = None


# -- shared output helpers -----------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_stats_csv(path: Path, history) -> None:
    rows = [",".join(STATS_COLUMNS)]
    for s in history:
        rows.append(f"{s.generation},{s.best_fitness!r},{s.mean_fitness!r},"
                    f"{s.species_count},{s.best_genome_size}")
    _atomic_write(path, "\n".join(rows) + "\n")


def _write_manifest(path: Path, *, config_path, config_hash, seed, run_id,
                    evolution, champion_path) -> dict:
    champion = evolution.best
    manifest = {
        "config_path": str(config_path),
        "config_sha256": config_hash,
        "seed": seed,
        "run_id": run_id,
        "generations_completed": evolution.generation,
        "champion_fitness": None if champion is None else champion.fitness,
        "champion_parameter_count": None if champion is None else parameter_count(champion),
        "champion_serialized_bytes": (champion_path.stat().st_size
                                      if champion_path.exists() else None),
        "champion_path": str(champion_path),
    }
    _atomic_write(path, json.dumps(manifest, indent=2) + "\n")
    return manifest


def _setup_from_args(args) -> EvaluationSetup:
    setup = EvaluationSetup(preset=args.preset)
    yaw = getattr(args, "yaw_limit", None)
    if yaw is not None:
        setup = setup.with_yaw_limit(math.radians(yaw))
    max_steps = getattr(args, "max_steps", None)
    if max_steps is not None:
        setup = replace(setup, fitness=replace(setup.fitness, max_steps=max_steps))
    return setup


def _write_trajectory_csv(path: Path, trajectory) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
        for row in trajectory:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


# -- train -----------------------------------------------------------------------

def _run_training(cfg: NeatConfig, setup: EvaluationSetup, seed: int,
                  generations: int, workers: int, out: Path, *,
                  config_path="<inline>", checkpoint_every: int = 5,
                  stop_at_threshold: bool = True, resume_from=None,
                  quiet: bool = False):
    out.mkdir(parents=True, exist_ok=True)
    config_text = dump_config(cfg)
    config_hash = hashlib.sha256(config_text.encode()).hexdigest()
    if resume_from is not None:
        evolution = load_checkpoint(resume_from)
        cfg = evolution.config
        if evolution.seed is not None:
            seed = evolution.seed
    else:
        evolution = Evolution(cfg, seed=seed)
    run_id = hashlib.sha1(f"{config_hash}:{seed}:{time.time_ns()}".encode()).hexdigest()
    champion_path = out / "champion.genome"
    manifest_path = out / "manifest.json"
    evaluator = PopulationEvaluator(setup, run_seed=seed, workers=workers)

    def on_generation(evo: Evolution, stats) -> None:
        _write_stats_csv(out / "stats.csv", evo.history)
        save_genome(evo.best, champion_path)
        if checkpoint_every and (evo.generation % checkpoint_every == 0):
            save_checkpoint(out / f"checkpoint_gen{evo.generation:04d}.pkl", evo)
        _write_manifest(manifest_path, config_path=config_path,
                        config_hash=config_hash, seed=seed, run_id=run_id,
                        evolution=evo, champion_path=champion_path)
        if not quiet:
            print(f"gen {stats.generation:4d}  best {stats.best_fitness:10.2f}  "
                  f"mean {stats.mean_fitness:10.2f}  species {stats.species_count:3d}  "
                  f"size {stats.best_genome_size}", flush=True)

    try:
        evolution.run(evaluator, max_generations=generations,
                      stop_at_threshold=stop_at_threshold,
                      on_generation=on_generation)
    finally:
        evaluator.close()
    save_genome(evolution.best, champion_path)
    save_checkpoint(out / "checkpoint_final.pkl", evolution)
    manifest = _write_manifest(manifest_path, config_path=config_path,
                               config_hash=config_hash, seed=seed, run_id=run_id,
                               evolution=evolution, champion_path=champion_path)
    return evolution, manifest


def cmd_train(args) -> int:
    cfg = apply_env_overrides(load_config(args.config))
    setup = _setup_from_args(args)
    evolution, manifest = _run_training(
        cfg, setup, args.seed, args.generations, args.workers, Path(args.out),
        config_path=args.config, checkpoint_every=args.checkpoint_every,
        stop_at_threshold=not args.no_threshold_stop, resume_from=args.resume)
    print(json.dumps(manifest, indent=2))
    return 0


# -- evaluate --------------------------------------------------------------------

def _figures_from_trajectory(out: Path, arena, reports) -> None:
    trajectories = [[(row[2], row[3]) for row in r.trajectory] for r in reports]
    labels = [f"trial {i} ({'ok' if r.success else 'fail'})"
              for i, r in enumerate(reports)]
    write_arena_overlay(out / "trajectories.svg", arena, trajectories, labels,
                        caption="head trajectories, eval mode")
    rows = reports[0].trajectory
    ts = [row[1] for row in rows]
    metric_panels = [
        Panel("head x", [("", ts, [row[2] for row in rows])], "t [s]", "x [m]"),
        Panel("head y", [("", ts, [row[3] for row in rows])], "t [s]", "y [m]"),
        Panel("head angle", [("", ts, [row[4] for row in rows])], "t [s]", "theta [rad]"),
        Panel("wave frequency", [("", ts, [row[5] for row in rows])], "t [s]", "omega [rad/s]"),
        Panel("steering offset", [("", ts, [row[6] for row in rows])], "t [s]", "phi0 [rad]"),
        Panel("distance to goal", [("", ts, [row[7] for row in rows])], "t [s]", "d [m]"),
    ]
    write_panels(out / "metrics.svg", metric_panels, columns=3)
    torque_panels = [
        Panel(f"joint {j + 1} torque", [("", ts, [row[9 + j] for row in rows])],
              "t [s]", "tau [N m]")
        for j in range(8)
    ]
    write_panels(out / "torques.svg", torque_panels, columns=3)


def cmd_evaluate(args) -> int:
    genome = load_genome(args.champion)
    setup = _setup_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    for trial in range(args.trials):
        report = episode_for_genome(genome, setup, seed=trial, mode="eval",
                                    record_trajectory=True)
        _write_trajectory_csv(out / f"trial_{trial}.csv", report.trajectory)
        reports.append(report)
    summary = {
        "trials": args.trials,
        "preset": setup.preset,
        "mean_routing_time_s": sum(r.routing_time_s for r in reports) / len(reports),
        "mean_routing_time_normalized_s":
            sum(r.routing_time_normalized_s for r in reports) / len(reports),
        "mean_collisions": sum(r.collisions for r in reports) / len(reports),
        "success_rate": sum(r.success for r in reports) / len(reports),
        "mean_fitness": sum(r.fitness for r in reports) / len(reports),
        "champion_parameter_count": parameter_count(genome),
        "champion_serialized_bytes": Path(args.champion).stat().st_size,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n",
                                      encoding="utf-8")
    _figures_from_trajectory(out, build_arena(setup.preset), reports)
    print(json.dumps(summary, indent=2))
    return 0


# -- ablate ----------------------------------------------------------------------

def cmd_ablate(args) -> int:
    cfg = apply_env_overrides(load_config(args.config))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for angle in ABLATION_ANGLES:
        run_out = out / f"yaw_{int(angle)}"
        setup = EvaluationSetup(preset=args.preset).with_yaw_limit(math.radians(angle))
        evolution, _ = _run_training(
            cfg, setup, args.seed, args.generations, args.workers, run_out,
            config_path=args.config, checkpoint_every=0, quiet=True,
            stop_at_threshold=not args.no_threshold_stop)
        report = episode_for_genome(evolution.best, setup, seed=0, mode="eval")
        rows.append({
            "max_head_angle_deg": angle,
            "collisions": report.collisions,
            "steps_to_goal": report.steps,
            "final_fitness": evolution.best.fitness,
            "eval_success": report.success,
        })
        print(f"yaw {angle:6.1f} deg: collisions {report.collisions}, "
              f"steps {report.steps}, fitness {evolution.best.fitness:.1f}",
              flush=True)

    with open(out / "ablation.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    lines = [f"{'angle':>8} {'collisions':>11} {'steps':>8} {'fitness':>10}"]
    for row in rows:
        lines.append(f"{row['max_head_angle_deg']:8.1f} {row['collisions']:11d} "
                     f"{row['steps_to_goal']:8d} {row['final_fitness']:10.1f}")
    (out / "ablation.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))

    best_angle = min(rows, key=lambda r: (r["collisions"],
                                          -r["final_fitness"]))["max_head_angle_deg"]
    if best_angle != 45.0:
        print(f"advisory: best collision count at {best_angle} deg, not 45 deg",
              file=sys.stderr)
    else:
        print("advisory: 45 deg attains the best collision count", file=sys.stderr)
    return 0


# -- replay ----------------------------------------------------------------------

def cmd_replay(args) -> int:
    genome = load_genome(args.champion)
    setup = _setup_from_args(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snapshots = sorted(float(s) for s in args.snapshots.split(",")) if args.snapshots else []
    arena = build_arena(setup.preset)
    world = SnakeWorld(arena, setup.spec, setup.sim)
    network = compile_network(genome)
    pending = list(snapshots)
    frames = []
    status_every = max(1, round(1.0 / setup.sim.dt))

    def on_step(w: SnakeWorld) -> None:
        from .arena import distance_to_goal

        if pending and w.time >= pending[0] - 1e-9:
            pending.pop(0)
            frames.append((w.time, w.state.copy()))
        if w.steps % status_every == 0:
            d, _ = distance_to_goal(w.head_pose, arena)
            hx, hy, _ = w.head_pose
            print(f"t={w.time:7.2f}s head=({hx:6.2f},{hy:6.2f}) "
                  f"d_goal={d:6.2f} collisions={w.collision_count}", flush=True)
        if args.speed > 0:
            time.sleep(setup.sim.dt / args.speed)

    report = run_episode(network, world, setup.fitness, setup.gait,
                         mode=args.mode, record_trajectory=True, on_step=on_step)
    for stamp, state in frames:
        write_arena_overlay(
            out / f"snapshot_t{stamp:07.2f}.svg".replace(" ", "0"), arena,
            trajectories=[], snake_state=state,
            link_length=setup.spec.link_length, link_width=setup.spec.link_width,
            caption=f"t = {stamp:.2f} s")
    print(f"episode: steps={report.steps} collisions={report.collisions} "
          f"success={report.success} fitness={report.fitness:.2f}")
    return 0


# -- argument parsing -------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's default 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="neatsnake",
                     description="Evolve serpenoid gait controllers for a "
                                 "planar snake robot.")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="run evolution")
    train.add_argument("--config", required=True, help="NEAT config file")
    train.add_argument("--seed", type=int, default=0)
    train.add_argument("--generations", type=int, default=100)
    train.add_argument("--workers", type=int, default=1)
    train.add_argument("--preset", default="default")
    train.add_argument("--yaw-limit", type=float, default=None,
                       help="head yaw clamp in degrees")
    train.add_argument("--out", default="runs/train")
    train.add_argument("--checkpoint-every", type=int, default=5,
                       help="generations between checkpoints (0 disables)")
    train.add_argument("--no-threshold-stop", action="store_true",
                       help="ignore fitness_threshold and run all generations")
    train.add_argument("--resume", default=None, help="checkpoint to continue")
    train.set_defaults(fn=cmd_train)

    ev = sub.add_parser("evaluate", help="strict-mode trials for a champion")
    ev.add_argument("champion", help="champion genome file")
    ev.add_argument("--preset", default="default")
    ev.add_argument("--trials", type=int, default=5)
    ev.add_argument("--yaw-limit", type=float, default=None)
    ev.add_argument("--out", default="runs/evaluate")
    ev.set_defaults(fn=cmd_evaluate)

    ab = sub.add_parser("ablate", help="sweep the head yaw limit")
    ab.add_argument("--config", required=True)
    ab.add_argument("--seed", type=int, default=0)
    ab.add_argument("--generations", type=int, default=100)
    ab.add_argument("--workers", type=int, default=1)
    ab.add_argument("--preset", default="default")
    ab.add_argument("--out", default="runs/ablate")
    ab.add_argument("--no-threshold-stop", action="store_true")
    ab.set_defaults(fn=cmd_ablate)

    rp = sub.add_parser("replay", help="re-run one episode with status output")
    rp.add_argument("champion")
    rp.add_argument("--preset", default="default")
    rp.add_argument("--mode", choices=("train", "eval"), default="eval")
    rp.add_argument("--speed", type=float, default=0.0,
                    help="wall-clock pacing factor; 0 runs flat out")
    rp.add_argument("--snapshots", default="",
                    help="comma-separated simulation times for SVG frames")
    rp.add_argument("--out", default="runs/replay")
    rp.set_defaults(fn=cmd_replay)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ArenaError, SerializationError, TotalExtinctionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
