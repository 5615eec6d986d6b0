"""Command-line entry point, sweep execution and metrics persistence.

A single run writes one CSV with a row per outer iteration; a sweep crosses
architectures, broadcast radii, games and seeds, writes one CSV per run
plus a merged ``metrics.csv`` and a JSON manifest, and reproduces files
byte-for-byte given the same spec and seeds (the ``wall_ms`` column is
measured timing and is the one volatile column).

CSV schema: ``game, architecture, radius, seed, k, t, v_pop_hat, wall_ms``
with '.' decimals and 17-significant-digit reals, so every float round-trips
exactly.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .env import Game
from .orchestrator import (
    AblationFlags,
    Architecture,
    ExperimentConfig,
    MetricsRow,
    desk_config,
    run_training,
)

__all__ = [
    "SweepSpec",
    "METRICS_HEADER",
    "parse_config",
    "run_label",
    "write_metrics_csv",
    "read_metrics_csv",
    "run_sweep",
    "main",
]

OUTPUT_DIR_ENV = "GRIDMFC_OUTPUT_DIR"
METRICS_HEADER = ("game", "architecture", "radius", "seed", "k", "t", "v_pop_hat", "wall_ms")


@dataclass(frozen=True)
class SweepSpec:
    """Cross-product of run axes over a shared base configuration.

    The radius axis sets both graph radii; ``vis_radius`` pins the
    visibility radius instead, letting only the communication radius sweep.
    """

    base: ExperimentConfig
    architectures: tuple[Architecture, ...]
    radii: tuple[float, ...]
    games: tuple[Game, ...]
    seeds: tuple[int, ...]
    output_dir: Path
    vis_radius: float | None = None

    def configs(self) -> list[ExperimentConfig]:
        runs = []
        for game in self.games:
            for arch in self.architectures:
                for radius in self.radii:
                    for seed in self.seeds:
                        runs.append(
                            dataclasses.replace(
                                self.base,
                                game=game,
                                architecture=arch,
                                comm_radius_frac=radius,
                                vis_radius_frac=(
                                    radius if self.vis_radius is None else self.vis_radius
                                ),
                                seed=seed,
                            )
                        )
        return runs

    def validate(self) -> None:
        if not (self.architectures and self.radii and self.games and self.seeds):
            raise ValueError("sweep axes must be non-empty")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("sweep seeds must be distinct")
        for config in self.configs():
            config.validate()


def run_label(config: ExperimentConfig) -> str:
    return (
        f"{config.game.value}_{config.architecture.value}"
        f"_r{config.comm_radius_frac:g}_s{config.seed}"
    )


def _format(value: float) -> str:
    return format(value, ".17g")


def metrics_records(config: ExperimentConfig, rows: list[MetricsRow]) -> list[list[str]]:
    return [
        [
            config.game.value,
            config.architecture.value,
            _format(config.comm_radius_frac),
            str(config.seed),
            str(row.k),
            str(row.t),
            _format(row.v_pop_hat),
            _format(row.wall_ms),
        ]
        for row in rows
    ]


def write_metrics_csv(path: Path, records: list[list[str]]) -> None:
    """Write atomically: temp file in the same directory, then rename."""
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_HEADER)
        writer.writerows(records)
    tmp.replace(path)


def read_metrics_csv(path: Path) -> list[dict]:
    """Rows as dicts with numeric fields parsed back to exact floats/ints."""
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            out.append(
                {
                    "game": row["game"],
                    "architecture": row["architecture"],
                    "radius": float(row["radius"]),
                    "seed": int(row["seed"]),
                    "k": int(row["k"]),
                    "t": int(row["t"]),
                    "v_pop_hat": float(row["v_pop_hat"]),
                    "wall_ms": float(row["wall_ms"]),
                }
            )
    return out


def _execute_run(args: tuple[ExperimentConfig, str]) -> tuple[str, list[list[str]]]:
    config, label = args
    rows, _ = run_training(config)
    return label, metrics_records(config, rows)


def run_sweep(spec: SweepSpec, workers: int = 1) -> dict:
    """Execute every run in the sweep; returns the manifest dictionary.

    Runs are independent; with ``workers > 1`` they execute in separate
    processes. Output files are keyed and ordered by the spec's own run
    order, so scheduling cannot change any file's content.
    """
    spec.validate()
    spec.output_dir.mkdir(parents=True, exist_ok=True)
    configs = spec.configs()
    labels = [run_label(c) for c in configs]
    results: dict[str, list[list[str]] | None] = {}
    failures: dict[str, str] = {}

    jobs = list(zip(configs, labels))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {label: pool.submit(_execute_run, job)
                       for job, label in zip(jobs, labels)}
            for label, future in futures.items():
                try:
                    results[label] = future.result()[1]
                except Exception as error:  # a failed run must not sink the sweep
                    failures[label] = f"{type(error).__name__}: {error}"
                    results[label] = None
    else:
        for config, label in jobs:
            try:
                results[label] = _execute_run((config, label))[1]
            except Exception as error:
                failures[label] = f"{type(error).__name__}: {error}"
                results[label] = None

    merged: list[list[str]] = []
    for config, label in jobs:
        records = results[label]
        if records is None:
            continue
        write_metrics_csv(spec.output_dir / f"run_{label}.csv", records)
        merged.extend(records)
    write_metrics_csv(spec.output_dir / "metrics.csv", merged)

    manifest = {
        "runs": [
            {
                "label": label,
                "config": config_to_dict(config),
                "status": "failed" if label in failures else "ok",
                **({"error": failures[label]} if label in failures else {}),
            }
            for config, label in jobs
        ],
    }
    with open(spec.output_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return manifest


def config_to_dict(config: ExperimentConfig) -> dict:
    data = dataclasses.asdict(config)
    data["game"] = config.game.value
    data["architecture"] = config.architecture.value
    return data


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridmfc",
        description="Train populations of grid agents on cooperative games "
        "under networked, central-agent or independent architectures.",
    )
    parser.add_argument("--preset", choices=["full", "desk"], default="full",
                        help="'desk' is the small 10x10/50-agent/50-iteration setup")
    parser.add_argument("--game", nargs="+", choices=[g.value for g in Game], default=None)
    parser.add_argument("--arch", nargs="+", choices=[a.value for a in Architecture],
                        default=None)
    parser.add_argument("--radius", nargs="+", type=float, default=None,
                        help="broadcast radius fractions (set both comm and visibility)")
    parser.add_argument("--comm-radius", type=float, default=None,
                        help="communication radius fraction alone (overrides --radius)")
    parser.add_argument("--vis-radius", type=float, default=None,
                        help="visibility radius fraction alone (overrides --radius)")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--seeds", type=int, default=1,
                        help="number of trials; run s uses seed --seed + s")
    parser.add_argument("--height", type=int, default=None)
    parser.add_argument("--width", type=int, default=None)
    parser.add_argument("--agents", type=int, default=None)
    parser.add_argument("--iterations", type=int, default=None)
    parser.add_argument("--collect-steps", type=int, default=None)
    parser.add_argument("--train-steps", type=int, default=None)
    parser.add_argument("--eval-steps", type=int, default=None)
    parser.add_argument("--exchange-rounds", type=int, default=None)
    parser.add_argument("--reward-rounds", type=int, default=None)
    parser.add_argument("--field-rounds", type=int, default=None)
    parser.add_argument("--link-failure", type=float, default=None)
    parser.add_argument("--gamma", type=float, default=None)
    parser.add_argument("--q-temperature", type=float, default=None)
    parser.add_argument("--batch-size", type=int, default=None)
    parser.add_argument("--log-policy-floor", type=float, default=None)
    parser.add_argument("--target-sync-every", type=int, default=None)
    parser.add_argument("--learning-rate", type=float, default=None)
    parser.add_argument("--hidden-width", type=int, default=None)
    parser.add_argument("--adopt-temp-start", type=float, default=None)
    parser.add_argument("--adopt-temp-end", type=float, default=None)
    parser.add_argument("--fixed-adopt-temp", type=float, default=None)
    parser.add_argument("--zeros-mean-field", action="store_true",
                        help="population-independent observations (zeros for the mean field)")
    parser.add_argument("--oracle-mean-field", action="store_true")
    parser.add_argument("--individual-reward-only", action="store_true")
    parser.add_argument("--oracle-average-reward", action="store_true")
    parser.add_argument("--checkpoint-every", type=int, default=None)
    parser.add_argument("--checkpoint-dir", default=None)
    parser.add_argument("--output-dir", type=Path, default=None,
                        help=f"defaults to ./runs (or ${OUTPUT_DIR_ENV})")
    parser.add_argument("--workers", type=int, default=1)
    parser.add_argument("--dump-config", action="store_true",
                        help="print the resolved configuration and exit")
    return parser


def parse_config(argv: list[str] | None = None) -> tuple[ExperimentConfig | SweepSpec, argparse.Namespace]:
    """Resolve flags into a single config, or a sweep when any axis has
    several values or several seeds are requested."""
    args = _build_parser().parse_args(argv)
    base = desk_config() if args.preset == "desk" else ExperimentConfig()

    overrides = {}
    for flag, field_name in [
        ("height", "height"),
        ("width", "width"),
        ("agents", "n_agents"),
        ("iterations", "iterations"),
        ("collect_steps", "collect_steps"),
        ("train_steps", "train_steps"),
        ("eval_steps", "eval_steps"),
        ("exchange_rounds", "exchange_rounds"),
        ("reward_rounds", "reward_rounds"),
        ("field_rounds", "field_rounds"),
        ("link_failure", "link_failure_prob"),
        ("gamma", "gamma"),
        ("q_temperature", "q_temperature"),
        ("batch_size", "batch_size"),
        ("log_policy_floor", "log_policy_floor"),
        ("target_sync_every", "target_sync_every"),
        ("learning_rate", "learning_rate"),
        ("hidden_width", "hidden_width"),
        ("adopt_temp_start", "adopt_temp_start"),
        ("adopt_temp_end", "adopt_temp_end"),
        ("checkpoint_every", "checkpoint_every"),
        ("checkpoint_dir", "checkpoint_dir"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            overrides[field_name] = value
    ablations = AblationFlags(
        population_independent_obs=args.zeros_mean_field,
        oracle_mean_field=args.oracle_mean_field,
        individual_reward_only=args.individual_reward_only,
        oracle_average_reward=args.oracle_average_reward,
        fixed_adopt_temperature=args.fixed_adopt_temp,
    )
    base = dataclasses.replace(base, ablations=ablations, seed=args.seed, **overrides)

    if args.radius and args.comm_radius is not None:
        raise ValueError("--radius conflicts with --comm-radius")
    if args.comm_radius is not None:
        base = dataclasses.replace(base, comm_radius_frac=args.comm_radius)
    if args.vis_radius is not None:
        base = dataclasses.replace(base, vis_radius_frac=args.vis_radius)

    games = tuple(Game(g) for g in args.game) if args.game else (base.game,)
    archs = tuple(Architecture(a) for a in args.arch) if args.arch else (base.architecture,)
    radii = tuple(args.radius) if args.radius else (base.comm_radius_frac,)
    seeds = tuple(args.seed + s for s in range(args.seeds))

    output_dir = args.output_dir
    if output_dir is None:
        output_dir = Path(os.environ.get(OUTPUT_DIR_ENV, "runs"))

    if args.vis_radius is not None:
        vis_single = args.vis_radius
    elif args.radius:
        vis_single = radii[0]
    else:
        vis_single = base.vis_radius_frac
    if len(games) * len(archs) * len(radii) * len(seeds) == 1:
        config = dataclasses.replace(
            base,
            game=games[0],
            architecture=archs[0],
            comm_radius_frac=radii[0],
            vis_radius_frac=vis_single,
            seed=seeds[0],
        )
        config.validate()
        return config, args
    spec = SweepSpec(
        base=base,
        architectures=archs,
        radii=radii,
        games=games,
        seeds=seeds,
        output_dir=output_dir,
        # The visibility radius follows the sweep axis unless pinned
        # explicitly (or no axis was given, which pins it to the base).
        vis_radius=args.vis_radius if (args.vis_radius is not None or args.radius) else base.vis_radius_frac,
    )
    spec.validate()
    return spec, args


def main(argv: list[str] | None = None) -> int:
    try:
        resolved, args = parse_config(argv)
    except ValueError as error:
        print(f"error: {error}", file=sys.stderr)
        return 2

    if args.dump_config:
        if isinstance(resolved, SweepSpec):
            payload = {
                "base": config_to_dict(resolved.base),
                "architectures": [a.value for a in resolved.architectures],
                "radii": list(resolved.radii),
                "vis_radius": resolved.vis_radius,
                "games": [g.value for g in resolved.games],
                "seeds": list(resolved.seeds),
                "output_dir": str(resolved.output_dir),
            }
        else:
            payload = config_to_dict(resolved)
        print(json.dumps(payload, indent=2, sort_keys=True))
        return 0

    output_dir = args.output_dir or Path(os.environ.get(OUTPUT_DIR_ENV, "runs"))
    if isinstance(resolved, ExperimentConfig):
        resolved = SweepSpec(
            base=resolved,
            architectures=(resolved.architecture,),
            radii=(resolved.comm_radius_frac,),
            games=(resolved.game,),
            seeds=(resolved.seed,),
            output_dir=output_dir,
        )
    manifest = run_sweep(resolved, workers=args.workers)
    failed = [run["label"] for run in manifest["runs"] if run["status"] != "ok"]
    for label in failed:
        print(f"run failed: {label}", file=sys.stderr)
    print(f"wrote {resolved.output_dir / 'metrics.csv'}")
    return 1 if failed else 0


if __name__ == "__main__":
    raise SystemExit(main())
