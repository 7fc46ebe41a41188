"""Batch front door: single runs, replication batches, and the xi sensitivity sweep.

Exit codes: 0 success, 2 invalid configuration (the message names the field),
3 I/O failure. Sweep cells that crash are recorded as empty rows and make the
command exit nonzero without aborting the rest of the grid.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from . import engine, output
from .config import ConfigError, ScenarioConfig, load_config

DEFAULT_XI_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass(frozen=True)
class SweepSpec:
    """One sensitivity experiment: xi grid x named scenario configurations."""

    configurations: dict[str, ScenarioConfig]
    xi_values: tuple[float, ...]
    replications: int
    base_seed: int
    out_dir: Path
    workers: int = 1

    def validate(self) -> None:
        if not self.configurations:
            raise ConfigError("configurations: must be nonempty")
        if not self.xi_values:
            raise ConfigError("xi: must be nonempty")
        for x in self.xi_values:
            if not (0.0 <= x <= 1.0):
                raise ConfigError(f"xi: value {x} outside [0, 1]")
        if self.replications < 1:
            raise ConfigError("replications: must be >= 1")


def _scaled_position(config: ScenarioConfig, row_frac: float, col_frac: float) -> tuple[int, int]:
    return (
        min(int(round(config.grid_rows * row_frac)), config.grid_rows - 1),
        min(int(round(config.grid_cols * col_frac)), config.grid_cols - 1),
    )


def sweep_configurations(base: ScenarioConfig) -> dict[str, ScenarioConfig]:
    """Four initial configurations: equal vs. unequal city weights x two spacings.

    The unequal variants keep the base amplitudes and job shares; the equal
    variants average them. Positions are placed on the grid diagonal, the
    second (dominant) centre toward the top-left.
    """
    if len(base.centers) != 2:
        raise ConfigError("centers: the built-in sweep configurations need exactly 2 centers")
    far = (_scaled_position(base, 0.8, 0.8), _scaled_position(base, 0.1, 0.1))
    near = (_scaled_position(base, 0.7, 0.7), _scaled_position(base, 0.2, 0.2))
    mean_amplitude = sum(c.amplitude for c in base.centers) / 2.0
    mean_share = sum(c.job_share for c in base.centers) / 2.0

    def variant(positions: tuple[tuple[int, int], tuple[int, int]], equal: bool) -> ScenarioConfig:
        centers = []
        for center, position in zip(base.centers, positions):
            if equal:
                center = replace(center, amplitude=mean_amplitude, job_share=mean_share)
            centers.append(replace(center, position=position))
        return replace(base, centers=tuple(centers))

    return {
        "equal_near": variant(near, equal=True),
        "equal_far": variant(far, equal=True),
        "unequal_near": variant(near, equal=False),
        "unequal_far": variant(far, equal=False),
    }


def _apply_overrides(config: ScenarioConfig, args: argparse.Namespace) -> ScenarioConfig:
    if getattr(args, "steps", None) is not None:
        config = replace(config, steps=args.steps)
    if getattr(args, "disable_landuse", False):
        config = replace(config, landuse_enabled=False)
    if getattr(args, "congested_eval", False):
        config = replace(config, congestion_in_evaluation=True)
    return config


def _cumulative_links(state: engine.SimState) -> list[list[tuple[int, int]]]:
    """Links present at each recorded step, starting from the pre-seeded network."""
    links = [list(state.config.initial_links)]
    current = list(state.config.initial_links)
    for record in state.decisions:
        if record.chosen is not None:
            current = current + [record.chosen]
        links.append(list(current))
    return links


def cmd_run(config: ScenarioConfig, seed: int, out_dir: Path) -> int:
    state = engine.run(config, seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    output.write_history_csv(out_dir / "history.csv", state.history, state.metropolis.n_mayors)
    output.write_decisions_csv(out_dir / "decisions.csv", state.decisions)
    output.write_final_state_json(out_dir / "final_state.json", state)
    for k, links in enumerate(_cumulative_links(state)):
        output.render_map_svg(out_dir / f"map_step_{k}.svg", config, state.density_history[k],
                              state.metropolis.territory, links)
    return 0


def cmd_replicate(config: ScenarioConfig, n: int, base_seed: int, out_dir: Path) -> int:
    stats = engine.replicate(config, n, base_seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    output.write_replicate_summary_csv(out_dir / "replicate_summary.csv", stats)
    output.render_ellipse_svg(out_dir / "ellipse.svg", stats)
    return 0


def _sweep_cell(task: tuple[str, float, int, ScenarioConfig]) -> dict:
    name, xi, seed, config = task
    row = {"configuration": name, "xi": xi, "seed": seed,
           "total_accessibility": None, "total_travel_time": None, "error": None}
    try:
        state = engine.run(replace(config, xi=xi), seed)
        last = state.history[-1]
        row["total_accessibility"] = last.total_accessibility
        row["total_travel_time"] = last.total_travel_time
    except Exception as exc:  # recorded per row, the sweep continues
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def spearman_trend(xis: list[float], means: list[float]) -> float:
    """Rank correlation between xi and mean accessibility; 0 for a flat profile.

    Profiles whose means vary by less than one part per million are reported
    as flat: ranking differences at that scale would only order floating-point
    noise from path-dependent flow averaging, not a governance effect.
    """
    if len(set(xis)) < 2 or len(set(means)) < 2:
        return 0.0
    scale = max(abs(m) for m in means)
    if scale > 0 and (max(means) - min(means)) / scale < 1e-6:
        return 0.0
    rho = scipy_stats.spearmanr(xis, means)[0]
    return float(rho)


def cmd_sweep(spec: SweepSpec) -> int:
    spec.validate()
    tasks = []
    for name in sorted(spec.configurations):
        config = spec.configurations[name]
        for xi in spec.xi_values:
            for i in range(spec.replications):
                tasks.append((name, xi, spec.base_seed + i, config))
    if spec.workers > 1:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            rows = list(pool.map(_sweep_cell, tasks, chunksize=1))
    else:
        rows = [_sweep_cell(t) for t in tasks]
    rows.sort(key=lambda r: (r["configuration"], r["xi"], r["seed"]))

    spec.out_dir.mkdir(parents=True, exist_ok=True)
    output.write_sweep_csv(spec.out_dir / "sweep.csv", rows)

    curves: dict[str, tuple[list[float], list[float]]] = {}
    trends: dict[str, float] = {}
    for name in sorted(spec.configurations):
        xis, means = [], []
        for xi in spec.xi_values:
            values = [r["total_accessibility"] for r in rows
                      if r["configuration"] == name and r["xi"] == xi and r["total_accessibility"] is not None]
            if values:
                xis.append(xi)
                means.append(float(np.mean(values)))
        curves[name] = (xis, means)
        trends[name] = spearman_trend(xis, means)
    output.write_trend_csv(spec.out_dir / "trend.csv", trends)
    output.render_sweep_svg(spec.out_dir / "sweep.svg", curves)

    failures = [r for r in rows if r["error"] is not None]
    for r in failures:
        print(f"sweep cell failed: {r['configuration']} xi={r['xi']} seed={r['seed']}: {r['error']}",
              file=sys.stderr)
    return 1 if failures else 0


def _parse_xi_list(text: str) -> tuple[float, ...]:
    try:
        values = tuple(float(x) for x in text.split(",") if x.strip() != "")
    except ValueError:
        raise ConfigError(f"xi: could not parse list {text!r}") from None
    if not values:
        raise ConfigError("xi: empty list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metrosim",
        description="Two-city metropolis simulator: transport network growth under multi-level governance.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="scenario JSON file")
        p.add_argument("--out", default="out", help="output directory")
        p.add_argument("--steps", type=int, default=None, help="override the number of steps")
        p.add_argument("--disable-landuse", action="store_true", help="freeze land use for the whole run")
        p.add_argument("--congested-eval", action="store_true",
                       help="evaluate candidate links on congested instead of free-flow times")

    p_run = sub.add_parser("run", help="one simulation run")
    add_common(p_run)
    p_run.add_argument("--seed", type=int, default=0)

    p_rep = sub.add_parser("replicate", help="replication batch with variation ellipse")
    add_common(p_rep)
    p_rep.add_argument("--replications", type=int, default=30)
    p_rep.add_argument("--base-seed", type=int, default=0)

    p_sweep = sub.add_parser("sweep", help="xi grid x initial configurations")
    add_common(p_sweep)
    p_sweep.add_argument("--xi", default=",".join(str(x) for x in DEFAULT_XI_GRID),
                         help="comma-separated xi values in [0, 1]")
    p_sweep.add_argument("--replications", type=int, default=30)
    p_sweep.add_argument("--base-seed", type=int, default=0)
    p_sweep.add_argument("--configurations", default=None,
                         help="comma-separated subset of equal_near,equal_far,unequal_near,unequal_far")
    p_sweep.add_argument("--workers", type=int, default=1, help="parallel sweep workers")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _apply_overrides(load_config(args.config), args)
        if args.command == "run":
            return cmd_run(config, args.seed, Path(args.out))
        if args.command == "replicate":
            if args.replications < 1:
                raise ConfigError("replications: must be >= 1")
            return cmd_replicate(config, args.replications, args.base_seed, Path(args.out))
        configurations = sweep_configurations(config)
        if args.configurations:
            wanted = [name.strip() for name in args.configurations.split(",")]
            unknown = [name for name in wanted if name not in configurations]
            if unknown:
                raise ConfigError(f"configurations: unknown names {unknown}")
            configurations = {name: configurations[name] for name in wanted}
        spec = SweepSpec(
            configurations=configurations,
            xi_values=_parse_xi_list(args.xi),
            replications=args.replications,
            base_seed=args.base_seed,
            out_dir=Path(args.out),
            workers=args.workers,
        )
        return cmd_sweep(spec)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
