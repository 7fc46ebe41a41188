"""Simulation orchestration: the seeded step loop and replication statistics.

A step runs transport, land use, then governance, in that order, and appends
one indicator row. The only random draws of a run happen in stakeholder
selection, so runs with xi = 0 are fully deterministic across seeds.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

import numpy as np

from .config import ScenarioConfig, validate
from .governance import DecisionRecord, decide_and_build, select_stakeholder
from .landuse import accessibility, cell_scores, relocate
from .transport import (
    Network,
    ODMatrix,
    assign_traffic,
    build_network,
    distribute,
    generate_demand,
    shortest_times,
    total_travel_time,
)
from .world import Metropolis, assign_territories, init_metropolis, mayor_weights, natural_totals


@dataclass
class IndicatorRow:
    """One history record: metropolis-level indicators after a step."""

    step: int
    total_accessibility: float
    total_travel_time: float
    link_count: int
    mayor_objectives: tuple[float, ...]


@dataclass
class SimState:
    """Everything a run carries between steps, plus its full history."""

    config: ScenarioConfig
    metropolis: Metropolis
    network: Network
    travel_times: np.ndarray
    rng: random.Random
    step_index: int = 0
    history: list[IndicatorRow] = field(default_factory=list)
    decisions: list[DecisionRecord] = field(default_factory=list)
    density_history: list[np.ndarray] = field(default_factory=list)


def _indicators(metropolis: Metropolis, d: np.ndarray, od: ODMatrix, link_count: int, step: int) -> IndicatorRow:
    _, _, total_access = accessibility(metropolis, d, metropolis.config.nu)
    per_mayor = tuple(
        float(total_access[metropolis.territory == i].sum()) for i in range(metropolis.n_mayors)
    )
    return IndicatorRow(
        step=step,
        total_accessibility=float(total_access.sum()),
        total_travel_time=total_travel_time(od, d),
        link_count=link_count,
        mayor_objectives=per_mayor,
    )


def initial_state(config: ScenarioConfig, seed: int) -> SimState:
    """World at step 0: initial densities, the pre-seeded network, free-flow times."""
    validate(config)
    workers, jobs = natural_totals(config)
    metropolis = assign_territories(init_metropolis(config, workers, jobs), config.centers)
    network = build_network(metropolis, config.initial_links)
    d = shortest_times(network, metropolis, free_flow=True)
    od = distribute(generate_demand(metropolis), d, config.lam, config.furness_tolerance, config.furness_max_iter)
    state = SimState(
        config=config,
        metropolis=metropolis,
        network=network,
        travel_times=d,
        rng=random.Random(seed),
    )
    state.history.append(_indicators(metropolis, d, od, len(network), 0))
    state.density_history.append(metropolis.workers.sum(axis=1))
    return state


def step(state: SimState, *, swap_mayor_weights: bool = False) -> SimState:
    """Advance one time step: transport, land use, governance, indicators.

    Travel demand is distributed on the previous step's times, assignment
    produces this step's congested times, relocation (when enabled) applies
    them, and the drawn stakeholder then builds its argmax link. Indicators
    are measured on the post-assignment times; the freshly built link carries
    traffic from the next step on.
    """
    cfg = state.config
    metropolis = state.metropolis

    demand = generate_demand(metropolis)
    od = distribute(demand, state.travel_times, cfg.lam, cfg.furness_tolerance, cfg.furness_max_iter)
    network, d = assign_traffic(od.total(), state.network, metropolis, cfg.assignment_iterations)

    if cfg.landuse_enabled:
        scores = cell_scores(metropolis, d)
        metropolis = relocate(metropolis, scores, cfg.mu, cfg.relocation_fraction, state.rng)

    weights = mayor_weights(metropolis)
    if swap_mayor_weights:
        weights = weights[::-1].copy()
    stakeholder, draws = select_stakeholder(cfg.xi, weights, state.rng)
    network, record = decide_and_build(metropolis, network, stakeholder, step=state.step_index + 1, draws=draws)

    state.metropolis = metropolis
    state.network = network
    state.travel_times = d
    state.step_index += 1
    state.decisions.append(record)
    state.history.append(_indicators(metropolis, d, od, len(network), state.step_index))
    state.density_history.append(metropolis.workers.sum(axis=1))
    return state


def run(config: ScenarioConfig, seed: int, *, swap_mayor_weights: bool = False) -> SimState:
    """Execute a full run; identical (config, seed) pairs give identical output.

    swap_mayor_weights reverses the mayor weight vector before each
    stakeholder draw, which redirects local decision power toward the
    otherwise minor mayor without touching the land use; it exists for
    governance-regime experiments.
    """
    state = initial_state(config, seed)
    for _ in range(config.steps):
        step(state, swap_mayor_weights=swap_mayor_weights)
    return state


@dataclass
class ReplicationStats:
    """Cross-replication statistics of the final-step indicator pair."""

    n: int
    seeds: tuple[int, ...]
    finals: np.ndarray        # (n, 2): total accessibility, total travel time
    mean: np.ndarray          # (2,)
    covariance: np.ndarray    # (2, 2)
    axis_lengths: np.ndarray  # (2,) 1-sigma ellipse semi-axes, descending
    angle_rad: float          # orientation of the major axis


def summarize_finals(finals: np.ndarray, seeds: tuple[int, ...]) -> ReplicationStats:
    """Mean, covariance and 1-sigma variation ellipse of (accessibility, time) pairs."""
    finals = np.asarray(finals, dtype=float)
    n = finals.shape[0]
    mean = finals.mean(axis=0)
    if n > 1:
        covariance = np.cov(finals, rowvar=False, ddof=1)
    else:
        covariance = np.zeros((2, 2))
    eigvals, eigvecs = np.linalg.eigh(covariance)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    major = eigvecs[:, order[0]]
    return ReplicationStats(
        n=n,
        seeds=seeds,
        finals=finals,
        mean=mean,
        covariance=covariance,
        axis_lengths=np.sqrt(eigvals),
        angle_rad=float(np.arctan2(major[1], major[0])),
    )


def replicate(config: ScenarioConfig, n: int, base_seed: int, *, swap_mayor_weights: bool = False) -> ReplicationStats:
    """Run seeds base_seed .. base_seed + n - 1 and aggregate their final indicators."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seeds = tuple(range(base_seed, base_seed + n))
    finals = np.empty((n, 2))
    for i, seed in enumerate(seeds):
        state = run(config, seed, swap_mayor_weights=swap_mayor_weights)
        last = state.history[-1]
        finals[i] = (last.total_accessibility, last.total_travel_time)
    return summarize_finals(finals, seeds)
