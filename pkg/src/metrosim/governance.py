"""Endogenous network growth by accessibility-maximising stakeholders.

Each step one stakeholder is drawn (a mayor with probability xi, the governor
otherwise), every admissible new link is scored by the stakeholder's
territory accessibility, and the argmax link is built.
"""
from __future__ import annotations

import logging
import random
from dataclasses import dataclass

import numpy as np

from .transport import Network, assign_traffic, distribute, generate_demand, intra_cell_time, shortest_times
from .world import Metropolis

log = logging.getLogger(__name__)

LOCAL = "local"
METROPOLITAN = "metropolitan"


@dataclass(frozen=True)
class Stakeholder:
    """A mayor (one territory) or the governor (the whole metropolis)."""

    kind: str                # "mayor" | "governor"
    mayor: int | None = None

    def territory_cells(self, metropolis: Metropolis) -> np.ndarray:
        if self.kind == "governor":
            return np.arange(metropolis.n_cells)
        return np.nonzero(metropolis.territory == self.mayor)[0]

    @property
    def level(self) -> str:
        return METROPOLITAN if self.kind == "governor" else LOCAL


@dataclass(frozen=True)
class CandidateLink:
    """A buildable link between two cells; speed and capacity come from config."""

    a: int
    b: int
    length_km: float


@dataclass
class DecisionRecord:
    """One governance step: who decided, what was evaluated, what was built."""

    step: int
    level: str
    mayor: int | None
    n_candidates: int
    chosen: tuple[int, int] | None
    objective_before: float
    objective_after: float
    draws: tuple[float, ...]
    evaluations: list[tuple[int, int, float]]


def select_stakeholder(xi: float, weights: np.ndarray, rng: random.Random) -> tuple[Stakeholder, tuple[float, ...]]:
    """Draw the deciding stakeholder and report the uniform draws consumed.

    The level draw comes first; a mayor draw follows only on a local outcome,
    using win probabilities proportional to the territory job weights. An
    all-zero weight vector degrades to a uniform mayor draw.
    """
    if not (0.0 <= xi <= 1.0):
        raise ValueError("xi must lie in [0, 1]")
    level_draw = rng.random()
    if level_draw >= xi:
        return Stakeholder(kind="governor"), (level_draw,)
    weights = np.asarray(weights, dtype=float)
    total = weights.sum()
    if total <= 0.0:
        log.warning("all mayor weights are zero; drawing uniformly")
        probs = np.full(len(weights), 1.0 / len(weights))
    else:
        probs = weights / total
    mayor_draw = rng.random()
    cumulative = np.cumsum(probs)
    mayor = int(min(np.searchsorted(cumulative, mayor_draw, side="right"), len(weights) - 1))
    return Stakeholder(kind="mayor", mayor=mayor), (level_draw, mayor_draw)


def _chebyshev(metropolis: Metropolis, a: int, b: int) -> int:
    cols = metropolis.config.grid_cols
    ra, ca = divmod(a, cols)
    rb, cb = divmod(b, cols)
    return max(abs(ra - rb), abs(ca - cb))


def enumerate_candidates(network: Network, metropolis: Metropolis) -> list[CandidateLink]:
    """All buildable links, in ascending (a, b) order.

    A pair qualifies when the cells are grid-adjacent (8-neighbourhood), or
    when both already touch the network and lie within the configured
    extension radius of each other. Existing links are excluded.
    """
    cfg = metropolis.config
    rows, cols = cfg.grid_rows, cfg.grid_cols
    pairs: set[tuple[int, int]] = set()
    for r in range(rows):
        for c in range(cols):
            a = r * cols + c
            for dr, dc in ((0, 1), (1, -1), (1, 0), (1, 1)):
                r2, c2 = r + dr, c + dc
                if 0 <= r2 < rows and 0 <= c2 < cols:
                    pairs.add((a, r2 * cols + c2))
    touched = network.endpoints()
    radius = cfg.network_extension_radius
    for i, a in enumerate(touched):
        for b in touched[i + 1 :]:
            if 1 <= _chebyshev(metropolis, a, b) <= radius:
                pairs.add((a, b))
    pts = metropolis.centroids
    candidates = []
    for a, b in sorted(pairs):
        if network.has_link(a, b):
            continue
        length = float(np.hypot(*(pts[a] - pts[b])))
        candidates.append(CandidateLink(a=a, b=b, length_km=length))
    return candidates


def _territory_accessibility(metropolis: Metropolis, d: np.ndarray, cells: np.ndarray) -> float:
    """Sum of worker-weighted accessibility over a territory on the given times."""
    kernel = np.exp(-metropolis.config.nu * d[cells])
    reachable_jobs = kernel @ metropolis.jobs            # (|T|, S)
    return float((metropolis.workers[cells] * reachable_jobs).sum())


def objective(metropolis: Metropolis, d: np.ndarray, stakeholder: Stakeholder) -> float:
    """Stakeholder payoff: territory workers' accessibility to all metropolitan jobs."""
    return _territory_accessibility(metropolis, d, stakeholder.territory_cells(metropolis))


def _candidate_times(d: np.ndarray, candidate: CandidateLink, link_time: float, floor: float) -> np.ndarray:
    """Travel times after adding one link, from the base all-pairs times.

    Exact single-edge update: any new route crosses the link once, so the new
    time is min(old, via a-b, via b-a). The intra-cell floor is stripped
    before the relaxation and reapplied after.
    """
    base = d.copy()
    np.fill_diagonal(base, 0.0)
    via = base[:, candidate.a][:, None] + (link_time + base[candidate.b, :])[None, :]
    out = np.minimum(base, np.minimum(via, via.T))
    np.fill_diagonal(out, floor)
    return out


def evaluate_candidate(
    metropolis: Metropolis,
    network: Network,
    candidate: CandidateLink,
    stakeholder: Stakeholder,
) -> float:
    """Objective after hypothetically building one link; the inputs stay untouched.

    Free-flow times by default; with congestion_in_evaluation set, the current
    travel demand is redistributed and assigned on the extended network first.
    """
    cfg = metropolis.config
    trial = network.copy()
    trial.add_link(candidate.a, candidate.b, candidate.length_km, cfg.v_link, cfg.capacity)
    if cfg.congestion_in_evaluation:
        od = _current_od(metropolis, network)
        _, d = assign_traffic(od, trial, metropolis, cfg.assignment_iterations)
    else:
        d = shortest_times(trial, metropolis, free_flow=True)
    return objective(metropolis, d, stakeholder)


def _current_od(metropolis: Metropolis, network: Network) -> np.ndarray:
    cfg = metropolis.config
    demand = generate_demand(metropolis)
    d = shortest_times(network, metropolis)
    od = distribute(demand, d, cfg.lam, cfg.furness_tolerance, cfg.furness_max_iter)
    return od.total()


def decide_and_build(
    metropolis: Metropolis,
    network: Network,
    stakeholder: Stakeholder,
    *,
    step: int = 0,
    draws: tuple[float, ...] = (),
) -> tuple[Network, DecisionRecord]:
    """Score every candidate for the stakeholder and build the best one.

    Ties go to the smallest (a, b) pair in enumeration order. An empty
    candidate set records a no-build. The default free-flow evaluation reuses
    the base all-pairs times and applies the exact one-link relaxation per
    candidate, which matches a full recomputation.
    """
    cfg = metropolis.config
    candidates = enumerate_candidates(network, metropolis)
    cells = stakeholder.territory_cells(metropolis)

    if cfg.congestion_in_evaluation:
        od = _current_od(metropolis, network)
        _, d_base = assign_traffic(od, network, metropolis, cfg.assignment_iterations)
        before = _territory_accessibility(metropolis, d_base, cells)
        evaluations = []
        for cand in candidates:
            trial = network.copy()
            trial.add_link(cand.a, cand.b, cand.length_km, cfg.v_link, cfg.capacity)
            _, d_trial = assign_traffic(od, trial, metropolis, cfg.assignment_iterations)
            evaluations.append((cand.a, cand.b, _territory_accessibility(metropolis, d_trial, cells)))
    else:
        d_base = shortest_times(network, metropolis, free_flow=True)
        before = _territory_accessibility(metropolis, d_base, cells)
        floor = intra_cell_time(metropolis)
        evaluations = []
        for cand in candidates:
            d_trial = _candidate_times(d_base, cand, cand.length_km / cfg.v_link, floor)
            evaluations.append((cand.a, cand.b, _territory_accessibility(metropolis, d_trial, cells)))

    if not evaluations:
        log.info("step %d: network saturated, no candidate links", step)
        record = DecisionRecord(
            step=step, level=stakeholder.level, mayor=stakeholder.mayor,
            n_candidates=0, chosen=None,
            objective_before=before, objective_after=before,
            draws=draws, evaluations=[],
        )
        return network.copy(), record

    best_idx = 0
    for i in range(1, len(evaluations)):
        if evaluations[i][2] > evaluations[best_idx][2]:
            best_idx = i
    chosen = candidates[best_idx]
    built = network.copy()
    built.add_link(chosen.a, chosen.b, chosen.length_km, cfg.v_link, cfg.capacity)
    record = DecisionRecord(
        step=step, level=stakeholder.level, mayor=stakeholder.mayor,
        n_candidates=len(candidates), chosen=(chosen.a, chosen.b),
        objective_before=before, objective_after=evaluations[best_idx][2],
        draws=draws, evaluations=evaluations,
    )
    return built, record
