"""Four-stage travel demand core.

Demand generation from land use, doubly-constrained gravity distribution,
and congested shortest-path assignment over the regional link network with an
uncongested as-the-crow-flies (AFC) local-road fallback.

All travel times are hours, distances km, speeds km/h. The road graph is the
complete AFC graph (every cell pair connected at the local-road speed) with
regional links layered on top; AFC legs obey the triangle inequality, so any
shortest path alternates AFC legs with regional links and its intermediate
stops can only be link endpoints. Shortest times are therefore computed
exactly by closing the small endpoint subgraph and joining AFC access legs,
which keeps the exhaustive candidate evaluation in the governance module
cheap.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .world import Metropolis

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Network


@dataclass
class Link:
    """One undirected regional road between two cell centroids."""

    a: int
    b: int
    length_km: float
    v_link: float
    capacity: float
    flow: float = 0.0
    congested_time: float = field(default=0.0)

    def __post_init__(self) -> None:
        if self.congested_time <= 0.0:
            self.congested_time = self.free_flow_time

    @property
    def free_flow_time(self) -> float:
        return self.length_km / self.v_link


class Network:
    """Regional road graph over cell centroids; links stored once, traversed both ways."""

    def __init__(self, n_cells: int, links: list[Link] | None = None):
        self.n_cells = n_cells
        self.links: list[Link] = []
        self._index: dict[tuple[int, int], int] = {}
        for link in links or []:
            self._insert(link)

    @staticmethod
    def key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def _insert(self, link: Link) -> None:
        if link.a == link.b:
            raise ValueError(f"link endpoints must differ, got ({link.a}, {link.b})")
        if not (0 <= link.a < self.n_cells and 0 <= link.b < self.n_cells):
            raise ValueError(f"link endpoint outside the grid: ({link.a}, {link.b})")
        if link.length_km <= 0.0 or link.capacity <= 0.0:
            raise ValueError("link length and capacity must be positive")
        k = self.key(link.a, link.b)
        if k in self._index:
            raise ValueError(f"duplicate link {k}")
        self._index[k] = len(self.links)
        self.links.append(link)

    def has_link(self, a: int, b: int) -> bool:
        return self.key(a, b) in self._index

    def add_link(self, a: int, b: int, length_km: float, v_link: float, capacity: float) -> Link:
        link = Link(a=a, b=b, length_km=length_km, v_link=v_link, capacity=capacity)
        self._insert(link)
        return link

    def copy(self) -> "Network":
        return Network(self.n_cells, [replace(l) for l in self.links])

    def endpoints(self) -> list[int]:
        """Sorted cells touched by at least one link."""
        seen: set[int] = set()
        for l in self.links:
            seen.add(l.a)
            seen.add(l.b)
        return sorted(seen)

    def __len__(self) -> int:
        return len(self.links)


def empty_network(metropolis: Metropolis) -> Network:
    return Network(metropolis.n_cells)


def build_network(metropolis: Metropolis, pairs: tuple[tuple[int, int], ...]) -> Network:
    """Network from (a, b) cell pairs; geometry and capacity come from the config."""
    config = metropolis.config
    net = Network(metropolis.n_cells)
    pts = metropolis.centroids
    for a, b in pairs:
        length = float(np.hypot(*(pts[a] - pts[b])))
        net.add_link(a, b, length, config.v_link, config.capacity)
    return net


def network_to_edge_list(network: Network) -> list[dict]:
    return [
        {"from": l.a, "to": l.b, "capacity": l.capacity, "v_link": l.v_link}
        for l in network.links
    ]


def network_from_edge_list(edges: list[dict], metropolis: Metropolis) -> Network:
    net = Network(metropolis.n_cells)
    pts = metropolis.centroids
    for e in edges:
        a, b = int(e["from"]), int(e["to"])
        length = float(np.hypot(*(pts[a] - pts[b])))
        net.add_link(a, b, length, float(e["v_link"]), float(e["capacity"]))
    return net


# ---------------------------------------------------------------------------
# Travel times


def intra_cell_time(metropolis: Metropolis) -> float:
    """Within-cell travel time floor: half a cell at the local speed."""
    cfg = metropolis.config
    return (cfg.cell_size_km / 2.0) / cfg.v_local


def _afc_movement(metropolis: Metropolis) -> np.ndarray:
    """AFC travel times with a zero diagonal (pure movement, no floor)."""
    pts = metropolis.centroids
    diff = pts[:, None, :] - pts[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1]) / metropolis.config.v_local


def afc_times(metropolis: Metropolis) -> np.ndarray:
    """AFC travel-time matrix including the intra-cell floor on the diagonal."""
    d = _afc_movement(metropolis)
    np.fill_diagonal(d, intra_cell_time(metropolis))
    return d


@dataclass
class _Closure:
    """All-pairs shortest times plus the routing info needed to load flows."""

    d: np.ndarray                      # (N, N) min(AFC, network), zero diagonal
    network_better: np.ndarray         # (N, N) bool: network route strictly beats direct AFC
    terminals: np.ndarray              # (t,) link endpoints, sorted
    entry: np.ndarray                  # (N, N) entry terminal index for the network route
    exit: np.ndarray                   # (N, N) exit terminal index
    succ: np.ndarray                   # (t, t) next terminal on the endpoint-graph path
    edge_link: np.ndarray              # (t, t) link index when a direct terminal hop rides the link, else -1


def _close_network(afc: np.ndarray, links: list[Link], link_times: np.ndarray) -> _Closure | None:
    """Exact shortest times over the AFC-complete graph plus regional links.

    Returns None when there are no links (the AFC matrix is already the
    answer). Works by all-pairs closure of the link-endpoint subgraph: AFC
    legs satisfy the triangle inequality, so optimal routes only ever turn at
    link endpoints.
    """
    if not links:
        return None
    n = afc.shape[0]
    terminals = np.array(sorted({l.a for l in links} | {l.b for l in links}))
    t = len(terminals)
    term_of = {node: i for i, node in enumerate(terminals)}

    w = afc[np.ix_(terminals, terminals)].copy()
    edge_link = np.full((t, t), -1, dtype=int)
    for li, link in enumerate(links):
        ia, ib = term_of[link.a], term_of[link.b]
        time = link_times[li]
        if time < w[ia, ib]:
            w[ia, ib] = w[ib, ia] = time
            edge_link[ia, ib] = edge_link[ib, ia] = li

    # Floyd-Warshall with successor tracking on the small endpoint graph.
    dist = w.copy()
    succ = np.tile(np.arange(t), (t, 1))
    for k in range(t):
        cand = dist[:, k : k + 1] + dist[k : k + 1, :]
        better = cand < dist
        if better.any():
            dist = np.where(better, cand, dist)
            succ = np.where(better, np.broadcast_to(succ[:, k : k + 1], succ.shape), succ)

    # Join AFC access and egress legs: d_net[i, j] = min over terminals (a, b)
    # of afc[i, a] + dist[a, b] + afc[b, j].
    access = afc[:, terminals]                                   # (N, t)
    via = access[:, :, None] + dist[None, :, :]                  # (N, t_a, t_b)
    entry_for_exit = via.argmin(axis=1)                          # (N, t_b)
    best_via = np.take_along_axis(via, entry_for_exit[:, None, :], axis=1)[:, 0, :]  # (N, t_b)
    full = best_via[:, None, :] + access[None, :, :]             # (N, N, t_b)
    exit_term = full.argmin(axis=2)                              # (N, N)
    d_net = np.take_along_axis(full, exit_term[:, :, None], axis=2)[:, :, 0]
    entry_term = np.take_along_axis(entry_for_exit, exit_term, axis=1)

    network_better = d_net < afc
    d = np.where(network_better, d_net, afc)
    np.fill_diagonal(d, 0.0)
    return _Closure(
        d=d,
        network_better=network_better,
        terminals=terminals,
        entry=entry_term,
        exit=exit_term,
        succ=succ,
        edge_link=edge_link,
    )


def shortest_times(network: Network, metropolis: Metropolis, *, free_flow: bool = False) -> np.ndarray:
    """All-pairs least travel times: min(direct AFC, best route via regional links).

    Link edges are taken at their congested times unless free_flow is set;
    access and egress to the link network ride local roads at v_local. The
    diagonal carries the intra-cell time floor.
    """
    afc = _afc_movement(metropolis)
    times = np.array([l.free_flow_time if free_flow else l.congested_time for l in network.links])
    closure = _close_network(afc, network.links, times)
    d = afc.copy() if closure is None else closure.d.copy()
    np.fill_diagonal(d, intra_cell_time(metropolis))
    return d


# ---------------------------------------------------------------------------
# Demand generation and gravity distribution


@dataclass
class Demand:
    """Per-category commuting trip ends: origins at workers, destinations at jobs."""

    origins: np.ndarray       # (N, S) workers
    destinations: np.ndarray  # (N, S) jobs
    active: np.ndarray        # (S,) categories with a workable origin/destination pair


def generate_demand(metropolis: Metropolis) -> Demand:
    """Stage 1: commuting trip ends per zone and socio-professional category."""
    origins = metropolis.workers.copy()
    destinations = metropolis.jobs.copy()
    s = origins.shape[1]
    active = np.ones(s, dtype=bool)
    for cat in range(s):
        has_origins = origins[:, cat].sum() > 0.0
        has_destinations = destinations[:, cat].sum() > 0.0
        if has_origins != has_destinations:
            active[cat] = False
            log.warning("category %d skipped: one-sided demand (origins=%s, destinations=%s)",
                        cat, has_origins, has_destinations)
        elif not has_origins:
            active[cat] = False
    return Demand(origins=origins, destinations=destinations, active=active)


@dataclass
class FurnessResult:
    """Doubly-constrained gravity matrix with its balancing state."""

    flows: np.ndarray               # (N, N)
    row_factors: np.ndarray         # (N,)
    col_factors: np.ndarray         # (N,)
    destinations_scaled: np.ndarray  # (N,) destination marginals after rescaling
    residual: float                 # max marginal relative error at exit
    iterations: int
    converged: bool


def _marginal_error(flows: np.ndarray, origins: np.ndarray, destinations: np.ndarray) -> float:
    row = np.abs(flows.sum(axis=1) - origins) / np.maximum(origins, 1e-12)
    col = np.abs(flows.sum(axis=0) - destinations) / np.maximum(destinations, 1e-12)
    return float(max(row.max(initial=0.0), col.max(initial=0.0)))


def furness_distribution(
    origins: np.ndarray,
    destinations: np.ndarray,
    d: np.ndarray,
    lam: float,
    tol: float,
    max_iter: int,
) -> FurnessResult:
    """Stage 2: balance flows[i, j] = p_i q_j A_i E_j exp(-lam d_ij) to both marginals.

    Destination totals are rescaled to the origin total first (the
    doubly-constrained system is infeasible otherwise). Alternates the p and q
    fixed-point updates until the worst marginal relative error drops below
    tol; a non-converged matrix is still returned, flagged, with its residual.
    """
    a = np.asarray(origins, dtype=float)
    e = np.asarray(destinations, dtype=float)
    n = a.shape[0]
    total_a, total_e = a.sum(), e.sum()
    if total_a <= 0.0 or total_e <= 0.0:
        zeros = np.zeros((n, n))
        return FurnessResult(zeros, np.zeros(n), np.zeros(n), e * 0.0, 0.0, 0, True)
    e = e * (total_a / total_e)

    kernel = np.exp(-lam * d)
    p = np.ones(n)
    q = np.ones(n)
    flows = np.zeros((n, n))
    residual = np.inf
    iterations = 0
    for iterations in range(1, max_iter + 1):
        denom_p = kernel @ (q * e)
        p = np.divide(1.0, denom_p, out=np.zeros(n), where=denom_p > 0.0)
        denom_q = kernel.T @ (p * a)
        q = np.divide(1.0, denom_q, out=np.zeros(n), where=denom_q > 0.0)
        flows = (p * a)[:, None] * (q * e)[None, :] * kernel
        residual = _marginal_error(flows, a, e)
        if residual < tol:
            return FurnessResult(flows, p, q, e, residual, iterations, True)
    log.warning("gravity balancing stopped at max_iter=%d with residual %.3e", max_iter, residual)
    return FurnessResult(flows, p, q, e, residual, iterations, False)


@dataclass
class ODMatrix:
    """Per-category commuting flows with their marginals and balancing state."""

    flows: np.ndarray               # (S, N, N)
    origins: np.ndarray             # (N, S)
    destinations_scaled: np.ndarray  # (N, S)
    row_factors: np.ndarray         # (N, S)
    col_factors: np.ndarray         # (N, S)
    residuals: np.ndarray           # (S,)
    converged: np.ndarray           # (S,) bool
    iterations: np.ndarray          # (S,) int

    def total(self) -> np.ndarray:
        """All-category flow matrix loaded onto the shared road network."""
        return self.flows.sum(axis=0)


def distribute(demand: Demand, d: np.ndarray, lam: float, tol: float, max_iter: int) -> ODMatrix:
    """Run the gravity balancing for every active category."""
    n, s = demand.origins.shape
    flows = np.zeros((s, n, n))
    destinations_scaled = np.zeros((n, s))
    row_factors = np.zeros((n, s))
    col_factors = np.zeros((n, s))
    residuals = np.zeros(s)
    converged = np.ones(s, dtype=bool)
    iterations = np.zeros(s, dtype=int)
    for cat in range(s):
        if not demand.active[cat]:
            continue
        result = furness_distribution(demand.origins[:, cat], demand.destinations[:, cat], d, lam, tol, max_iter)
        flows[cat] = result.flows
        destinations_scaled[:, cat] = result.destinations_scaled
        row_factors[:, cat] = result.row_factors
        col_factors[:, cat] = result.col_factors
        residuals[cat] = result.residual
        converged[cat] = result.converged
        iterations[cat] = result.iterations
    return ODMatrix(flows, demand.origins.copy(), destinations_scaled, row_factors, col_factors,
                    residuals, converged, iterations)


# ---------------------------------------------------------------------------
# Congestion and assignment


def bpr_time(t0, flow, capacity, alpha: float, beta: float):
    """Volume-delay function: t0 * (1 + alpha * (flow / capacity) ** beta)."""
    ratio = np.asarray(flow, dtype=float) / capacity
    out = np.asarray(t0, dtype=float) * (1.0 + alpha * ratio**beta)
    return float(out) if out.ndim == 0 else out


def _load_all_or_nothing(od: np.ndarray, closure: _Closure | None, n_links: int) -> np.ndarray:
    """Route every OD flow on its current least-time path; return per-link loads.

    Flows whose best route is the direct AFC leg stay off the network. Network
    routes are grouped by their (entry, exit) terminal pair so each endpoint
    path is walked once.
    """
    loads = np.zeros(n_links)
    if closure is None:
        return loads
    mask = closure.network_better & (od > 0.0)
    if not mask.any():
        return loads
    t = len(closure.terminals)
    grouped = np.zeros((t, t))
    np.add.at(grouped, (closure.entry[mask], closure.exit[mask]), od[mask])
    for ei, xi in zip(*np.nonzero(grouped)):
        flow = grouped[ei, xi]
        u = ei
        while u != xi:
            v = closure.succ[u, xi]
            li = closure.edge_link[u, v]
            if li >= 0:
                loads[li] += flow
            u = v
    return loads


def assign_traffic(od: np.ndarray, network: Network, metropolis: Metropolis, iterations: int) -> tuple[Network, np.ndarray]:
    """Stage 4: capacity-restrained assignment by the method of successive averages.

    Each iteration routes the whole OD matrix all-or-nothing on current
    congested times, averages the loads into the link flows with weight 1/k,
    and refreshes the volume-delay times. Local-road (AFC) traffic never
    congests anything. Returns the updated network and the final travel-time
    matrix at the resulting congested times.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    cfg = metropolis.config
    net = network.copy()
    afc = _afc_movement(metropolis)
    for k in range(1, iterations + 1):
        times = np.array([l.congested_time for l in net.links])
        closure = _close_network(afc, net.links, times)
        loads = _load_all_or_nothing(od, closure, len(net.links))
        w = 1.0 / k
        for li, link in enumerate(net.links):
            link.flow = (1.0 - w) * link.flow + w * loads[li]
            link.congested_time = bpr_time(link.free_flow_time, link.flow, link.capacity, cfg.bpr_alpha, cfg.bpr_beta)
    return net, shortest_times(net, metropolis)


def total_travel_time(od: ODMatrix | np.ndarray, d: np.ndarray) -> float:
    """Hours travelled: sum over categories and zone pairs of flow * time."""
    flows = od.total() if isinstance(od, ODMatrix) else np.asarray(od)
    if flows.ndim == 3:
        flows = flows.sum(axis=0)
    return float((flows * d).sum())


def write_matrix_csv(path: str | Path, matrix: np.ndarray) -> None:
    """Debug export of a square matrix as (row, col, value) records."""
    arr = np.asarray(matrix)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["row", "col", "value"])
        for i in range(arr.shape[0]):
            for j in range(arr.shape[1]):
                writer.writerow([i, j, repr(float(arr[i, j]))])
