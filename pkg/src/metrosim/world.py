"""The stylised metropolis: grid geometry, density fields, territory partition.

Worker and job counts are continuous reals; every operation outside
initialisation conserves the per-category totals.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import CenterSpec, ConfigError, ScenarioConfig, validate


@dataclass(frozen=True)
class Cell:
    """Read-only view of one grid cell."""

    id: int
    row: int
    col: int
    workers: np.ndarray   # per-category counts, shape (S,)
    jobs: np.ndarray      # per-category counts, shape (S,)
    territory_id: int


@dataclass(eq=False)
class Metropolis:
    """Grid of cells with per-category worker/job counts and a mayor partition.

    Arrays are row-major over cells: cell id = row * grid_cols + col.
    """

    config: ScenarioConfig
    workers: np.ndarray    # (N, S)
    jobs: np.ndarray       # (N, S)
    territory: np.ndarray  # (N,) mayor index
    centroids: np.ndarray  # (N, 2) km coordinates of cell centres
    n_mayors: int

    @property
    def n_cells(self) -> int:
        return self.workers.shape[0]

    @property
    def n_categories(self) -> int:
        return self.workers.shape[1]

    def cell(self, cell_id: int) -> Cell:
        row, col = divmod(cell_id, self.config.grid_cols)
        return Cell(
            id=cell_id,
            row=row,
            col=col,
            workers=self.workers[cell_id].copy(),
            jobs=self.jobs[cell_id].copy(),
            territory_id=int(self.territory[cell_id]),
        )

    def copy(self) -> "Metropolis":
        return Metropolis(
            config=self.config,
            workers=self.workers.copy(),
            jobs=self.jobs.copy(),
            territory=self.territory.copy(),
            centroids=self.centroids,
            n_mayors=self.n_mayors,
        )


def grid_centroids(config: ScenarioConfig) -> np.ndarray:
    """Cell-centre coordinates in km, shape (N, 2) as (x, y) = (col, row) based."""
    rows = np.arange(config.grid_rows)
    cols = np.arange(config.grid_cols)
    yy, xx = np.meshgrid(rows, cols, indexing="ij")
    size = config.cell_size_km
    pts = np.stack([(xx.ravel() + 0.5) * size, (yy.ravel() + 0.5) * size], axis=1)
    return pts


def centroid_distances(config: ScenarioConfig) -> np.ndarray:
    """Euclidean km distances between all cell centres, shape (N, N)."""
    pts = grid_centroids(config)
    diff = pts[:, None, :] - pts[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def _center_fields(config: ScenarioConfig) -> np.ndarray:
    """Per-centre exponential density contribution, shape (M, N)."""
    pts = grid_centroids(config)
    fields = []
    for c in config.centers:
        cx = (c.position[1] + 0.5) * config.cell_size_km
        cy = (c.position[0] + 0.5) * config.cell_size_km
        dist = np.hypot(pts[:, 0] - cx, pts[:, 1] - cy)
        fields.append(c.amplitude * np.exp(-c.gradient * dist))
    return np.stack(fields, axis=0)


def raw_density(config: ScenarioConfig) -> np.ndarray:
    """Unscaled worker density per cell, the sum of the centre contributions."""
    return _center_fields(config).sum(axis=0)


def natural_totals(config: ScenarioConfig) -> tuple[float, float]:
    """Worker and job totals implied by the density law.

    The amplitudes are calibrated in workers per cell, so the natural worker
    total is the raw density summed over the grid; the metropolis is closed
    (every worker commutes to a job) so the job total matches it.
    """
    total = float(raw_density(config).sum())
    return total, total


def init_metropolis(config: ScenarioConfig, total_workers: float, total_jobs: float) -> Metropolis:
    """Spread workers and jobs over the grid by the exponential multi-centre law.

    Workers follow the summed centre fields; jobs follow the same per-centre
    fields weighted by each centre's job share. Both are scaled so the grid
    totals match the requested values exactly, split by the centres' category
    mixes. Territories start unassigned (all zero).
    """
    validate(config)
    fields = _center_fields(config)  # (M, N)
    mixes = np.array([c.mix for c in config.centers])  # (M, S)
    job_shares = np.array([c.job_share for c in config.centers])  # (M,)

    worker_cat = fields.T @ mixes                      # (N, S)
    job_cat = (fields * job_shares[:, None]).T @ mixes  # (N, S)

    worker_sum = worker_cat.sum()
    if worker_sum <= 0.0:
        raise ConfigError("centers: zero total raw density, cannot place workers")
    workers = worker_cat * (total_workers / worker_sum)

    job_sum = job_cat.sum()
    if total_jobs > 0.0 and job_sum <= 0.0:
        raise ConfigError("centers: zero total job density, cannot place jobs")
    jobs = job_cat * (total_jobs / job_sum) if job_sum > 0.0 else np.zeros_like(job_cat)

    return Metropolis(
        config=config,
        workers=workers,
        jobs=jobs,
        territory=np.zeros(config.n_cells, dtype=int),
        centroids=grid_centroids(config),
        n_mayors=len(config.centers),
    )


def assign_territories(metropolis: Metropolis, centers: tuple[CenterSpec, ...]) -> Metropolis:
    """Partition the grid into nearest-centre territories, one per mayor.

    Ties go to the lowest centre index. The partition is fixed for the whole
    run; nothing downstream reassigns cells.
    """
    config = metropolis.config
    pts = metropolis.centroids
    centre_pts = np.array(
        [((c.position[1] + 0.5) * config.cell_size_km, (c.position[0] + 0.5) * config.cell_size_km) for c in centers]
    )
    dist = np.hypot(pts[:, None, 0] - centre_pts[None, :, 0], pts[:, None, 1] - centre_pts[None, :, 1])
    territory = dist.argmin(axis=1)  # argmin takes the first minimum: lowest index wins ties
    return replace(metropolis, territory=territory, n_mayors=len(centers))


def mayor_weights(metropolis: Metropolis) -> np.ndarray:
    """Total jobs per mayor territory, shape (M,); re-read every governance step."""
    job_totals = metropolis.jobs.sum(axis=1)
    weights = np.zeros(metropolis.n_mayors)
    np.add.at(weights, metropolis.territory, job_totals)
    return weights
