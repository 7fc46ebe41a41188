from __future__ import annotations

import numpy as np
import pytest

from metrosim.config import CenterSpec, ScenarioConfig, two_city_config


@pytest.fixture
def small_config() -> ScenarioConfig:
    """5x5 grid, one category, one centre; the cheapest valid scenario."""
    return ScenarioConfig(
        grid_rows=5,
        grid_cols=5,
        cell_size_km=1.0,
        categories=1,
        centers=(CenterSpec(position=(2, 2), amplitude=50.0, gradient=0.5, job_share=1.0, mix=(1.0,)),),
        lam=1.0,
        nu=1.0,
        gamma=0.8,
        mu=0.01,
        xi=0.5,
        m=np.zeros((1, 1)),
        m_prime=np.zeros((1, 1)),
        relocation_fraction=0.1,
        landuse_enabled=True,
        steps=2,
        v_local=25.0,
        v_link=75.0,
        capacity=100.0,
        bpr_alpha=0.15,
        bpr_beta=4.0,
        furness_tolerance=1e-8,
        furness_max_iter=500,
        assignment_iterations=4,
    )


@pytest.fixture
def two_city() -> ScenarioConfig:
    return two_city_config(steps=3)
