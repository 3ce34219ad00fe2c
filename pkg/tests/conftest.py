#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

"""Shared fixtures: small parks, small configurations, seeded generators
and a central finite-difference gradient check."""

import numpy as np
import pytest

from greensec import settings
from greensec.engine import GameConfig, PatrolGame
from greensec.gridworld import GridWorld, spatial_density


SMALL = {
    "GRID_WIDTH": 5,
    "GRID_HEIGHT": 5,
    "GAME_MAX_STEPS": 8,
    "PATROL_EPISODES": 3,
    "PATROL_BATCH_SIZE": 4,
    "PATROL_WARMUP": 4,
    "PATROL_DRONE_BUFFER": 64,
    "PATROL_RANGER_BUFFER": 64,
    "PATROL_CONV_FILTERS": (2, 2),
    "PATROL_HIDDEN": (8, 8),
    "PATROL_EPSILON_DECAY": 20,
    "ALLOC_DATASET_SIZE": 40,
    "ALLOC_EMBED_DEFENDER": 4,
    "ALLOC_EMBED_ATTACKER": 2,
    "ALLOC_HIDDEN_DEFENDER": 6,
    "ALLOC_HIDDEN_ATTACKER": 6,
    "ALLOC_SAMPLES": 3,
    "ALLOC_ITERATIONS": 2,
    "ALLOC_AE_EPOCHS": 2,
    "ALLOC_AE_BATCH": 16,
    "EVAL_EPISODES": 3,
    "EVAL_HEATMAP_SAMPLES": 3,
    "EVAL_TIMING_RUNS": 1,
    "EXTENSIONS": (),
}


def finite_difference(func, x, eps=1e-6):
    """Central differences of the scalar ``func`` at every entry of ``x``"""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    flat, gflat = x.reshape(-1), grad.reshape(-1)
    for idx in range(flat.size):
        orig = flat[idx]
        flat[idx] = orig + eps
        plus = func(x)
        flat[idx] = orig - eps
        minus = func(x)
        flat[idx] = orig
        gflat[idx] = (plus - minus) / (2 * eps)
    return grad


@pytest.fixture
def fd():
    return finite_difference


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config(tmp_path):
    return settings.default_config(RUN_DIR=str(tmp_path / "runs"), **SMALL)


@pytest.fixture
def grid():
    return spatial_density(5, 5)


@pytest.fixture
def flat_grid():
    return GridWorld(np.full((5, 5), 0.5))


@pytest.fixture
def game(grid):
    return PatrolGame(grid, GameConfig(n_d=2, n_r=1, n_a=1, T=8))


@pytest.fixture
def clean_app(monkeypatch):
    """The shared flask app, restored to the defaults afterwards"""
    from greensec import core, signals
    from greensec.extensions import metrics
    monkeypatch.setenv(core.CONFIG_ENV_VAR, "")
    yield core.app
    signals.run_started.disconnect(metrics.run_started)
    signals.patrol_episode.disconnect(metrics.patrol_episode)
    signals.allocation_iteration.disconnect(metrics.allocation_iteration)
    signals.evaluation_episode.disconnect(metrics.evaluation_episode)
    core.app.loaded_extensions.clear()
    core.app.config.update(settings.DEFAULTS)
