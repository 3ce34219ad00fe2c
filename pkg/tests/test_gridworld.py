#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

import numpy as np
import pytest

from greensec import gridworld
from greensec.gridworld import (Cell, GridWorld, GridConfigurationError,
                                InvalidDimensionError, UP, DOWN, LEFT, RIGHT,
                                STAY)


def test_random_density_is_reproducible():
    first = gridworld.random_density(10, 10, seed=3)
    second = gridworld.random_density(10, 10, seed=3)
    other = gridworld.random_density(10, 10, seed=4)
    assert first == second
    assert first != other
    assert first.shape == (10, 10)
    assert 0. <= first.density.min() and first.density.max() <= 1.


@pytest.mark.parametrize("width, height", [(2, 10), (10, 2), (0, 0)])
def test_too_small_park(width, height):
    with pytest.raises(InvalidDimensionError):
        gridworld.random_density(width, height, seed=0)
    with pytest.raises(InvalidDimensionError):
        gridworld.spatial_density(width, height)


def test_density_outside_unit_interval():
    with pytest.raises(GridConfigurationError):
        GridWorld([[0., 1.5], [0., 0.]])
    with pytest.raises(GridConfigurationError):
        GridWorld([[0., np.nan], [0., 0.]])


def test_density_is_read_only(grid):
    with pytest.raises(ValueError):
        grid.density[0, 0] = 1.


def test_spatial_density_default_geometry():
    grid = gridworld.spatial_density(9, 9)
    assert grid.river_cells == frozenset(Cell(r, 3) for r in range(9))
    assert grid.road_cells == frozenset(Cell(6, c) for c in range(9))
    assert grid.density.min() == 0.
    assert grid.density.max() == 1.


def test_spatial_density_mirror_symmetry():
    width, height = 7, 6
    river = [Cell(r, 2) for r in range(height)]
    road = [Cell(4, c) for c in range(width)]
    grid = gridworld.spatial_density(width, height, river, road)
    mirrored = gridworld.spatial_density(
        width, height,
        [Cell(r, width - 1 - c) for r, c in river],
        [Cell(r, width - 1 - c) for r, c in road])
    np.testing.assert_allclose(mirrored.density, grid.density[:, ::-1])


def test_feature_outside_park():
    with pytest.raises(GridConfigurationError):
        gridworld.spatial_density(5, 5, river_cells=[(r, 7) for r in range(5)])


def test_feature_must_cross_the_park():
    with pytest.raises(GridConfigurationError):
        gridworld.spatial_density(5, 5, river_cells=[(0, 1), (1, 1)])
    with pytest.raises(GridConfigurationError):
        gridworld.spatial_density(5, 5, road_cells=[(0, 0), (4, 4)])


@pytest.mark.parametrize("mode", gridworld.RANK_MODES)
def test_feature_rank_is_monotone(mode):
    rank = gridworld.feature_rank((6, 6), [Cell(0, 0)], mode)
    dist = gridworld.distance_map((6, 6), [Cell(0, 0)])
    assert rank[0, 0] == 0.
    assert rank[5, 5] == 1.
    flat_rank, flat_dist = rank.ravel(), dist.ravel()
    for a in range(flat_dist.size):
        for b in range(flat_dist.size):
            if flat_dist[a] < flat_dist[b]:
                assert flat_rank[a] < flat_rank[b]


def test_rank_modes_agree_on_a_connected_park():
    feats = [Cell(0, 0), Cell(0, 1), Cell(0, 2), Cell(0, 3)]
    shape = (4, 8)
    distance = gridworld.feature_rank(shape, feats, gridworld.RANK_DISTANCE)
    ordinal = gridworld.feature_rank(shape, feats, gridworld.RANK_ORDINAL)
    np.testing.assert_allclose(distance, ordinal)


@pytest.mark.parametrize("mode", gridworld.RANK_MODES)
def test_column_feature_ranks(mode):
    column = [Cell(r, 0) for r in range(3)]
    rank = gridworld.feature_rank((3, 3), column, mode)
    np.testing.assert_allclose(rank, np.tile([0., 0.5, 1.], (3, 1)))
    center = gridworld.feature_rank((3, 3), [Cell(1, 1)], mode)
    assert center[1, 1] == 0.
    assert center[0, 0] == center[2, 2] == 1.


def test_spatial_density_by_hand():
    # boundary, road and river ranks are 0/1 masks on a 3x3 park, so the
    # raw density is 0.17 * boundary + 0.22 * road + 0.61 * river
    river = [Cell(r, 1) for r in range(3)]
    road = [Cell(1, c) for c in range(3)]
    grid = gridworld.spatial_density(3, 3, river, road)
    corner, side, middle = 1., 0.05 / 0.66, 0.44 / 0.66
    expected = [[corner, side, corner],
                [middle, 0., middle],
                [corner, side, corner]]
    np.testing.assert_allclose(grid.density, expected, atol=1e-12)
    assert grid.river_cells == set(river)
    assert grid.road_cells == set(road)


def test_constant_distances_rank_to_zero():
    cells = [Cell(r, c) for r in range(3) for c in range(3)]
    rank = gridworld.feature_rank((3, 3), cells)
    np.testing.assert_array_equal(rank, np.zeros((3, 3)))


def test_unknown_rank_mode():
    with pytest.raises(GridConfigurationError):
        gridworld.feature_rank((3, 3), [Cell(0, 0)], "linear")


def test_neighbors():
    grid = GridWorld(np.zeros((10, 10)))
    assert sorted(grid.neighbors(Cell(0, 0))) == \
        [Cell(0, 0), Cell(0, 1), Cell(1, 0)]
    assert len(grid.neighbors(Cell(4, 4))) == 5
    tiny = GridWorld(np.zeros((1, 1)))
    assert tiny.neighbors(Cell(0, 0)) == [Cell(0, 0)]


def test_moves_clamp_to_stay():
    grid = GridWorld(np.zeros((3, 3)))
    assert grid.move(Cell(0, 0), UP) == Cell(0, 0)
    assert grid.move(Cell(0, 0), LEFT) == Cell(0, 0)
    assert grid.move(Cell(0, 0), DOWN) == Cell(1, 0)
    assert grid.move(Cell(0, 0), RIGHT) == Cell(0, 1)
    assert grid.legal_moves(Cell(2, 2)) == [UP, LEFT, STAY]


def test_csv_export(tmp_path, grid):
    path = str(tmp_path / "density.csv")
    grid.to_csv(path)
    with open(path) as fp:
        lines = fp.read().splitlines()
    assert len(lines) == grid.height
    assert all(len(v.split(".")[1]) == 6 for v in lines[0].split(","))
    loaded = GridWorld.from_csv(path)
    np.testing.assert_allclose(loaded.density, grid.density, atol=5e-7)


def test_build_grid(small_config):
    grid = gridworld.build_grid(small_config)
    assert grid.shape == (5, 5)
    assert grid.river_cells
    random = gridworld.build_grid(dict(small_config, GRID_DENSITY="random"))
    assert random == gridworld.random_density(5, 5, small_config["GRID_SEED"])
