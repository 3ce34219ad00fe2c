#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""The park: a grid of cells, each one with an animal density in [0, 1].

Densities are either i.i.d. uniform (``random_density``) or derived from the
distance of every cell to a river, a road and the park boundary
(``spatial_density``). Distances are Manhattan distances because every agent
moves in the 4-neighbourhood.

"""

#===============================================================================
# IMPORTS
#===============================================================================

import collections

import numpy as np


#===============================================================================
# CONSTANTS
#===============================================================================

MIN_SIDE = 3

UP, DOWN, LEFT, RIGHT, STAY = range(5)

MOVES = (UP, DOWN, LEFT, RIGHT, STAY)

MOVE_NAMES = ("up", "down", "left", "right", "stay")

MOVE_DELTAS = ((-1, 0), (1, 0), (0, -1), (0, 1), (0, 0))

RANK_DISTANCE = "distance"
RANK_ORDINAL = "ordinal"
RANK_MODES = (RANK_DISTANCE, RANK_ORDINAL)

# (boundary, road, river)
ANIMAL_RANK_WEIGHTS = (0.1, 0.1, 0.8)

# (animal, river, road, boundary)
DENSITY_WEIGHTS = (0.7, 0.05, 0.15, 0.1)


#===============================================================================
# ERRORS
#===============================================================================

class InvalidDimensionError(ValueError):

    def __init__(self, width, height):
        self.width = width
        self.height = height
        super(InvalidDimensionError, self).__init__(
            "A park needs at least {0}x{0} cells, got {1}x{2}".format(
                MIN_SIDE, width, height))


class GridConfigurationError(ValueError):
    pass


#===============================================================================
# CELLS
#===============================================================================

Cell = collections.namedtuple("Cell", ["row", "col"])


def as_cell(value):
    """Coerce a ``(row, col)`` pair into a ``Cell``"""
    if isinstance(value, Cell):
        return value
    row, col = value
    return Cell(int(row), int(col))


def shifted(cell, move):
    drow, dcol = MOVE_DELTAS[move]
    return Cell(cell.row + drow, cell.col + dcol)


#===============================================================================
# GRID
#===============================================================================

class GridWorld(object):
    """An immutable park.

    :param density: 2-D array (height x width) with values in [0, 1]
    :param river_cells: cells crossed by the river (may be empty)
    :param road_cells: cells crossed by the road (may be empty)

    """

    def __init__(self, density, river_cells=(), road_cells=()):
        density = np.array(density, dtype=np.float64)
        if density.ndim != 2:
            raise GridConfigurationError(
                "The density map must be 2-D, got shape {0}".format(
                    density.shape))
        height, width = density.shape
        if width < 1 or height < 1:
            raise InvalidDimensionError(width, height)
        if not np.all(np.isfinite(density)) or density.min() < 0. or \
           density.max() > 1.:
            raise GridConfigurationError("Densities must lie in [0, 1]")
        density.setflags(write=False)
        self._density = density
        self.river_cells = frozenset(as_cell(c) for c in river_cells)
        self.road_cells = frozenset(as_cell(c) for c in road_cells)
        for name, cells in (("river", self.river_cells),
                            ("road", self.road_cells)):
            outside = [c for c in cells if not self.contains(c)]
            if outside:
                raise GridConfigurationError(
                    "The {0} leaves the park at {1}".format(name, outside[0]))

    def __repr__(self):
        return "{0}({1}x{2})".format(
            self.__class__.__name__, self.width, self.height)

    def __eq__(self, other):
        return (isinstance(other, GridWorld) and
                np.array_equal(self._density, other._density) and
                self.river_cells == other.river_cells and
                self.road_cells == other.road_cells)

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    @property
    def density(self):
        return self._density

    @property
    def height(self):
        return self._density.shape[0]

    @property
    def width(self):
        return self._density.shape[1]

    @property
    def shape(self):
        return self._density.shape

    @property
    def n_cells(self):
        return self._density.size

    def cells(self):
        """All cells in row-major order"""
        for row in range(self.height):
            for col in range(self.width):
                yield Cell(row, col)

    def contains(self, cell):
        return 0 <= cell.row < self.height and 0 <= cell.col < self.width

    def index(self, cell):
        return cell.row * self.width + cell.col

    def cell_at(self, index):
        row, col = divmod(int(index), self.width)
        return Cell(row, col)

    def density_at(self, cell):
        return float(self._density[cell.row, cell.col])

    def is_edge(self, cell):
        return (cell.row == 0 or cell.col == 0 or
                cell.row == self.height - 1 or cell.col == self.width - 1)

    def edge_cells(self):
        return [c for c in self.cells() if self.is_edge(c)]

    def legal_moves(self, cell):
        """Moves (in the fixed up, down, left, right, stay order) that keep
        an agent standing on ``cell`` inside the park"""
        return [m for m in MOVES if self.contains(shifted(cell, m))]

    def move(self, cell, move):
        """Target of ``move``; moves leaving the park clamp to stay"""
        target = shifted(cell, move)
        if self.contains(target):
            return target
        return cell

    def neighbors(self, cell):
        return neighbors(self, cell)

    def to_csv(self, path):
        """Row-major density export with 6 decimal places"""
        np.savetxt(path, self._density, fmt="%.6f", delimiter=",")

    @classmethod
    def from_csv(cls, path, river_cells=(), road_cells=()):
        density = np.loadtxt(path, delimiter=",", ndmin=2)
        return cls(density, river_cells, road_cells)


#===============================================================================
# FUNCTIONS
#===============================================================================

def neighbors(grid, cell):
    """4-neighbourhood cells inside the grid plus the cell itself"""
    return [shifted(cell, m) for m in grid.legal_moves(cell)]


def distance_map(shape, feature_cells):
    """Manhattan distance from every cell to the closest feature cell"""
    feature_cells = [as_cell(c) for c in feature_cells]
    if not feature_cells:
        raise GridConfigurationError("At least one feature cell is required")
    rows, cols = np.indices(shape)
    feats = np.array(feature_cells, dtype=np.int64)
    dist = (np.abs(rows[..., None] - feats[:, 0]) +
            np.abs(cols[..., None] - feats[:, 1]))
    return dist.min(axis=-1)


def normalize(values):
    """Min-max normalization; a constant map normalizes to zeros"""
    values = np.asarray(values, dtype=np.float64)
    low, high = values.min(), values.max()
    if high == low:
        return np.zeros_like(values)
    return (values - low) / (high - low)


def feature_rank(grid, feature_cells, mode=RANK_DISTANCE):
    """Rank every cell by its distance to ``feature_cells``: 0 on the
    closest cells, 1 on the farthest ones.

    :param grid: a ``GridWorld`` or a ``(height, width)`` shape
    :param mode: ``distance`` min-max normalizes the distances themselves,
                 ``ordinal`` normalizes the position of each distinct
                 distance in the sorted list of distances

    """
    shape = grid.shape if isinstance(grid, GridWorld) else tuple(grid)
    dist = distance_map(shape, feature_cells)
    if mode == RANK_DISTANCE:
        return normalize(dist)
    elif mode == RANK_ORDINAL:
        levels, ordinal = np.unique(dist, return_inverse=True)
        return normalize(ordinal.reshape(shape))
    raise GridConfigurationError("Unknown rank mode '{0}'".format(mode))


def random_density(width, height, seed):
    """A park with i.i.d. uniform densities, reproducible from ``seed``"""
    if width < MIN_SIDE or height < MIN_SIDE:
        raise InvalidDimensionError(width, height)
    rng = np.random.default_rng(seed)
    return GridWorld(rng.uniform(0., 1., size=(height, width)))


def default_river(width, height):
    col = width // 3
    return [Cell(row, col) for row in range(height)]


def default_road(width, height):
    row = (2 * height) // 3
    return [Cell(row, col) for col in range(width)]


def boundary_cells(width, height):
    return [Cell(r, c) for r in range(height) for c in range(width)
            if r in (0, height - 1) or c in (0, width - 1)]


def check_crossing_path(name, cells, width, height):
    """A feature must be 4-connected and join two opposite sides"""
    cells = set(as_cell(c) for c in cells)
    if not cells:
        raise GridConfigurationError("The {0} has no cells".format(name))
    start = min(cells)
    seen, pending = set([start]), [start]
    while pending:
        current = pending.pop()
        for move in MOVES[:-1]:
            nxt = shifted(current, move)
            if nxt in cells and nxt not in seen:
                seen.add(nxt)
                pending.append(nxt)
    if seen != cells:
        raise GridConfigurationError(
            "The {0} is not a connected path".format(name))
    rows = set(c.row for c in cells)
    cols = set(c.col for c in cells)
    crosses = ((0 in rows and height - 1 in rows) or
               (0 in cols and width - 1 in cols))
    if not crosses:
        raise GridConfigurationError(
            "The {0} does not cross the park".format(name))


def combine_ranks(boundary_rank, road_rank, river_rank):
    """Two weighted averages: first the animal rank, then the density"""
    wb, wroad, wriver = ANIMAL_RANK_WEIGHTS
    animal_rank = wb * boundary_rank + wroad * road_rank + wriver * river_rank
    wa, wr, wo, wbd = DENSITY_WEIGHTS
    density = (wa * animal_rank + wr * river_rank + wo * road_rank +
               wbd * boundary_rank)
    return normalize(density)


def spatial_density(width, height, river_cells=None, road_cells=None,
                    mode=RANK_DISTANCE):
    """A park whose densities depend on the distance to a river, a road and
    the boundary.

    When no geometry is given the river runs down column ``width // 3`` and
    the road along row ``2 * height // 3``.

    """
    if width < MIN_SIDE or height < MIN_SIDE:
        raise InvalidDimensionError(width, height)
    if river_cells is None:
        river_cells = default_river(width, height)
    if road_cells is None:
        road_cells = default_road(width, height)
    river_cells = [as_cell(c) for c in river_cells]
    road_cells = [as_cell(c) for c in road_cells]
    for name, cells in (("river", river_cells), ("road", road_cells)):
        outside = [c for c in cells
                   if not (0 <= c.row < height and 0 <= c.col < width)]
        if outside:
            raise GridConfigurationError(
                "The {0} leaves the park at {1}".format(name, outside[0]))
        check_crossing_path(name, cells, width, height)

    shape = (height, width)
    boundary_rank = feature_rank(shape, boundary_cells(width, height), mode)
    road_rank = feature_rank(shape, road_cells, mode)
    river_rank = feature_rank(shape, river_cells, mode)
    density = combine_ranks(boundary_rank, road_rank, river_rank)
    return GridWorld(density, river_cells, road_cells)


def build_grid(config):
    """Builds the park described by the ``GRID_*`` keys of ``config``"""
    width, height = config["GRID_WIDTH"], config["GRID_HEIGHT"]
    mode = config["GRID_DENSITY"]
    if mode == "random":
        return random_density(width, height, config["GRID_SEED"])
    elif mode == "spatial":
        return spatial_density(width, height,
                               config.get("GRID_RIVER_CELLS"),
                               config.get("GRID_ROAD_CELLS"),
                               config.get("GRID_RANK_MODE", RANK_DISTANCE))
    raise GridConfigurationError("Unknown density mode '{0}'".format(mode))


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
