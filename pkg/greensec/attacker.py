#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Heuristic attacker for the patrolling stage.

Attackers know the animal density and where defenders were allocated at the
start of an episode, never their live positions. Each cell gets a score, the
average of its density and of how far it lies from the closest defender
allocation. Scores are smoothed across episodes with an exponential moving
average and active attackers climb greedily to the best neighbouring cell.
Fleeing attackers walk the shortest way out of the park.

"""

#===============================================================================
# IMPORTS
#===============================================================================

import logging

import numpy as np

from .gridworld import MOVES, STAY, shifted, feature_rank, RANK_DISTANCE
from .engine import ACTIVE, FLEEING


#===============================================================================
# LOGGER
#===============================================================================

logger = logging.getLogger(__name__)


#===============================================================================
# CONSTANTS
#===============================================================================

SCORE_RATE = 0.1

CADENCE_EPISODE = "episode"
CADENCE_TIMESTEP = "timestep"
CADENCES = (CADENCE_EPISODE, CADENCE_TIMESTEP)


#===============================================================================
# ERRORS
#===============================================================================

class EmptyAllocationError(ValueError):

    def __init__(self):
        super(EmptyAllocationError, self).__init__(
            "Distance ranks need at least one defender allocation")


#===============================================================================
# FUNCTIONS
#===============================================================================

def distance_ranks(grid, defender_allocation, mode=RANK_DISTANCE):
    """Per-cell rank of the distance to the closest defender allocation:
    farther cells rank higher"""
    cells = list(getattr(defender_allocation, "cells", defender_allocation))
    if not cells:
        raise EmptyAllocationError()
    return feature_rank(grid, cells, mode)


def score_average(density, distance_rank):
    return 0.5 * density + 0.5 * distance_rank


def score_update(scores, s_av, rate=SCORE_RATE):
    scores = np.asarray(scores, dtype=np.float64)
    s_av = np.asarray(s_av, dtype=np.float64)
    if scores.shape != s_av.shape:
        raise ValueError("Score maps differ in shape: {0} != {1}".format(
            scores.shape, s_av.shape))
    return scores + rate * (s_av - scores)


def greedy_move(grid, cell, scores):
    """The legal move reaching the best scored cell. Ties keep the first
    move in the up, down, left, right, stay order."""
    best_move, best_score = None, None
    for move in grid.legal_moves(cell):
        target = shifted(cell, move)
        score = scores[target.row, target.col]
        if best_score is None or score > best_score:
            best_move, best_score = move, score
    return best_move


def edge_distance(grid, cell):
    return min(cell.row, cell.col,
               grid.height - 1 - cell.row, grid.width - 1 - cell.col)


def flee_route(grid, cell):
    """One step along a shortest path to the closest edge cell"""
    current = edge_distance(grid, cell)
    if current == 0:
        return STAY
    for move in MOVES[:-1]:
        target = shifted(cell, move)
        if grid.contains(target) and edge_distance(grid, target) < current:
            return move
    return STAY


#===============================================================================
# SCORE MAP
#===============================================================================

class ScoreMap(object):
    """Cross-episode cell scores shared by an attacker population"""

    def __init__(self, values=None, episodes=0, rate=SCORE_RATE):
        self.values = None if values is None else \
            np.array(values, dtype=np.float64)
        self.episodes = episodes
        self.rate = rate

    def __repr__(self):
        return "ScoreMap(episodes={0})".format(self.episodes)

    @property
    def initialized(self):
        return self.values is not None

    def update(self, s_av):
        """The first update adopts ``s_av``; later ones move toward it"""
        if self.values is None:
            self.values = np.array(s_av, dtype=np.float64)
        else:
            self.values = score_update(self.values, s_av, self.rate)
        self.episodes += 1
        return self

    def to_csv(self, path):
        np.savetxt(path, self.values, fmt="%.6f", delimiter=",")

    @classmethod
    def from_csv(cls, path, episodes=0):
        return cls(np.loadtxt(path, delimiter=",", ndmin=2), episodes)


#===============================================================================
# POLICY
#===============================================================================

class HeuristicAttacker(object):
    """Attacker patrolling policy.

    :param grid: the park
    :param cadence: ``episode`` updates the scores once when an episode
                    begins, ``timestep`` once per step as well
    :param rank_mode: how distances to defenders are ranked

    """

    def __init__(self, grid, cadence=CADENCE_EPISODE, rate=SCORE_RATE,
                 rank_mode=RANK_DISTANCE):
        if cadence not in CADENCES:
            raise ValueError("Unknown score cadence '{0}'".format(cadence))
        self.grid = grid
        self.cadence = cadence
        self.rank_mode = rank_mode
        self.score_map = ScoreMap(rate=rate)
        self._s_av = None

    def __repr__(self):
        return "HeuristicAttacker({0!r}, cadence={1!r})".format(
            self.grid, self.cadence)

    @property
    def scores(self):
        return self.score_map.values

    def current_average(self, defender_cells):
        ranks = distance_ranks(self.grid, defender_cells, self.rank_mode)
        return score_average(self.grid.density, ranks)

    def begin_episode(self, defender_cells):
        self._s_av = self.current_average(defender_cells)
        self.score_map.update(self._s_av)
        logger.debug("Attacker scores updated (%d episodes)",
                     self.score_map.episodes)

    def next_move(self, state, attacker_id):
        status = state.attacker_status[attacker_id]
        cell = state.attacker_pos[attacker_id]
        if status == ACTIVE:
            return greedy_move(self.grid, cell, self.scores)
        elif status == FLEEING:
            return flee_route(self.grid, cell)
        return STAY

    def act(self, state):
        moves = [self.next_move(state, idx)
                 for idx in range(len(state.attacker_pos))]
        if self.cadence == CADENCE_TIMESTEP and state.t > 0:
            self.score_map.values = score_update(
                self.score_map.values, self._s_av, self.score_map.rate)
        return moves


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
