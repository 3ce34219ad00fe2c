#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

import numpy as np
import pytest

from greensec import engine
from greensec.engine import (GameConfig, PatrolGame, ACTIVE, FLEEING, CAUGHT,
                             FLED, SIGNAL, NOTIFY, NOOP, CAPTURE, ATTACK,
                             DETECTION, FLEE, ESCAPE, SIGNALED, NOTIFIED)
from greensec.gridworld import (Cell, GridWorld, UP, DOWN, LEFT, RIGHT, STAY,
                                spatial_density)


#===============================================================================
# HELPERS
#===============================================================================

class StaySide(object):
    """Attackers that never move"""

    def begin_episode(self, cells):
        self.cells = cells

    def act(self, state, rng=None):
        return [STAY] * len(state.attacker_pos)


class StayDefender(object):

    def act(self, state, rng=None):
        return ([engine.drone_action(STAY, NOOP)] * len(state.drone_pos),
                [STAY] * len(state.ranger_pos))


class RandomDefender(object):
    """Uniform legal actions"""

    def __init__(self, grid, rng):
        self.grid = grid
        self.rng = rng

    def _pick(self, choices):
        return choices[int(self.rng.integers(len(choices)))]

    def act(self, state, rng=None):
        drones = [self._pick(engine.legal_drone_actions(self.grid, c))
                  for c in state.drone_pos]
        rangers = [self._pick(self.grid.legal_moves(c))
                   for c in state.ranger_pos]
        return drones, rangers


class RandomAttacker(RandomDefender):

    def begin_episode(self, cells):
        pass

    def act(self, state, rng=None):
        return [self._pick(self.grid.legal_moves(c))
                for c in state.attacker_pos]


def stay(game):
    return ([engine.drone_action(STAY, NOOP)] * game.config.n_d,
            [STAY] * game.config.n_r, [STAY] * game.config.n_a)


@pytest.fixture
def flat_game():
    grid = GridWorld(np.full((5, 5), 0.5))
    return PatrolGame(grid, GameConfig(n_d=1, n_r=1, n_a=1, T=10))


#===============================================================================
# TESTS
#===============================================================================

def test_drone_action_layout():
    assert engine.drone_action(UP, SIGNAL) == 0
    assert engine.drone_action(STAY, NOOP) == 14
    assert engine.split_drone_action(engine.drone_action(LEFT, NOTIFY)) == \
        (LEFT, NOTIFY)
    assert engine.N_DRONE_ACTIONS == 15


def test_legal_actions_stay_inside(grid):
    corner = engine.legal_drone_actions(grid, Cell(0, 0))
    assert len(corner) == 9
    assert all(engine.split_drone_action(a)[0] in (DOWN, RIGHT, STAY)
               for a in corner)
    assert engine.legal_ranger_actions(grid, Cell(2, 2)) == \
        [UP, DOWN, LEFT, RIGHT, STAY]


@pytest.mark.parametrize("kwargs", [
    {"beta": 1.5}, {"kappa": -0.1}, {"T": 0}, {"n_d": -1}, {"r_plus": 0.},
    {"r_c_bar": 0.1}, {"gamma": 2.}])
def test_game_config_bounds(kwargs):
    with pytest.raises(engine.GameConfigError):
        GameConfig(**kwargs)


def test_game_config_from_config(small_config):
    config = GameConfig.from_config(small_config)
    assert config.T == small_config["GAME_MAX_STEPS"]
    assert config.n_defenders == 3
    assert config.replace(beta=0.5).beta == 0.5


def test_init_patrol(game):
    state = game.init_patrol([(0, 0), (1, 1), (2, 2)], [(4, 4)])
    assert state.t == 0
    assert state.drone_pos == [Cell(0, 0), Cell(1, 1)]
    assert state.ranger_pos == [Cell(2, 2)]
    assert state.attacker_status == [ACTIVE]
    assert state.visit_counts.shape == (3, 5, 5)
    assert state.visit_counts.sum() == 3
    assert state.last_comms == [NOOP, NOOP]


@pytest.mark.parametrize("defender, attacker", [
    ([(0, 0), (1, 1)], [(4, 4)]),
    ([(0, 0), (1, 1), (2, 2)], []),
    ([(0, 0), (1, 1), (9, 9)], [(4, 4)])])
def test_init_patrol_rejects_allocations(game, defender, attacker):
    with pytest.raises(engine.AllocationError):
        game.init_patrol(defender, attacker)


def test_ranger_captures_attacker(flat_game, rng):
    state = flat_game.init_patrol([(0, 0), (2, 1)], [(2, 2)])
    state, outcome = flat_game.step(
        state, [engine.drone_action(STAY, NOOP)], [RIGHT], [STAY], rng)
    assert state.attacker_status == [CAUGHT]
    assert outcome.count(CAPTURE) == 1
    assert outcome.count(ATTACK) == 0
    assert outcome.defender_reward == pytest.approx(10.)
    assert flat_game.is_terminal(state)
    with pytest.raises(engine.TerminalStateError):
        flat_game.step(state, *stay(flat_game) + (rng,))


def test_attack_damage(flat_game, rng):
    state = flat_game.init_patrol([(0, 0), (4, 4)], [(2, 2)])
    state, outcome = flat_game.step(state, *stay(flat_game) + (rng,))
    attacks = list(e for e in outcome.events if e.kind == ATTACK)
    assert len(attacks) == 1
    assert attacks[0].damage == pytest.approx(0.5)
    assert outcome.defender_reward == pytest.approx(-0.5)
    assert outcome.attacker_reward == pytest.approx(0.5)


def test_justified_signal_makes_attacker_flee(flat_game, rng):
    state = flat_game.init_patrol([(1, 2), (4, 4)], [(2, 2)])
    state, outcome = flat_game.step(
        state, [engine.drone_action(DOWN, SIGNAL)], [STAY], [STAY], rng)
    kinds = [e.kind for e in outcome.events]
    assert kinds == [DETECTION, SIGNALED, FLEE]
    assert state.attacker_status == [FLEEING]
    assert outcome.defender_reward == pytest.approx(0.1)

    # the fleeing attacker walks to the edge and leaves
    state, outcome = flat_game.step(
        state, [engine.drone_action(STAY, NOOP)], [STAY], [UP], rng)
    assert outcome.count(ESCAPE) == 0
    state, outcome = flat_game.step(
        state, [engine.drone_action(STAY, NOOP)], [STAY], [UP], rng)
    assert state.attacker_status == [FLED]
    assert outcome.count(ESCAPE) == 1
    assert outcome.defender_reward == 0.
    assert flat_game.is_terminal(state)


def test_unjustified_communication_is_penalized(flat_game, rng):
    state = flat_game.init_patrol([(0, 0), (4, 4)], [(2, 2)])
    _, outcome = flat_game.step(
        state, [engine.drone_action(STAY, NOTIFY)], [STAY], [STAY], rng)
    notify = [e for e in outcome.events if e.kind == NOTIFIED]
    assert len(notify) == 1 and notify[0].justified is False
    assert outcome.defender_reward == pytest.approx(-0.2 - 0.5)


def test_certain_miss(rng):
    grid = GridWorld(np.full((5, 5), 0.5))
    game = PatrolGame(grid, GameConfig(n_d=1, n_r=0, n_a=1, T=3, beta=1.))
    state = game.init_patrol([(2, 2)], [(2, 2)])
    state, outcome = game.step(
        state, [engine.drone_action(STAY, SIGNAL)], [], [STAY], rng)
    assert state.last_detections == [False]
    assert outcome.count(DETECTION) == 0
    signal = [e for e in outcome.events if e.kind == SIGNALED]
    assert signal[0].justified is False
    assert state.attacker_status == [FLEEING]


def test_unobserved_signal(rng):
    grid = GridWorld(np.full((5, 5), 0.5))
    game = PatrolGame(grid, GameConfig(n_d=1, n_r=0, n_a=1, T=3, kappa=1.))
    state = game.init_patrol([(2, 2)], [(2, 2)])
    state, outcome = game.step(
        state, [engine.drone_action(STAY, SIGNAL)], [], [STAY], rng)
    assert state.last_detections == [True]
    assert state.attacker_status == [ACTIVE]
    assert outcome.count(ATTACK) == 1


def test_detect_draws_only_when_colocated():
    rng = np.random.default_rng(0)
    before = rng.bit_generator.state
    assert engine.detect(Cell(0, 0), set([Cell(1, 1)]), 0.5, rng) is False
    assert rng.bit_generator.state == before


def test_illegal_actions(flat_game, rng):
    state = flat_game.init_patrol([(0, 0), (4, 4)], [(2, 2)])
    with pytest.raises(ValueError):
        flat_game.step(state, [15], [STAY], [STAY], rng)
    with pytest.raises(ValueError):
        flat_game.step(state, [], [STAY], [STAY], rng)


def test_moves_off_the_park_clamp(flat_game, rng):
    state = flat_game.init_patrol([(0, 0), (4, 4)], [(2, 2)])
    state, _ = flat_game.step(
        state, [engine.drone_action(UP, NOOP)], [DOWN], [STAY], rng)
    assert state.drone_pos == [Cell(0, 0)]
    assert state.ranger_pos == [Cell(4, 4)]


def test_visit_counts_only_increase(flat_game, rng):
    state = flat_game.init_patrol([(0, 0), (4, 4)], [(2, 2)])
    previous = state.visit_counts.copy()
    for move in (DOWN, DOWN, RIGHT, UP):
        state, _ = flat_game.step(
            state, [engine.drone_action(move, NOOP)], [LEFT], [STAY], rng)
        assert np.all(state.visit_counts >= previous)
        assert state.visit_counts.sum() == previous.sum() + 2
        previous = state.visit_counts.copy()


def test_episode_stops_at_horizon(flat_game):
    episode = engine.play_episode(flat_game, [(0, 0), (4, 4)], [(2, 2)],
                                  StayDefender(), StaySide(), seed=1)
    assert episode.length == flat_game.config.T
    assert episode.count(ATTACK) == flat_game.config.T
    assert episode.defender_return == pytest.approx(-0.5 * 10)
    assert episode.attacker_return == -episode.defender_return
    assert episode.final_state.t == flat_game.config.T


def test_episode_is_reproducible(game):
    def play(seed):
        return engine.play_episode(
            game, [(0, 0), (1, 1), (2, 2)], [(3, 3)],
            RandomDefender(game.grid, np.random.default_rng(5)),
            RandomAttacker(game.grid, np.random.default_rng(6)), seed=seed)

    first, second = play(9), play(9)
    assert first.defender_return == second.defender_return
    assert first.actions == second.actions
    assert [list(e) for e in first.events()] == \
        [list(e) for e in second.events()]


def test_replay_matches_recording(game):
    episode = engine.play_episode(
        game, [(0, 0), (1, 1), (2, 2)], [(3, 3)],
        RandomDefender(game.grid, np.random.default_rng(5)),
        RandomAttacker(game.grid, np.random.default_rng(7)), seed=4)
    outcomes = engine.replay_actions(game, [(0, 0), (1, 1), (2, 2)],
                                     [(3, 3)], episode.actions, 4)
    assert [o.defender_reward for o in outcomes] == \
        [o.defender_reward for o in episode.outcomes]


def test_trace_records(game):
    episode = engine.play_episode(
        game, [(0, 0), (1, 1), (2, 2)], [(3, 3)],
        RandomDefender(game.grid, np.random.default_rng(2)),
        RandomAttacker(game.grid, np.random.default_rng(7)), seed=4)
    header = episode.header_record()
    steps = list(episode.step_records())
    assert header["kind"] == "header"
    assert header["length"] == len(steps) == episode.length
    assert len(header["density"]) == game.grid.height
    assert steps[0]["t"] == 1
    assert set(steps[0]) >= set(["drones", "rangers", "attackers", "comms",
                                 "events", "reward"])



#===============================================================================
# INVARIANTS
#===============================================================================

STATUS_ORDER = {ACTIVE: 0, FLEEING: 1, CAUGHT: 2, FLED: 2}


def test_detection_frequency():
    rng = np.random.default_rng(11)
    trials = 20000
    hits = sum(engine.detect(Cell(1, 1), set([Cell(1, 1)]), 0.25, rng)
               for _ in range(trials))
    assert abs(hits / float(trials) - 0.75) < 0.02
    assert all(engine.detect(Cell(1, 1), set([Cell(1, 1)]), 0., rng)
               for _ in range(1000))


def test_observation_frequency():
    rng = np.random.default_rng(12)
    trials = 20000
    seen = sum(engine.observe_signal(True, 0.75, rng) for _ in range(trials))
    assert abs(seen / float(trials) - 0.25) < 0.02
    assert not any(engine.observe_signal(False, 0., rng) for _ in range(100))


def test_random_episodes_keep_the_invariants():
    grid = spatial_density(8, 8)
    config = GameConfig(n_d=2, n_r=1, n_a=1, T=30, beta=0.25, kappa=0.25)
    game = PatrolGame(grid, config)
    rng = np.random.default_rng(3)
    defenders = RandomDefender(grid, np.random.default_rng(4))
    attackers = RandomAttacker(grid, np.random.default_rng(5))
    for idx in range(400):
        defender = engine.sample_cells(grid, config.n_defenders, rng)
        attacker = engine.sample_cells(grid, config.n_a, rng)
        episode = engine.play_episode(game, defender, attacker, defenders,
                                      attackers, seed=idx)
        assert 1 <= episode.length <= config.T
        assert episode.defender_return + episode.attacker_return == 0.
        assert episode.defender_return == \
            sum(o.defender_reward for o in episode.outcomes)

        previous = episode.initial_state
        for state in episode.states:
            assert state.t == previous.t + 1
            assert state.visit_counts.sum() == \
                config.n_defenders * (state.t + 1)
            for before, after in zip(previous.attacker_status,
                                     state.attacker_status):
                assert STATUS_ORDER[after] >= STATUS_ORDER[before]
                if before in (CAUGHT, FLED):
                    assert after == before
            previous = state
        assert game.is_terminal(episode.final_state)
