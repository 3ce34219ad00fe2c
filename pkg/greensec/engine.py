#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""The patrolling stage.

Drones, rangers and attackers move simultaneously on the park. Inside one
timestep events resolve in a fixed order:

1. every agent moves (moves leaving the park clamp to stay);
2. drones run their detectors (false negatives with probability ``beta``);
3. drone communications resolve: a signal may be perceived by co-located
   active attackers (missed with probability ``kappa``), who start fleeing;
   a notification is shown to rangers on the next observation;
4. rangers capture every live attacker sharing their cell;
5. fleeing attackers standing on an edge cell leave the park;
6. active attackers damage their cell;
7. the defender reward of the step is accounted;
8. the clock ticks and visit counts are updated.

"""

#===============================================================================
# IMPORTS
#===============================================================================

import collections
import logging

import numpy as np

from .gridworld import as_cell, MOVES


#===============================================================================
# LOGGER
#===============================================================================

logger = logging.getLogger(__name__)


#===============================================================================
# CONSTANTS
#===============================================================================

ACTIVE, FLEEING, CAUGHT, FLED = "active", "fleeing", "caught", "fled"

LIVE = (ACTIVE, FLEEING)

RESOLVED = (CAUGHT, FLED)

SIGNAL, NOTIFY, NOOP = range(3)

COMM_NAMES = ("signal", "notify", "noop")

N_COMMS = len(COMM_NAMES)

N_MOVES = len(MOVES)

N_DRONE_ACTIONS = N_MOVES * N_COMMS

N_RANGER_ACTIONS = N_MOVES

DETECTION = "detection"
SIGNALED = "signal"
NOTIFIED = "notify"
CAPTURE = "capture"
FLEE = "flee"
ESCAPE = "fled"
ATTACK = "attack"

COMM_EVENTS = {SIGNAL: SIGNALED, NOTIFY: NOTIFIED}

TRACE_SCHEMA_VERSION = 1


#===============================================================================
# ERRORS
#===============================================================================

class AllocationError(ValueError):
    pass


class TerminalStateError(RuntimeError):

    def __init__(self, t):
        self.t = t
        super(TerminalStateError, self).__init__(
            "The game already finished at t={0}".format(t))


class GameConfigError(ValueError):
    pass


#===============================================================================
# ACTIONS
#===============================================================================

def drone_action(move, comm):
    return move * N_COMMS + comm


def split_drone_action(action):
    """Returns ``(move, comm)``"""
    return divmod(int(action), N_COMMS)


def legal_drone_actions(grid, cell):
    return [drone_action(m, c)
            for m in grid.legal_moves(cell) for c in range(N_COMMS)]


def legal_ranger_actions(grid, cell):
    return list(grid.legal_moves(cell))


#===============================================================================
# EVENTS
#===============================================================================

Event = collections.namedtuple(
    "Event", ["kind", "agent", "cell", "justified", "damage"])
Event.__new__.__defaults__ = (None, None)


def event_record(event):
    record = {"kind": event.kind, "agent": event.agent,
              "cell": [event.cell.row, event.cell.col]}
    if event.justified is not None:
        record["justified"] = bool(event.justified)
    if event.damage is not None:
        record["damage"] = event.damage
    return record


class StepOutcome(object):

    def __init__(self, defender_reward, events):
        self.defender_reward = defender_reward
        self.events = list(events)

    def __repr__(self):
        return "StepOutcome({0!r}, {1} events)".format(
            self.defender_reward, len(self.events))

    @property
    def attacker_reward(self):
        return -self.defender_reward

    def count(self, kind):
        return sum(1 for e in self.events if e.kind == kind)


#===============================================================================
# CONFIG
#===============================================================================

class GameConfig(object):
    """Counts, horizon, uncertainty and reward magnitudes of a game"""

    FIELDS = ("n_d", "n_r", "n_a", "T", "beta", "kappa", "r_plus",
              "r_minus_scale", "r_c", "r_c_bar", "gamma")

    CONFIG_KEYS = {
        "n_d": "GAME_DRONES", "n_r": "GAME_RANGERS", "n_a": "GAME_ATTACKERS",
        "T": "GAME_MAX_STEPS", "beta": "GAME_BETA", "kappa": "GAME_KAPPA",
        "r_plus": "GAME_R_PLUS", "r_minus_scale": "GAME_R_MINUS_SCALE",
        "r_c": "GAME_R_C", "r_c_bar": "GAME_R_C_BAR", "gamma": "GAME_GAMMA",
    }

    def __init__(self, n_d=2, n_r=1, n_a=1, T=100, beta=0., kappa=0.,
                 r_plus=10., r_minus_scale=1., r_c=0.1, r_c_bar=-0.2,
                 gamma=0.99):
        self.n_d, self.n_r, self.n_a = int(n_d), int(n_r), int(n_a)
        self.T = int(T)
        self.beta, self.kappa = float(beta), float(kappa)
        self.r_plus = float(r_plus)
        self.r_minus_scale = float(r_minus_scale)
        self.r_c, self.r_c_bar = float(r_c), float(r_c_bar)
        self.gamma = float(gamma)
        self.validate()

    def validate(self):
        if min(self.n_d, self.n_r, self.n_a) < 0:
            raise GameConfigError("Agent counts must be >= 0")
        if self.T < 1:
            raise GameConfigError("T must be >= 1")
        for name in ("beta", "kappa", "gamma"):
            if not 0. <= getattr(self, name) <= 1.:
                raise GameConfigError("{0} must lie in [0, 1]".format(name))
        if self.r_plus <= 0 or self.r_minus_scale <= 0:
            raise GameConfigError("r_plus and r_minus_scale must be > 0")
        if self.r_c_bar >= 0:
            raise GameConfigError("r_c_bar must be < 0")

    def __repr__(self):
        return "GameConfig({0})".format(", ".join(
            "{0}={1!r}".format(f, getattr(self, f)) for f in self.FIELDS))

    def __eq__(self, other):
        return isinstance(other, GameConfig) and \
            self.as_dict() == other.as_dict()

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    @property
    def n_defenders(self):
        return self.n_d + self.n_r

    def as_dict(self):
        return dict((f, getattr(self, f)) for f in self.FIELDS)

    def replace(self, **changes):
        values = self.as_dict()
        values.update(changes)
        return GameConfig(**values)

    @classmethod
    def from_config(cls, config):
        return cls(**dict((f, config[k]) for f, k in cls.CONFIG_KEYS.items()))


#===============================================================================
# STATE
#===============================================================================

class GameState(object):
    """Everything that changes during a patrol.

    ``visit_counts`` has one layer per defender agent, drones first.

    """

    def __init__(self, t, drone_pos, ranger_pos, attacker_pos,
                 attacker_status, visit_counts, last_detections, last_comms,
                 defender_cells):
        self.t = t
        self.drone_pos = list(drone_pos)
        self.ranger_pos = list(ranger_pos)
        self.attacker_pos = list(attacker_pos)
        self.attacker_status = list(attacker_status)
        self.visit_counts = visit_counts
        self.last_detections = list(last_detections)
        self.last_comms = list(last_comms)
        self.defender_cells = tuple(defender_cells)

    def __repr__(self):
        return "GameState(t={0}, attackers={1})".format(
            self.t, self.attacker_status)

    def copy(self):
        return GameState(self.t, self.drone_pos, self.ranger_pos,
                         self.attacker_pos, self.attacker_status,
                         self.visit_counts.copy(), self.last_detections,
                         self.last_comms, self.defender_cells)

    @property
    def defender_pos(self):
        return self.drone_pos + self.ranger_pos

    def live_attacker_cells(self):
        return set(pos for pos, status in
                   zip(self.attacker_pos, self.attacker_status)
                   if status in LIVE)


#===============================================================================
# FUNCTIONS
#===============================================================================

def detect(drone_cell, attacker_cells, beta, rng):
    """A drone sees a live attacker in its cell with probability 1 - beta.
    There are no false positives."""
    if drone_cell not in attacker_cells:
        return False
    return bool(rng.random() >= beta)


def observe_signal(signal_present, kappa, rng):
    """An attacker perceives a present signal with probability 1 - kappa"""
    if not signal_present:
        return False
    return bool(rng.random() >= kappa)


def reward_accounting(events, config, grid):
    """Defender reward of one step"""
    total = 0.
    for event in events:
        if event.kind == CAPTURE:
            total += config.r_plus
        elif event.kind == ATTACK:
            total -= config.r_minus_scale * grid.density_at(event.cell)
        elif event.kind in (SIGNALED, NOTIFIED):
            total += config.r_c if event.justified else config.r_c_bar
    return total


def is_terminal(state, config):
    resolved = all(s in RESOLVED for s in state.attacker_status)
    return resolved or state.t >= config.T


def episode_return(outcomes):
    """Undiscounted defender return; the attacker gets its negation"""
    return sum(o.defender_reward for o in outcomes)


def sample_cells(grid, count, rng):
    """``count`` cells drawn uniformly with replacement"""
    return [grid.cell_at(i) for i in rng.integers(0, grid.n_cells, count)]


def _cells_of(allocation):
    cells = getattr(allocation, "cells", allocation)
    return [as_cell(c) for c in cells]


#===============================================================================
# GAME
#===============================================================================

class PatrolGame(object):

    def __init__(self, grid, config):
        self.grid = grid
        self.config = config

    def __repr__(self):
        return "PatrolGame({0!r}, {1!r})".format(self.grid, self.config)

    def init_patrol(self, defender_allocation, attacker_allocation):
        """Places every agent on its allocated cell at t=0.

        :param defender_allocation: ``n_d`` drone cells then ``n_r`` ranger
                                    cells (or an object with ``cells``)
        :param attacker_allocation: ``n_a`` attacker cells

        """
        config, grid = self.config, self.grid
        defender = _cells_of(defender_allocation)
        attacker = _cells_of(attacker_allocation)
        if len(defender) != config.n_defenders:
            raise AllocationError(
                "Expected {0} defender cells, got {1}".format(
                    config.n_defenders, len(defender)))
        if len(attacker) != config.n_a:
            raise AllocationError(
                "Expected {0} attacker cells, got {1}".format(
                    config.n_a, len(attacker)))
        for cell in defender + attacker:
            if not grid.contains(cell):
                raise AllocationError("{0} is outside the park".format(cell))

        visits = np.zeros((config.n_defenders,) + grid.shape, dtype=np.int64)
        for idx, cell in enumerate(defender):
            visits[idx, cell.row, cell.col] += 1
        return GameState(
            t=0,
            drone_pos=defender[:config.n_d],
            ranger_pos=defender[config.n_d:],
            attacker_pos=attacker,
            attacker_status=[ACTIVE] * config.n_a,
            visit_counts=visits,
            last_detections=[False] * config.n_d,
            last_comms=[NOOP] * config.n_d,
            defender_cells=defender)

    def is_terminal(self, state):
        return is_terminal(state, self.config)

    def _checked(self, actions, count, size, kind):
        actions = [int(a) for a in actions]
        if len(actions) != count:
            raise ValueError("Expected {0} {1} actions, got {2}".format(
                count, kind, len(actions)))
        for action in actions:
            if not 0 <= action < size:
                raise ValueError("Illegal {0} action {1}".format(
                    kind, action))
        return actions

    def step(self, state, drone_actions, ranger_actions, attacker_actions,
             rng):
        """Plays one timestep and returns ``(next_state, outcome)``"""
        if self.is_terminal(state):
            raise TerminalStateError(state.t)
        grid, config = self.grid, self.config
        drone_actions = self._checked(
            drone_actions, config.n_d, N_DRONE_ACTIONS, "drone")
        ranger_actions = self._checked(
            ranger_actions, config.n_r, N_RANGER_ACTIONS, "ranger")
        attacker_actions = self._checked(
            attacker_actions, config.n_a, N_MOVES, "attacker")

        new = state.copy()
        drone_split = [split_drone_action(a) for a in drone_actions]
        comms = [comm for _, comm in drone_split]

        # moves
        new.drone_pos = [grid.move(cell, move) for cell, (move, _)
                         in zip(state.drone_pos, drone_split)]
        new.ranger_pos = [grid.move(cell, move) for cell, move
                          in zip(state.ranger_pos, ranger_actions)]
        for idx, move in enumerate(attacker_actions):
            if new.attacker_status[idx] in LIVE:
                new.attacker_pos[idx] = grid.move(new.attacker_pos[idx], move)

        events = []

        # detection
        live = new.live_attacker_cells()
        detections = []
        for idx, cell in enumerate(new.drone_pos):
            found = detect(cell, live, config.beta, rng)
            detections.append(found)
            if found:
                events.append(Event(DETECTION, idx, cell))

        # communication
        for idx, cell in enumerate(new.drone_pos):
            comm = comms[idx]
            if comm == NOOP:
                continue
            events.append(Event(COMM_EVENTS[comm], idx, cell,
                                justified=detections[idx]))
            if comm != SIGNAL:
                continue
            for adx, pos in enumerate(new.attacker_pos):
                if pos != cell or new.attacker_status[adx] != ACTIVE:
                    continue
                if observe_signal(True, config.kappa, rng):
                    new.attacker_status[adx] = FLEEING
                    events.append(Event(FLEE, adx, pos))

        # captures, fleeing attackers included
        rangers = set(new.ranger_pos)
        for adx, pos in enumerate(new.attacker_pos):
            if new.attacker_status[adx] in LIVE and pos in rangers:
                new.attacker_status[adx] = CAUGHT
                events.append(Event(CAPTURE, adx, pos))

        # exits
        for adx, pos in enumerate(new.attacker_pos):
            if new.attacker_status[adx] == FLEEING and grid.is_edge(pos):
                new.attacker_status[adx] = FLED
                events.append(Event(ESCAPE, adx, pos))

        # damage
        for adx, pos in enumerate(new.attacker_pos):
            if new.attacker_status[adx] == ACTIVE:
                damage = config.r_minus_scale * grid.density_at(pos)
                events.append(Event(ATTACK, adx, pos, damage=damage))

        reward = reward_accounting(events, config, grid)

        new.t = state.t + 1
        new.last_detections = detections
        new.last_comms = comms
        for idx, cell in enumerate(new.defender_pos):
            new.visit_counts[idx, cell.row, cell.col] += 1
        return new, StepOutcome(reward, events)


def init_patrol(grid, config, defender_allocation, attacker_allocation):
    return PatrolGame(grid, config).init_patrol(defender_allocation,
                                                attacker_allocation)


#===============================================================================
# EPISODES
#===============================================================================

class Episode(object):
    """A recorded patrol: actions, outcomes and positions of every step"""

    def __init__(self, game, defender_cells, attacker_cells, seed,
                 initial_state):
        self.game = game
        self.defender_cells = list(defender_cells)
        self.attacker_cells = list(attacker_cells)
        self.seed = seed
        self.initial_state = initial_state
        self.final_state = initial_state
        self.actions = []
        self.outcomes = []
        self.states = []

    def __repr__(self):
        return "Episode(length={0}, return={1!r})".format(
            self.length, self.defender_return)

    def __len__(self):
        return self.length

    def append(self, actions, next_state, outcome):
        self.actions.append(actions)
        self.outcomes.append(outcome)
        self.states.append(next_state)
        self.final_state = next_state

    @property
    def length(self):
        return len(self.outcomes)

    @property
    def defender_return(self):
        return episode_return(self.outcomes)

    @property
    def attacker_return(self):
        return -self.defender_return

    def events(self, kind=None):
        for outcome in self.outcomes:
            for event in outcome.events:
                if kind is None or event.kind == kind:
                    yield event

    def count(self, kind):
        return sum(1 for _ in self.events(kind))

    def header_record(self):
        grid = self.game.grid
        return {
            "kind": "header",
            "schema": TRACE_SCHEMA_VERSION,
            "width": grid.width,
            "height": grid.height,
            "density": grid.density.tolist(),
            "config": self.game.config.as_dict(),
            "defender": [list(c) for c in self.defender_cells],
            "attacker": [list(c) for c in self.attacker_cells],
            "seed": self.seed,
            "length": self.length,
        }

    def step_records(self):
        for actions, state, outcome in zip(self.actions, self.states,
                                           self.outcomes):
            drone_actions, ranger_actions, attacker_actions = actions
            yield {
                "kind": "step",
                "t": state.t,
                "drones": [list(c) for c in state.drone_pos],
                "rangers": [list(c) for c in state.ranger_pos],
                "attackers": [{"cell": list(c), "status": s} for c, s in
                              zip(state.attacker_pos, state.attacker_status)],
                "drone_actions": list(drone_actions),
                "ranger_actions": list(ranger_actions),
                "attacker_actions": list(attacker_actions),
                "detections": list(state.last_detections),
                "comms": [COMM_NAMES[c] for c in state.last_comms],
                "events": [event_record(e) for e in outcome.events],
                "reward": outcome.defender_reward,
            }


def play_episode(game, defender_allocation, attacker_allocation,
                 defender_policy, attacker_policy, seed, policy_rng=None,
                 observer=None):
    """Plays a full patrol from the given allocations.

    :param defender_policy: object with ``act(state, rng) -> (drone_actions,
                            ranger_actions)``
    :param attacker_policy: object with ``begin_episode(defender_cells)`` and
                            ``act(state) -> attacker_actions``
    :param seed: seed of the engine generator (detections and observations)
    :param policy_rng: generator handed to the defender policy
    :param observer: optional callable ``(state, actions, next_state,
                     outcome)`` called after each step

    """
    engine_rng = np.random.default_rng(seed)
    state = game.init_patrol(defender_allocation, attacker_allocation)
    attacker_policy.begin_episode(state.defender_cells)
    episode = Episode(game, state.defender_cells, state.attacker_pos, seed,
                      state)
    while not game.is_terminal(state):
        drone_actions, ranger_actions = defender_policy.act(state, policy_rng)
        attacker_actions = attacker_policy.act(state)
        actions = (list(drone_actions), list(ranger_actions),
                   list(attacker_actions))
        next_state, outcome = game.step(state, drone_actions, ranger_actions,
                                        attacker_actions, engine_rng)
        episode.append(actions, next_state, outcome)
        if observer is not None:
            observer(state, actions, next_state, outcome)
        state = next_state
    logger.debug("Episode finished: %r", episode)
    return episode


def replay_actions(game, defender_allocation, attacker_allocation, actions,
                   seed):
    """Re-plays recorded ``(drone, ranger, attacker)`` actions with the
    engine seed of the recording and returns the outcomes"""
    engine_rng = np.random.default_rng(seed)
    state = game.init_patrol(defender_allocation, attacker_allocation)
    outcomes = []
    for drone_actions, ranger_actions, attacker_actions in actions:
        state, outcome = game.step(state, drone_actions, ranger_actions,
                                   attacker_actions, engine_rng)
        outcomes.append(outcome)
    return outcomes


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
