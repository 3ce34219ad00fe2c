#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Defender patrolling with multi-agent Double DQN.

All drones share one Q network and all rangers share another (centralized
learning); every agent still picks its own action from its own observation.

Observations are 9 x height x width tensors:

0. own position
1. an attacker was detected by a drone in the own cell
2. positions of the other drones
3. positions of the other rangers
4. detector outputs at drone cells
5. notify flags at drone cells
6. signal flags at drone cells
7. animal density of visited cells (``visited``) or of the own cell (``own``)
8. team visit counts normalized by ``t + 1``

"""

#===============================================================================
# IMPORTS
#===============================================================================

import logging
import os

import numpy as np

from . import signals
from .attacker import HeuristicAttacker
from .engine import (PatrolGame, GameConfig, NOTIFY, SIGNAL, N_COMMS,
                     N_DRONE_ACTIONS, N_RANGER_ACTIONS, legal_drone_actions,
                     legal_ranger_actions, drone_action, sample_cells,
                     play_episode)
from .gridworld import STAY
from .nn import (Network, Conv2D, Dense, Flatten, ReLU, AdamState, adam_step,
                 q_loss, float_dtype, save_checkpoint, load_checkpoint)
from .seeding import derive_seed, stream


#===============================================================================
# LOGGER
#===============================================================================

logger = logging.getLogger(__name__)


#===============================================================================
# CONSTANTS
#===============================================================================

N_CHANNELS = 9

DRONE, RANGER = "drone", "ranger"

AGENT_KINDS = (DRONE, RANGER)

DENSITY_VISITED = "visited"
DENSITY_OWN = "own"
DENSITY_MODES = (DENSITY_VISITED, DENSITY_OWN)

MIN_PATROL_SIDE = 5

METRIC_FIELDS = ("episode", "return", "epsilon", "buffer_fill", "loss")


#===============================================================================
# ERRORS
#===============================================================================

class UnknownAgentError(ValueError):

    def __init__(self, kind, agent_id):
        self.kind = kind
        self.agent_id = agent_id
        super(UnknownAgentError, self).__init__(
            "There is no {0} #{1}".format(kind, agent_id))


#===============================================================================
# OBSERVATIONS
#===============================================================================

def _mark(layer, cells):
    for cell in cells:
        layer[cell.row, cell.col] = 1.


def encode_observation(state, grid, agent_id, agent_kind,
                       density_mode=DENSITY_VISITED, dtype=np.float64):
    if agent_kind == DRONE:
        positions = state.drone_pos
        layer_idx = agent_id
    elif agent_kind == RANGER:
        positions = state.ranger_pos
        layer_idx = len(state.drone_pos) + agent_id
    else:
        raise UnknownAgentError(agent_kind, agent_id)
    if not 0 <= agent_id < len(positions):
        raise UnknownAgentError(agent_kind, agent_id)

    own = positions[agent_id]
    obs = np.zeros((N_CHANNELS,) + grid.shape, dtype=dtype)
    obs[0, own.row, own.col] = 1.
    if any(found and cell == own for cell, found in
           zip(state.drone_pos, state.last_detections)):
        obs[1, own.row, own.col] = 1.
    _mark(obs[2], [c for idx, c in enumerate(state.drone_pos)
                   if agent_kind != DRONE or idx != agent_id])
    _mark(obs[3], [c for idx, c in enumerate(state.ranger_pos)
                   if agent_kind != RANGER or idx != agent_id])
    for cell, found, comm in zip(state.drone_pos, state.last_detections,
                                 state.last_comms):
        if found:
            obs[4, cell.row, cell.col] = 1.
        if comm == NOTIFY:
            obs[5, cell.row, cell.col] = 1.
        elif comm == SIGNAL:
            obs[6, cell.row, cell.col] = 1.
    if density_mode == DENSITY_VISITED:
        visited = state.visit_counts[layer_idx] > 0
        obs[7] = np.where(visited, grid.density, 0.)
    elif density_mode == DENSITY_OWN:
        obs[7, own.row, own.col] = grid.density_at(own)
    else:
        raise ValueError("Unknown density channel '{0}'".format(density_mode))
    obs[8] = state.visit_counts.sum(axis=0) / float(state.t + 1)
    return obs


def observe_team(state, grid, density_mode=DENSITY_VISITED,
                 dtype=np.float64):
    """Observations of every drone and every ranger, stacked per kind"""
    drones = [encode_observation(state, grid, idx, DRONE, density_mode, dtype)
              for idx in range(len(state.drone_pos))]
    rangers = [encode_observation(state, grid, idx, RANGER, density_mode,
                                  dtype)
               for idx in range(len(state.ranger_pos))]
    shape = (0, N_CHANNELS) + grid.shape
    return (np.array(drones) if drones else np.zeros(shape, dtype),
            np.array(rangers) if rangers else np.zeros(shape, dtype))


def legal_mask(grid, cell, kind):
    if kind == DRONE:
        mask = np.zeros(N_DRONE_ACTIONS, dtype=bool)
        mask[legal_drone_actions(grid, cell)] = True
    else:
        mask = np.zeros(N_RANGER_ACTIONS, dtype=bool)
        mask[legal_ranger_actions(grid, cell)] = True
    return mask


#===============================================================================
# NETWORKS
#===============================================================================

def build_qnetwork(grid, n_actions, conv_filters=(10, 20), hidden=(128, 64),
                   prefix=""):
    if min(grid.shape) < MIN_PATROL_SIDE:
        raise ValueError(
            "Patrol networks need at least {0}x{0} parks".format(
                MIN_PATROL_SIDE))
    layers = []
    for filters in conv_filters:
        layers.extend([Conv2D(filters, 3), ReLU()])
    layers.append(Flatten())
    for units in hidden:
        layers.extend([Dense(units), ReLU()])
    layers.append(Dense(n_actions))
    return Network(layers, (N_CHANNELS,) + grid.shape, prefix)


def epsilon(step, start=1.0, end=0.05, decay_steps=25000):
    if step >= decay_steps:
        return end
    return start + (end - start) * (float(step) / decay_steps)


def masked_argmax(q_values, masks):
    return np.argmax(np.where(masks, q_values, -np.inf), axis=-1)


def ddqn_targets(rewards, next_q_online, next_q_target, dones, gamma,
                 next_masks=None):
    """Double DQN targets: the online net picks, the target net rates"""
    if next_masks is None:
        next_masks = np.ones(next_q_online.shape, dtype=bool)
    best = masked_argmax(next_q_online, next_masks)
    bootstrap = next_q_target[np.arange(len(best)), best]
    rewards = np.asarray(rewards, dtype=next_q_target.dtype)
    return np.where(dones, rewards, rewards + gamma * bootstrap)


def ddqn_target(reward, next_obs, done, online, target, gamma,
                next_mask=None):
    """Target of one transition; ``online`` and ``target`` map a batch of
    observations to Q values"""
    if done:
        return float(reward)
    next_obs = np.asarray(next_obs)[None]
    mask = None if next_mask is None else np.asarray(next_mask)[None]
    return float(ddqn_targets([reward], online(next_obs), target(next_obs),
                              [False], gamma, mask)[0])


class ReplayBuffer(object):
    """Ring buffer of transitions"""

    def __init__(self, capacity, obs_shape, n_actions, dtype=np.float64):
        self.capacity = int(capacity)
        if self.capacity < 1:
            raise ValueError("Replay capacity must be >= 1")
        self.obs = np.zeros((self.capacity,) + tuple(obs_shape), dtype=dtype)
        self.next_obs = np.zeros_like(self.obs)
        self.actions = np.zeros(self.capacity, dtype=np.int64)
        self.rewards = np.zeros(self.capacity, dtype=dtype)
        self.dones = np.zeros(self.capacity, dtype=bool)
        self.next_masks = np.zeros((self.capacity, n_actions), dtype=bool)
        self.cursor = 0
        self.size = 0
        self.pushed = 0

    def __len__(self):
        return self.size

    def __repr__(self):
        return "ReplayBuffer({0}/{1})".format(self.size, self.capacity)

    @property
    def fill(self):
        return self.size / float(self.capacity)

    def push(self, obs, action, reward, next_obs, done, next_mask):
        idx = self.cursor
        self.obs[idx] = obs
        self.actions[idx] = action
        self.rewards[idx] = reward
        self.next_obs[idx] = next_obs
        self.dones[idx] = done
        self.next_masks[idx] = next_mask
        self.cursor = (idx + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.pushed += 1

    def sample(self, batch_size, rng):
        if self.size == 0:
            raise ValueError("Cannot sample an empty replay buffer")
        idx = rng.integers(0, self.size, batch_size)
        return (self.obs[idx], self.actions[idx], self.rewards[idx],
                self.next_obs[idx], self.dones[idx], self.next_masks[idx])


class DDQNPair(object):
    """Online and target parameters of one agent kind"""

    def __init__(self, network, online, lr=3e-4, gamma=0.99, sync_period=20,
                 batch_size=32):
        self.network = network
        self.online = online
        self.target = online.copy()
        self.lr = lr
        self.gamma = gamma
        self.sync_period = int(sync_period)
        self.batch_size = int(batch_size)
        self.adam = AdamState.for_params(online, lr)
        self.updates = 0

    def __repr__(self):
        return "DDQNPair(updates={0}, sync={1})".format(
            self.updates, self.sync_period)

    @classmethod
    def create(cls, network, rng, dtype=np.float64, **kwargs):
        return cls(network, network.init(rng, dtype), **kwargs)

    def q_values(self, obs):
        return self.network.predict(self.online, obs)

    def target_q_values(self, obs):
        return self.network.predict(self.target, obs)

    def sync(self):
        self.target.assign(self.online)

    def loss_and_grad(self, batch):
        obs, actions, rewards, next_obs, dones, next_masks = batch
        targets = ddqn_targets(rewards, self.q_values(next_obs),
                               self.target_q_values(next_obs), dones,
                               self.gamma, next_masks)
        q, cache = self.network.forward(self.online, obs)
        loss, dq = q_loss(q, actions, targets)
        return loss, self.network.backward(self.online, cache, dq)

    def update(self, batch):
        loss, grad = self.loss_and_grad(batch)
        adam_step(self.online, grad, self.adam)
        self.updates += 1
        if self.updates % self.sync_period == 0:
            self.sync()
        return loss


#===============================================================================
# POLICIES
#===============================================================================

def select_actions(state, grid, drone_pair, ranger_pair, eps, rng,
                   density_mode=DENSITY_VISITED, observations=None):
    """Independent epsilon-greedy actions over legal actions for every
    defender agent"""
    dtype = drone_pair.online.dtype
    if observations is None:
        observations = observe_team(state, grid, density_mode, dtype)
    joint = []
    for kind, pair, cells, obs in ((DRONE, drone_pair, state.drone_pos,
                                    observations[0]),
                                   (RANGER, ranger_pair, state.ranger_pos,
                                    observations[1])):
        if not cells:
            joint.append([])
            continue
        q = pair.q_values(obs) if eps < 1. else None
        actions = []
        for idx, cell in enumerate(cells):
            mask = legal_mask(grid, cell, kind)
            if eps >= 1. or rng.random() < eps:
                actions.append(int(rng.choice(np.flatnonzero(mask))))
            else:
                actions.append(int(masked_argmax(q[idx], mask)))
        joint.append(actions)
    return joint[0], joint[1]


class GreedyPatrolPolicy(object):
    """Frozen Q networks with an optional residual exploration"""

    def __init__(self, grid, drone_pair, ranger_pair, eps=0.,
                 density_mode=DENSITY_VISITED):
        self.grid = grid
        self.drone_pair = drone_pair
        self.ranger_pair = ranger_pair
        self.eps = eps
        self.density_mode = density_mode

    def act(self, state, rng):
        return select_actions(state, self.grid, self.drone_pair,
                              self.ranger_pair, self.eps, rng,
                              self.density_mode)


class RandomPatrolPolicy(object):

    def __init__(self, grid):
        self.grid = grid

    def act(self, state, rng):
        drones = [int(rng.choice(legal_drone_actions(self.grid, c)))
                  for c in state.drone_pos]
        rangers = [int(rng.choice(legal_ranger_actions(self.grid, c)))
                   for c in state.ranger_pos]
        return drones, rangers


class StationaryPatrolPolicy(object):
    """Defenders that stay on their allocation and never communicate"""

    def act(self, state, rng):
        return ([drone_action(STAY, N_COMMS - 1)] * len(state.drone_pos),
                [STAY] * len(state.ranger_pos))


#===============================================================================
# TRAINING
#===============================================================================

class PatrolModel(object):
    """The drone and ranger Q networks of a park"""

    FILES = {DRONE: "patrol-drone.ckpt", RANGER: "patrol-ranger.ckpt"}

    def __init__(self, grid, config, rng=None):
        game = GameConfig.from_config(config)
        dtype = float_dtype(config["FLOAT_BITS"])
        rng = rng or np.random.default_rng(derive_seed(config["SEED"],
                                                       "patrol", "init"))
        filters = tuple(config["PATROL_CONV_FILTERS"])
        hidden = tuple(config["PATROL_HIDDEN"])
        common = dict(lr=config["PATROL_LR"], gamma=game.gamma,
                      batch_size=config["PATROL_BATCH_SIZE"])
        self.grid = grid
        self.density_mode = config["PATROL_DENSITY_CHANNEL"]
        self.drone = DDQNPair.create(
            build_qnetwork(grid, N_DRONE_ACTIONS, filters, hidden, "drone."),
            rng, dtype, sync_period=config["PATROL_DRONE_SYNC"], **common)
        self.ranger = DDQNPair.create(
            build_qnetwork(grid, N_RANGER_ACTIONS, filters, hidden,
                           "ranger."),
            rng, dtype, sync_period=config["PATROL_RANGER_SYNC"], **common)

    def __repr__(self):
        return "PatrolModel({0!r})".format(self.grid)

    def policy(self, eps=0.):
        return GreedyPatrolPolicy(self.grid, self.drone, self.ranger, eps,
                                  self.density_mode)

    def save(self, directory):
        paths = []
        for kind, pair in ((DRONE, self.drone), (RANGER, self.ranger)):
            path = os.path.join(directory, self.FILES[kind])
            save_checkpoint(path, pair.online, {"kind": kind,
                                                "updates": pair.updates})
            paths.append(path)
        return paths

    def load(self, directory):
        for kind, pair in ((DRONE, self.drone), (RANGER, self.ranger)):
            path = os.path.join(directory, self.FILES[kind])
            params, meta = load_checkpoint(path, pair.online.dtype)
            if params.layout != pair.online.layout:
                raise ValueError(
                    "{0} was trained for another park or network".format(
                        path))
            pair.online.assign(params)
            pair.sync()
            pair.updates = meta.get("updates", 0)
        return self


class PatrolLearner(object):
    """Plays training episodes and feeds the shared replay buffers"""

    def __init__(self, model, game, config, seed):
        self.model = model
        self.game = game
        self.grid = model.grid
        self.steps = 0
        self.eps_schedule = (config["PATROL_EPSILON_START"],
                             config["PATROL_EPSILON_END"],
                             config["PATROL_EPSILON_DECAY"])
        self.warmup = max(config["PATROL_WARMUP"], model.drone.batch_size)
        dtype = model.drone.online.dtype
        obs_shape = (N_CHANNELS,) + self.grid.shape
        self.buffers = {
            DRONE: ReplayBuffer(config["PATROL_DRONE_BUFFER"], obs_shape,
                                N_DRONE_ACTIONS, dtype),
            RANGER: ReplayBuffer(config["PATROL_RANGER_BUFFER"], obs_shape,
                                 N_RANGER_ACTIONS, dtype),
        }
        self.sample_rng = stream(seed, "patrol", "replay")
        self.losses = []
        self._observations = None

    @property
    def epsilon(self):
        start, end, decay = self.eps_schedule
        return epsilon(self.steps, start, end, decay)

    def act(self, state, rng):
        self._observations = observe_team(state, self.grid,
                                          self.model.density_mode,
                                          self.model.drone.online.dtype)
        return select_actions(state, self.grid, self.model.drone,
                              self.model.ranger, self.epsilon, rng,
                              self.model.density_mode, self._observations)

    def observe(self, state, actions, next_state, outcome):
        obs = self._observations
        next_obs = observe_team(next_state, self.grid,
                                self.model.density_mode,
                                self.model.drone.online.dtype)
        done = self.game.is_terminal(next_state)
        reward = outcome.defender_reward
        for k, kind, cells in ((0, DRONE, next_state.drone_pos),
                               (1, RANGER, next_state.ranger_pos)):
            for idx, cell in enumerate(cells):
                self.buffers[kind].push(obs[k][idx], actions[k][idx], reward,
                                        next_obs[k][idx], done,
                                        legal_mask(self.grid, cell, kind))
        self.steps += 1
        for kind, pair in ((DRONE, self.model.drone),
                           (RANGER, self.model.ranger)):
            buffer = self.buffers[kind]
            if len(buffer) >= self.warmup:
                batch = buffer.sample(pair.batch_size, self.sample_rng)
                self.losses.append(pair.update(batch))


def train_patrol(grid, config, episodes=None, seed=None, model=None):
    """Trains drone and ranger Q networks against the heuristic attacker.

    :returns: ``(model, rows)`` where ``rows`` holds one metrics dict per
              episode

    """
    episodes = config["PATROL_EPISODES"] if episodes is None else episodes
    seed = config["SEED"] if seed is None else seed
    game = PatrolGame(grid, GameConfig.from_config(config))
    model = model or PatrolModel(grid, config)
    learner = PatrolLearner(model, game, config, seed)
    attacker = HeuristicAttacker(grid, config["ATTACKER_UPDATE_CADENCE"],
                                 rank_mode=config["GRID_RANK_MODE"])
    log_every = max(1, config["PATROL_LOG_EVERY"])
    rows = []
    for ep in range(episodes):
        alloc_rng = stream(seed, "patrol", "allocation", ep)
        defender = sample_cells(grid, game.config.n_defenders, alloc_rng)
        attackers = sample_cells(grid, game.config.n_a, alloc_rng)
        learner.losses = []
        episode = play_episode(
            game, defender, attackers, learner, attacker,
            seed=derive_seed(seed, "patrol", "engine", ep),
            policy_rng=stream(seed, "patrol", "policy", ep),
            observer=learner.observe)
        row = {
            "episode": ep,
            "return": episode.defender_return,
            "epsilon": learner.epsilon,
            "buffer_fill": learner.buffers[DRONE].fill,
            "loss": float(np.mean(learner.losses)) if learner.losses else 0.,
        }
        rows.append(row)
        signals.patrol_episode.send(learner, row=row)
        if (ep + 1) % log_every == 0:
            recent = [r["return"] for r in rows[-log_every:]]
            logger.info("Patrol episode %d/%d: mean return %.3f, eps %.3f",
                        ep + 1, episodes, np.mean(recent), row["epsilon"])
    return model, rows


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
