#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""The allocation stage.

Both players pick where their agents start. The space of allocations is
combinatorial, so each side learns an embedding of allocations with an
autoencoder and its policy outputs a Gaussian over embeddings; a sampled
embedding maps back to the closest allocation of a fixed dataset.

Policies are trained from simulated patrols with frozen patrol networks:

``combsgpo``
    competitive policy optimization of both players
``pg``
    independent policy gradient for both players
``optgradfp``
    policy gradient against allocations drawn from the opponent history
``random``
    defender allocations drawn uniformly from the dataset, the attacker
    learns with policy gradient

Dataset files look like::

    # greensec allocation dataset 1
    # role=defender width=8 height=8 drones=2 rangers=1 count=3 seed=7
        12    40     3
    ...

one fixed-width row of row-major cell indices per allocation.

"""

#===============================================================================
# IMPORTS
#===============================================================================

import logging
import os

import numpy as np

from . import signals
from .attacker import HeuristicAttacker
from .competitive import (CGConfig, ConjugateGradientError,
                          estimate_copo_terms, competitive_step,
                          simultaneous_step)
from .engine import GameConfig, PatrolGame, play_episode
from .gridworld import Cell
from .nn import (Network, Layout, ParamVector, Dense, Tanh, Sigmoid,
                 AdamState, adam_step, mse, float_dtype, save_checkpoint,
                 load_checkpoint)
from .seeding import derive_seed, stream


#===============================================================================
# LOGGER
#===============================================================================

logger = logging.getLogger(__name__)


#===============================================================================
# CONSTANTS
#===============================================================================

DEFENDER, ATTACKER = "defender", "attacker"

ROLES = (DEFENDER, ATTACKER)

DATASET_VERSION = 1

FIELD_WIDTH = 6

MATCH_COSINE = "cosine"
MATCH_SQUARED = "squared"
MATCHINGS = (MATCH_COSINE, MATCH_SQUARED)

COMBSGPO, PG, OPTGRADFP, RANDOM = "combsgpo", "pg", "optgradfp", "random"
ALGORITHMS = (COMBSGPO, PG, OPTGRADFP, RANDOM)

CURVE_FIELDS = ("iteration", "mean_return", "g_d_norm", "g_a_norm",
                "cg_residual")


#===============================================================================
# ERRORS
#===============================================================================

class ZeroQueryError(ValueError):

    def __init__(self):
        super(ZeroQueryError, self).__init__(
            "Cosine matching is undefined for a zero embedding")


class DatasetFormatError(ValueError):
    pass


#===============================================================================
# ALLOCATIONS
#===============================================================================

class Allocation(object):
    """Cells of one side. Defender allocations list drones first."""

    def __init__(self, role, cells, drones=0):
        if role not in ROLES:
            raise ValueError("Unknown role '{0}'".format(role))
        self.role = role
        self.cells = [Cell(int(r), int(c)) for r, c in cells]
        self.drones = int(drones) if role == DEFENDER else 0

    def __repr__(self):
        return "Allocation({0!r}, {1})".format(self.role, self.cells)

    def __eq__(self, other):
        return isinstance(other, Allocation) and \
            (self.role, self.cells, self.drones) == \
            (other.role, other.cells, other.drones)

    def __ne__(self, other):
        return not self == other

    __hash__ = None

    def __len__(self):
        return len(self.cells)

    @property
    def drone_cells(self):
        return self.cells[:self.drones]

    @property
    def ranger_cells(self):
        return self.cells[self.drones:]


def vector_size(grid, role):
    return (2 if role == DEFENDER else 1) * grid.n_cells


def allocation_to_vector(allocation, grid):
    """Occupancy counts, drones then rangers for the defender"""
    vector = np.zeros(vector_size(grid, allocation.role), dtype=np.float64)
    for idx, cell in enumerate(allocation.cells):
        offset = grid.n_cells if idx >= allocation.drones and \
            allocation.role == DEFENDER else 0
        vector[offset + grid.index(cell)] += 1.
    return vector


class AllocationDataset(object):
    """A fixed table of allocations stored as cell indices"""

    def __init__(self, role, width, height, indices, drones=0, seed=None):
        self.role = role
        self.width = int(width)
        self.height = int(height)
        self.indices = np.asarray(indices, dtype=np.int64)
        if self.indices.ndim != 2:
            raise DatasetFormatError("Dataset indices must be 2-D")
        self.drones = int(drones) if role == DEFENDER else 0
        self.seed = seed

    def __repr__(self):
        return "AllocationDataset({0!r}, {1} x {2} cells)".format(
            self.role, len(self), self.indices.shape[1])

    def __len__(self):
        return self.indices.shape[0]

    def __getitem__(self, idx):
        cells = [divmod(int(i), self.width) for i in self.indices[idx]]
        return Allocation(self.role, cells, self.drones)

    @property
    def agents(self):
        return self.indices.shape[1]

    def vectors(self):
        """Occupancy vectors of every allocation"""
        n_cells = self.width * self.height
        size = 2 * n_cells if self.role == DEFENDER else n_cells
        vectors = np.zeros((len(self), size), dtype=np.float64)
        columns = self.indices.copy()
        if self.role == DEFENDER:
            columns[:, self.drones:] += n_cells
        rows = np.repeat(np.arange(len(self)), self.agents)
        np.add.at(vectors, (rows, columns.ravel()), 1.)
        return vectors

    def save(self, path):
        rangers = self.agents - self.drones if self.role == DEFENDER else 0
        header = ("greensec allocation dataset {0}\n"
                  "role={1} width={2} height={3} drones={4} rangers={5} "
                  "count={6} seed={7}").format(
                      DATASET_VERSION, self.role, self.width, self.height,
                      self.drones, rangers, len(self), self.seed)
        np.savetxt(path, self.indices, fmt="%{0}d".format(FIELD_WIDTH),
                   delimiter="", header=header)

    @classmethod
    def load(cls, path):
        with open(path) as fp:
            title = fp.readline().lstrip("# ").split()
            fields = dict(item.split("=", 1) for item in
                          fp.readline().lstrip("# ").split())
            rows = [line.rstrip("\n") for line in fp if line.strip()]
        if title[:3] != ["greensec", "allocation", "dataset"] or \
           int(title[3]) != DATASET_VERSION:
            raise DatasetFormatError("{0} is not an allocation dataset".format(
                path))
        agents = int(fields["drones"]) + int(fields["rangers"]) \
            if fields["role"] == DEFENDER else None
        indices = [[int(row[i:i + FIELD_WIDTH])
                    for i in range(0, len(row), FIELD_WIDTH)] for row in rows]
        indices = np.array(indices, dtype=np.int64).reshape(
            int(fields["count"]), -1)
        if agents is not None and indices.shape[1] != agents:
            raise DatasetFormatError("Row width does not match the header")
        seed = None if fields["seed"] == "None" else int(fields["seed"])
        return cls(fields["role"], fields["width"], fields["height"],
                   indices, int(fields["drones"]), seed)


def build_allocation_dataset(grid, role, agents, count, seed, drones=0):
    """``count`` allocations of ``agents`` cells drawn uniformly with
    replacement"""
    if count < 1:
        raise ValueError("A dataset needs at least one allocation")
    rng = np.random.default_rng(seed)
    indices = rng.integers(0, grid.n_cells, size=(count, agents))
    return AllocationDataset(role, grid.width, grid.height, indices, drones,
                             seed)


def datasets_from_config(grid, config):
    game = GameConfig.from_config(config)
    size, seed = config["ALLOC_DATASET_SIZE"], config["SEED"]
    defender = build_allocation_dataset(
        grid, DEFENDER, game.n_defenders, size,
        derive_seed(seed, "dataset", DEFENDER), drones=game.n_d)
    attacker = build_allocation_dataset(
        grid, ATTACKER, game.n_a, size, derive_seed(seed, "dataset", ATTACKER))
    return defender, attacker


#===============================================================================
# AUTOENCODER
#===============================================================================

class AutoEncoder(object):
    """dense -> tanh encoder to ``k`` units, dense decoder back"""

    def __init__(self, input_dim, k, rng=None, dtype=np.float64):
        self.input_dim = int(input_dim)
        self.k = int(k)
        self.encoder = Network([Dense(k), Tanh()], (input_dim,), "enc.")
        self.decoder = Network([Dense(input_dim)], (k,), "dec.")
        layout = Layout.concat(self.encoder.layout, self.decoder.layout)
        self.params = ParamVector(layout, None, dtype)
        if rng is not None:
            self.encoder.init_into(self.params, rng)
            self.decoder.init_into(self.params, rng)

    def __repr__(self):
        return "AutoEncoder({0} -> {1})".format(self.input_dim, self.k)

    def identity_init(self, scale=1e-2):
        """Near-identity maps for ``k == input_dim``"""
        if self.k != self.input_dim:
            raise ValueError("Identity init needs k == input_dim")
        eye = np.eye(self.k)
        self.params.data[:] = 0.
        self.params.view("enc.0.W")[...] = scale * eye
        self.params.view("dec.0.W")[...] = eye / scale
        self.params.version += 1
        return self

    def encode(self, vectors):
        return self.encoder.predict(self.params, np.atleast_2d(vectors))

    def reconstruct(self, vectors):
        return self.decoder.predict(self.params, self.encode(vectors))

    def loss(self, vectors):
        return mse(self.reconstruct(vectors), vectors)[0]

    def train_batch(self, batch, adam):
        code, enc_cache = self.encoder.forward(self.params, batch)
        out, dec_cache = self.decoder.forward(self.params, code)
        loss, dout = mse(out, batch)
        grad, dcode = self.decoder.backward(self.params, dec_cache, dout,
                                            input_grad=True)
        self.encoder.backward(self.params, enc_cache, dcode, grad)
        adam_step(self.params, grad, adam)
        return loss


def train_autoencoder(vectors, k, epochs, rng, batch_size=256, lr=1e-3,
                      holdout=0.1, autoencoder=None):
    """Fits an autoencoder on occupancy vectors.

    :returns: ``(autoencoder, report)``; the report holds the train and
              held-out losses before and after training

    """
    vectors = np.asarray(vectors, dtype=np.float64)
    if len(vectors) == 0:
        raise ValueError("Cannot train an autoencoder on an empty dataset")
    order = rng.permutation(len(vectors))
    n_hold = int(len(vectors) * holdout) if len(vectors) > 1 else 0
    held, train = vectors[order[:n_hold]], vectors[order[n_hold:]]
    ae = autoencoder or AutoEncoder(vectors.shape[1], k, rng)
    adam = AdamState.for_params(ae.params, lr)
    report = {"train_start": ae.loss(train),
              "holdout_start": ae.loss(held) if n_hold else None,
              "epochs": []}
    for epoch in range(epochs):
        perm = rng.permutation(len(train))
        losses = [ae.train_batch(train[perm[i:i + batch_size]], adam)
                  for i in range(0, len(train), batch_size)]
        report["epochs"].append(float(np.mean(losses)))
        logger.debug("Autoencoder epoch %d: %.6f", epoch, report["epochs"][-1])
    report["train_end"] = ae.loss(train)
    report["holdout_end"] = ae.loss(held) if n_hold else None
    return ae, report


#===============================================================================
# MATCHING
#===============================================================================

class EmbeddingIndex(object):
    """Maps an embedding back to the closest dataset allocation"""

    def __init__(self, dataset, embeddings, matching=MATCH_COSINE):
        if matching not in MATCHINGS:
            raise ValueError("Unknown matching '{0}'".format(matching))
        self.dataset = dataset
        self.embeddings = np.asarray(embeddings, dtype=np.float64)
        self.matching = matching
        norms = np.linalg.norm(self.embeddings, axis=1, keepdims=True)
        self._unit = np.divide(self.embeddings, norms,
                               out=np.zeros_like(self.embeddings),
                               where=norms > 0)

    def __repr__(self):
        return "EmbeddingIndex({0} entries, {1})".format(
            len(self.embeddings), self.matching)

    @classmethod
    def build(cls, dataset, autoencoder, matching=MATCH_COSINE):
        return cls(dataset, autoencoder.encode(dataset.vectors()), matching)

    def nearest_index(self, query):
        """Best match; ties go to the lowest dataset index"""
        query = np.asarray(query, dtype=np.float64).ravel()
        if self.matching == MATCH_COSINE:
            norm = np.linalg.norm(query)
            if norm == 0:
                raise ZeroQueryError()
            return int(np.argmax(self._unit.dot(query / norm)))
        diff = self.embeddings - query
        return int(np.argmin(np.einsum("ij,ij->i", diff, diff)))

    def nearest(self, query):
        return self.dataset[self.nearest_index(query)]


def nearest_allocation(embedding, dataset, autoencoder,
                       matching=MATCH_COSINE):
    return EmbeddingIndex.build(dataset, autoencoder,
                                matching).nearest(embedding)


#===============================================================================
# POLICIES
#===============================================================================

class GaussianAllocationPolicy(object):
    """Actor-critic over allocation embeddings.

    The actor has a tanh trunk, a tanh mean head and a sigmoid head scaled by
    ``std_scale`` for the standard deviations. The critic is a separate tanh
    network with a scalar output.

    """

    def __init__(self, state_dim, k, hidden, rng=None, std_scale=0.5,
                 critic_lr=1e-2, dtype=np.float64):
        self.state_dim = int(state_dim)
        self.k = int(k)
        self.hidden = int(hidden)
        self.std_scale = float(std_scale)
        self.trunk = Network([Dense(hidden), Tanh()], (state_dim,), "trunk.")
        self.mean_head = Network([Dense(k), Tanh()], (hidden,), "mean.")
        self.std_head = Network([Dense(k), Sigmoid()], (hidden,), "std.")
        self.critic_net = Network([Dense(hidden), Tanh(), Dense(1)],
                                  (state_dim,), "critic.")
        layout = Layout.concat(self.trunk.layout, self.mean_head.layout,
                               self.std_head.layout)
        self.actor = ParamVector(layout, None, dtype)
        self.critic = ParamVector(self.critic_net.layout, None, dtype)
        if rng is not None:
            for net in (self.trunk, self.mean_head, self.std_head):
                net.init_into(self.actor, rng)
            self.critic_net.init_into(self.critic, rng)
        self.critic_adam = AdamState.for_params(self.critic, critic_lr)

    def __repr__(self):
        return "GaussianAllocationPolicy(k={0}, hidden={1})".format(
            self.k, self.hidden)

    def _forward(self, state):
        state = np.asarray(state, dtype=self.actor.dtype).reshape(1, -1)
        h, c_trunk = self.trunk.forward(self.actor, state)
        mean, c_mean = self.mean_head.forward(self.actor, h)
        sig, c_std = self.std_head.forward(self.actor, h)
        return mean[0], self.std_scale * sig[0], (c_trunk, c_mean, c_std)

    def distribution(self, state):
        """``(mean, std)`` of the embedding distribution"""
        mean, std, _ = self._forward(state)
        return mean, std

    def log_density(self, state, embedding):
        mean, std = self.distribution(state)
        z = (np.asarray(embedding) - mean) / std
        return float(np.sum(-0.5 * z * z - np.log(std) -
                            0.5 * np.log(2. * np.pi)))

    def score(self, state, embedding):
        """Gradient of ``log pi(embedding | state)`` w.r.t. the actor"""
        mean, std, (c_trunk, c_mean, c_std) = self._forward(state)
        z = (np.asarray(embedding) - mean) / std
        grad, dh_mean = self.mean_head.backward(
            self.actor, c_mean, (z / std)[None], input_grad=True)
        grad, dh_std = self.std_head.backward(
            self.actor, c_std, (self.std_scale * (z * z - 1.) / std)[None],
            grad, input_grad=True)
        self.trunk.backward(self.actor, c_trunk, dh_mean + dh_std, grad)
        return grad.data

    def sample_embedding(self, state, rng):
        """Returns ``(embedding, score)``"""
        mean, std = self.distribution(state)
        embedding = mean + std * rng.standard_normal(self.k)
        return embedding, self.score(state, embedding)

    def value(self, state):
        state = np.asarray(state, dtype=self.critic.dtype).reshape(1, -1)
        return float(self.critic_net.predict(self.critic, state)[0, 0])

    def update_critic(self, state, returns):
        """One Adam step on the squared error to ``returns``"""
        returns = np.asarray(returns, dtype=self.critic.dtype).reshape(-1, 1)
        states = np.repeat(np.asarray(state, dtype=self.critic.dtype)
                           .reshape(1, -1), len(returns), axis=0)
        pred, cache = self.critic_net.forward(self.critic, states)
        loss, dpred = mse(pred, returns)
        grad = self.critic_net.backward(self.critic, cache, dpred)
        adam_step(self.critic, grad, self.critic_adam)
        return loss

    def save(self, path):
        layout = Layout.concat(self.actor.layout, self.critic.layout)
        save_checkpoint(path, ParamVector(
            layout, np.concatenate([self.actor.data, self.critic.data])),
            {"k": self.k, "hidden": self.hidden})

    def load(self, path):
        params, _ = load_checkpoint(path, self.actor.dtype)
        expected = Layout.concat(self.actor.layout, self.critic.layout)
        if params.layout != expected:
            raise ValueError("{0} holds another policy shape".format(path))
        self.actor.assign(params.data[:len(self.actor)])
        self.critic.assign(params.data[len(self.actor):])
        return self


#===============================================================================
# UPDATES
#===============================================================================

def copo_update(policy_d, policy_a, terms, alpha, cg_config=None):
    """Applies the competitive step to both actors; returns the residual"""
    delta_d, delta_a, residual = competitive_step(terms, alpha, cg_config)
    policy_d.actor.add_(delta_d)
    policy_a.actor.add_(delta_a)
    return residual


def pg_update(policy, state, scores, returns, lr):
    """Score-function ascent on ``returns`` with the critic as baseline,
    then one critic step. Returns the actor gradient."""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    returns = np.asarray(returns, dtype=np.float64).ravel()
    if returns.size == 0:
        raise ValueError("pg_update needs at least one sample")
    advantages = returns - policy.value(state)
    grad = scores.T.dot(advantages) / returns.size
    policy.actor.add_(grad, lr)
    policy.update_critic(state, returns)
    return grad


class FictitiousMemory(object):
    """Past allocations of one player, drawn uniformly"""

    def __init__(self):
        self.allocations = []

    def __len__(self):
        return len(self.allocations)

    def extend(self, allocations):
        self.allocations.extend(allocations)

    def draw(self, rng):
        return self.allocations[int(rng.integers(len(self.allocations)))]


def optgradfp_update(policy_d, policy_a, state, samples_d, samples_a, lr):
    """Policy gradient for both players on rollouts played against the
    opponents' history.

    :param samples_d: ``(scores, returns)`` of defender samples
    :param samples_a: ``(scores, returns)`` of attacker samples

    """
    grad_d = pg_update(policy_d, state, samples_d[0], samples_d[1], lr)
    grad_a = pg_update(policy_a, state, samples_a[0], samples_a[1], lr)
    return grad_d, grad_a


def plateau_reached(returns, window=50, tolerance=0.01):
    """The moving average of the last ``window`` returns moved less than
    ``tolerance`` (relative) from the previous window"""
    if len(returns) < 2 * window:
        return False
    last = np.mean(returns[-window:])
    previous = np.mean(returns[-2 * window:-window])
    scale = max(abs(previous), 1e-12)
    return abs(last - previous) / scale < tolerance


#===============================================================================
# MODEL
#===============================================================================

class AllocationModel(object):
    """Datasets, autoencoders, matching indices and policies of both sides"""

    def __init__(self, grid, config, datasets=None, autoencoders=None):
        self.grid = grid
        self.config = config
        self.state = grid.density.ravel().copy()
        self.game = GameConfig.from_config(config)
        self.dtype = float_dtype(config["FLOAT_BITS"])
        seed = config["SEED"]
        self.datasets = dict(zip(ROLES, datasets or
                                 datasets_from_config(grid, config)))
        self.autoencoders = dict(autoencoders or {})
        self.reports = {}
        for role in ROLES:
            if role not in self.autoencoders:
                ae, report = train_autoencoder(
                    self.datasets[role].vectors(), self.embedding_size(role),
                    config["ALLOC_AE_EPOCHS"],
                    stream(seed, "autoencoder", role),
                    config["ALLOC_AE_BATCH"], config["ALLOC_AE_LR"])
                self.autoencoders[role] = ae
                self.reports[role] = report
                logger.info("%s autoencoder: loss %.4g -> %.4g", role,
                            report["train_start"], report["train_end"])
        self.indices = dict(
            (role, EmbeddingIndex.build(self.datasets[role],
                                        self.autoencoders[role],
                                        config["ALLOC_MATCHING"]))
            for role in ROLES)
        self.policies = {}
        for role in ROLES:
            self.policies[role] = GaussianAllocationPolicy(
                self.state.size, self.embedding_size(role),
                config["ALLOC_HIDDEN_" + role.upper()],
                stream(seed, "policy", role), config["ALLOC_STD_SCALE"],
                config["ALLOC_CRITIC_LR"], self.dtype)

    def __repr__(self):
        return "AllocationModel({0!r})".format(self.grid)

    def embedding_size(self, role):
        return self.config["ALLOC_EMBED_" + role.upper()]

    @property
    def defender(self):
        return self.policies[DEFENDER]

    @property
    def attacker(self):
        return self.policies[ATTACKER]

    def sample(self, role, rng):
        """Returns ``(allocation, score)`` sampled from a policy"""
        embedding, score = self.policies[role].sample_embedding(self.state,
                                                                rng)
        return self.indices[role].nearest(embedding), score

    def uniform(self, role, rng):
        dataset = self.datasets[role]
        return dataset[int(rng.integers(len(dataset)))]

    @staticmethod
    def files(directory):
        names = {}
        for role in ROLES:
            names[role] = {
                "dataset": os.path.join(directory,
                                        "{0}-dataset.txt".format(role)),
                "autoencoder": os.path.join(directory,
                                            "{0}-ae.ckpt".format(role)),
                "policy": os.path.join(directory,
                                       "{0}-policy.ckpt".format(role)),
            }
        return names

    def save(self, directory):
        paths = []
        for role, files in self.files(directory).items():
            self.datasets[role].save(files["dataset"])
            save_checkpoint(files["autoencoder"], self.autoencoders[role].params,
                            {"role": role})
            self.policies[role].save(files["policy"])
            paths.extend(files.values())
        return paths

    @classmethod
    def load(cls, grid, config, directory):
        files = cls.files(directory)
        datasets, autoencoders = [], {}
        for role in ROLES:
            dataset = AllocationDataset.load(files[role]["dataset"])
            datasets.append(dataset)
            params, _ = load_checkpoint(files[role]["autoencoder"])
            ae = AutoEncoder(vector_size(grid, role),
                             config["ALLOC_EMBED_" + role.upper()])
            if params.layout != ae.params.layout:
                raise ValueError("{0} does not match the configuration".format(
                    files[role]["autoencoder"]))
            ae.params.assign(params)
            autoencoders[role] = ae
        model = cls(grid, config, datasets, autoencoders)
        for role in ROLES:
            model.policies[role].load(files[role]["policy"])
        return model


#===============================================================================
# TRAINER
#===============================================================================

class AllocationTrainer(object):
    """Trains allocation policies against simulated patrols.

    :param model: an ``AllocationModel``
    :param patrol_policy: frozen defender patrol policy
    :param algorithm: one of ``combsgpo``, ``pg``, ``optgradfp``, ``random``

    """

    def __init__(self, model, patrol_policy, algorithm=COMBSGPO, seed=None):
        if algorithm not in ALGORITHMS:
            raise ValueError("Unknown algorithm '{0}'".format(algorithm))
        config = model.config
        self.model = model
        self.algorithm = algorithm
        self.patrol_policy = patrol_policy
        self.game = PatrolGame(model.grid, model.game)
        self.attacker_patrol = HeuristicAttacker(
            model.grid, config["ATTACKER_UPDATE_CADENCE"],
            rank_mode=config["GRID_RANK_MODE"])
        self.seed = config["SEED"] if seed is None else seed
        self.n_samples = config["ALLOC_SAMPLES"]
        self.lr = config["ALLOC_LR"]
        self.cg_config = CGConfig(config["ALLOC_CG_MAXITER"],
                                  config["ALLOC_CG_TOL"])
        self.window = config["ALLOC_PLATEAU_WINDOW"]
        self.tolerance = config["ALLOC_PLATEAU_TOL"]
        self.memories = {DEFENDER: FictitiousMemory(),
                         ATTACKER: FictitiousMemory()}
        self.curve = []
        self.converged_at = None
        self.simulations = 0

    def __repr__(self):
        return "AllocationTrainer({0!r}, {1} iterations)".format(
            self.algorithm, len(self.curve))

    def simulate(self, defender, attacker, iteration, idx):
        episode = play_episode(
            self.game, defender, attacker, self.patrol_policy,
            self.attacker_patrol,
            seed=derive_seed(self.seed, "alloc", "engine", iteration, idx),
            policy_rng=stream(self.seed, "alloc", "patrol", iteration, idx))
        self.simulations += 1
        return episode.defender_return

    def _joint_samples(self, iteration, rng):
        scores_d, scores_a, returns = [], [], []
        allocs_d, allocs_a = [], []
        for idx in range(self.n_samples):
            if self.algorithm == RANDOM:
                alloc_d, score_d = self.model.uniform(DEFENDER, rng), None
            else:
                alloc_d, score_d = self.model.sample(DEFENDER, rng)
            alloc_a, score_a = self.model.sample(ATTACKER, rng)
            returns.append(self.simulate(alloc_d, alloc_a, iteration, idx))
            scores_d.append(score_d)
            scores_a.append(score_a)
            allocs_d.append(alloc_d)
            allocs_a.append(alloc_a)
        return scores_d, scores_a, np.array(returns), allocs_d, allocs_a

    def step(self, iteration):
        """One training iteration; returns its learning-curve row"""
        rng = stream(self.seed, "alloc", "sample", iteration)
        state = self.model.state
        defender, attacker = self.model.defender, self.model.attacker
        g_d_norm = g_a_norm = residual = 0.

        if self.algorithm == OPTGRADFP:
            returns, g_d_norm, g_a_norm = self._fictitious_step(iteration,
                                                                rng)
        else:
            scores_d, scores_a, returns, _, _ = self._joint_samples(
                iteration, rng)
            if self.algorithm == COMBSGPO:
                advantages = returns - defender.value(state)
                terms = estimate_copo_terms(scores_d, scores_a, advantages)
                g_d_norm, g_a_norm = terms.g_d_norm, terms.g_a_norm
                try:
                    residual = copo_update(defender, attacker, terms, self.lr,
                                           self.cg_config)
                except ConjugateGradientError as err:
                    logger.warning("Iteration %d: %s; taking a simultaneous "
                                   "gradient step", iteration, err)
                    residual = err.residual
                    delta_d, delta_a = simultaneous_step(terms, self.lr)
                    defender.actor.add_(delta_d)
                    attacker.actor.add_(delta_a)
                defender.update_critic(state, returns)
                attacker.update_critic(state, -returns)
            elif self.algorithm == PG:
                g_d_norm = np.linalg.norm(
                    pg_update(defender, state, scores_d, returns, self.lr))
                g_a_norm = np.linalg.norm(
                    pg_update(attacker, state, scores_a, -returns, self.lr))
            else:
                g_a_norm = np.linalg.norm(
                    pg_update(attacker, state, scores_a, -returns, self.lr))

        row = {"iteration": iteration,
               "mean_return": float(np.mean(returns)),
               "g_d_norm": float(g_d_norm),
               "g_a_norm": float(g_a_norm),
               "cg_residual": float(residual)}
        self.curve.append(row)
        signals.allocation_iteration.send(self, algorithm=self.algorithm,
                                          row=row)
        return row

    def _fictitious_step(self, iteration, rng):
        state = self.model.state
        fresh, seeded = {}, set()
        for role in ROLES:
            fresh[role] = [self.model.sample(role, rng)
                           for _ in range(self.n_samples)]
            if not self.memories[role]:
                self.memories[role].extend(a for a, _ in fresh[role])
                seeded.add(role)
        returns_d, returns_a = [], []
        for idx, (alloc_d, _) in enumerate(fresh[DEFENDER]):
            opponent = self.memories[ATTACKER].draw(rng)
            returns_d.append(self.simulate(alloc_d, opponent, iteration, idx))
        for idx, (alloc_a, _) in enumerate(fresh[ATTACKER]):
            opponent = self.memories[DEFENDER].draw(rng)
            returns_a.append(-self.simulate(opponent, alloc_a, iteration,
                                            self.n_samples + idx))
        grad_d, grad_a = optgradfp_update(
            self.model.defender, self.model.attacker, state,
            ([s for _, s in fresh[DEFENDER]], returns_d),
            ([s for _, s in fresh[ATTACKER]], returns_a), self.lr)
        for role in ROLES:
            if role not in seeded:
                self.memories[role].extend(a for a, _ in fresh[role])
        return (np.array(returns_d), np.linalg.norm(grad_d),
                np.linalg.norm(grad_a))

    def train(self, iterations, stop_on_plateau=False):
        log_every = max(1, self.model.config["ALLOC_LOG_EVERY"])
        for iteration in range(len(self.curve), len(self.curve) + iterations):
            row = self.step(iteration)
            if (iteration + 1) % log_every == 0:
                logger.info("%s iteration %d: mean defender return %.3f",
                            self.algorithm, iteration + 1,
                            row["mean_return"])
            if self.converged_at is None and plateau_reached(
                    [r["mean_return"] for r in self.curve], self.window,
                    self.tolerance):
                self.converged_at = iteration
                logger.info("%s reached a plateau at iteration %d",
                            self.algorithm, iteration)
                if stop_on_plateau:
                    break
        if self.converged_at is None:
            logger.warning("%s did not reach a plateau in %d iterations",
                           self.algorithm, len(self.curve))
        return self.curve


def combsgpo(grid, config, patrol_policy, iterations=None, model=None):
    """Full allocation training with competitive policy optimization.

    :returns: ``(model, curve)``

    """
    model = model or AllocationModel(grid, config)
    trainer = AllocationTrainer(model, patrol_policy, COMBSGPO)
    curve = trainer.train(config["ALLOC_ITERATIONS"] if iterations is None
                          else iterations)
    return model, curve


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
