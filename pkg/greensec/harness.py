#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Experiments: train the patrol networks, train the allocation policies,
then evaluate them.

Every configuration gets its own run directory, ``RUN_DIR/<hash>``, named
after the first 12 characters of its configuration hash::

    _runs/3f2a9c1d0b7e/
        run.json
        patrol/patrol-drone.ckpt
        patrol/patrol-ranger.ckpt
        allocation/combsgpo/...
        patrol-metrics.csv
        allocation-combsgpo.csv
        evaluation-combsgpo.csv

"""

#===============================================================================
# IMPORTS
#===============================================================================

import datetime
import json
import logging
import os
import time

import numpy as np

import matplotlib
matplotlib.use("Agg")
from matplotlib import pyplot as plt

from . import signals
from .allocation import (AllocationModel, AllocationTrainer, ALGORITHMS,
                         DEFENDER, ATTACKER, RANDOM, COMBSGPO)
from .attacker import HeuristicAttacker
from .engine import (PatrolGame, GameConfig, play_episode, replay_actions,
                     event_record, CAPTURE, ATTACK, ESCAPE,
                     TRACE_SCHEMA_VERSION)
from .gridworld import GridWorld, build_grid
from .patrol import PatrolModel, train_patrol
from .seeding import derive_seed, stream
from .settings import config_hash


#===============================================================================
# LOGGER
#===============================================================================

logger = logging.getLogger(__name__)


#===============================================================================
# CONSTANTS
#===============================================================================

RUN_FILENAME = "run.json"

DEFAULT_LEVELS = ((0., 0.), (0.25, 0.25), (0.75, 0.75))

TIMING_RUNS = 5


#===============================================================================
# ERRORS
#===============================================================================

class MissingCheckpointError(IOError):

    def __init__(self, stage, path):
        self.stage = stage
        self.path = path
        super(MissingCheckpointError, self).__init__(
            "No {0} checkpoint at {1}; run the {0} training first".format(
                stage, path))


class TraceFormatError(ValueError):
    pass


#===============================================================================
# RUN RECORDS
#===============================================================================

def _now():
    return datetime.datetime.utcnow().replace(microsecond=0).isoformat() + "Z"


class RunRecord(object):
    """One stage of a run, stored in ``run.json``"""

    def __init__(self, directory, config, stage):
        self.directory = directory
        self.config = config
        self.config_hash = config_hash(config)
        self.stage = stage
        self.run_id = "{0}-{1}".format(self.config_hash[:12], stage)
        self.started = None
        self.finished = None
        self.metrics = {}
        self.checkpoints = []
        self.results = {}

    def __repr__(self):
        return "RunRecord({0!r})".format(self.run_id)

    def __enter__(self):
        return self.start()

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.finish()
        return False

    @property
    def path(self):
        return os.path.join(self.directory, RUN_FILENAME)

    def start(self):
        if not os.path.isdir(self.directory):
            os.makedirs(self.directory)
        self.started = _now()
        logger.info("Run %s started in %s", self.run_id, self.directory)
        signals.run_started.send(self, config=self.config)
        return self

    def finish(self):
        self.finished = _now()
        self.save()
        logger.info("Run %s finished", self.run_id)
        return self

    def as_dict(self):
        return {"run_id": self.run_id, "stage": self.stage,
                "started": self.started, "finished": self.finished,
                "metrics": dict(self.metrics),
                "checkpoints": list(self.checkpoints),
                "results": dict(self.results)}

    def save(self):
        data = load_run(self.directory) or {"config_hash": self.config_hash,
                                           "stages": {}}
        data["stages"][self.stage] = self.as_dict()
        with open(self.path, "w") as fp:
            json.dump(data, fp, indent=2, sort_keys=True)
        return self.path


def load_run(directory):
    path = os.path.join(directory, RUN_FILENAME)
    if not os.path.exists(path):
        return None
    with open(path) as fp:
        return json.load(fp)


#===============================================================================
# EVALUATION
#===============================================================================

class EvaluationReport(object):

    def __init__(self, label, returns, captures, attacks, escapes):
        self.label = label
        self.returns = list(returns)
        self.captures = captures
        self.attacks = attacks
        self.escapes = escapes

    def __repr__(self):
        return "EvaluationReport({0!r}: {1:.3f} +- {2:.3f})".format(
            self.label, self.mean, self.std)

    @property
    def n_episodes(self):
        return len(self.returns)

    @property
    def mean(self):
        return float(np.mean(self.returns))

    @property
    def std(self):
        if len(self.returns) < 2:
            return 0.
        return float(np.std(self.returns, ddof=1))

    @property
    def stderr(self):
        return self.std / np.sqrt(len(self.returns))

    def as_dict(self):
        return {"label": self.label, "episodes": self.n_episodes,
                "mean": self.mean, "std": self.std,
                "captures": self.captures, "attacks": self.attacks,
                "escapes": self.escapes}


def evaluate(game, patrol_policy, defender_sampler, attacker_sampler,
             n_episodes, seed, label="evaluation", attacker_patrol=None):
    """Plays ``n_episodes`` full games and reports the defender utility.

    :param defender_sampler: ``rng -> defender allocation``
    :param attacker_sampler: ``rng -> attacker allocation``

    """
    if n_episodes < 1:
        raise ValueError("Evaluation needs at least one episode")
    attacker_patrol = attacker_patrol or HeuristicAttacker(game.grid)
    returns, captures, attacks, escapes = [], 0, 0, 0
    for idx in range(n_episodes):
        rng = stream(seed, "eval", "allocation", idx)
        episode = play_episode(
            game, defender_sampler(rng), attacker_sampler(rng),
            patrol_policy, attacker_patrol,
            seed=derive_seed(seed, "eval", "engine", idx),
            policy_rng=stream(seed, "eval", "patrol", idx))
        row = {"episode": idx, "return": episode.defender_return,
               "length": episode.length,
               "captures": episode.count(CAPTURE),
               "attacks": episode.count(ATTACK),
               "escapes": episode.count(ESCAPE)}
        returns.append(row["return"])
        captures += row["captures"]
        attacks += row["attacks"]
        escapes += row["escapes"]
        signals.evaluation_episode.send(label, row=row)
    report = EvaluationReport(label, returns, captures, attacks, escapes)
    logger.info("Evaluation %s over %d episodes: %.3f +- %.3f", label,
                n_episodes, report.mean, report.std)
    return report


class Heatmap(object):

    def __init__(self, counts, samples):
        self.counts = counts
        self.samples = samples

    def __repr__(self):
        return "Heatmap({0} attacks over {1} games)".format(
            self.total, self.samples)

    @property
    def total(self):
        return int(self.counts.sum())

    def to_csv(self, path):
        np.savetxt(path, self.counts, fmt="%d", delimiter=",")
        return path

    def to_png(self, path, title="Attacked cells"):
        fig, ax = plt.subplots(figsize=(5, 5))
        image = ax.imshow(self.counts, cmap="Reds", interpolation="nearest")
        fig.colorbar(image, ax=ax, label="attacks")
        ax.set_title(title)
        ax.set_xticks(range(self.counts.shape[1]))
        ax.set_yticks(range(self.counts.shape[0]))
        fig.savefig(path, dpi=100, bbox_inches="tight")
        plt.close(fig)
        return path


def attack_heatmap(game, patrol_policy, defender_sampler, attacker_sampler,
                   n_samples, seed, attacker_patrol=None):
    """Attack events per cell over ``n_samples`` sampled games"""
    if n_samples < 1:
        raise ValueError("A heatmap needs at least one sample")
    attacker_patrol = attacker_patrol or HeuristicAttacker(game.grid)
    counts = np.zeros(game.grid.shape, dtype=np.int64)
    for idx in range(n_samples):
        rng = stream(seed, "heatmap", "allocation", idx)
        episode = play_episode(
            game, defender_sampler(rng), attacker_sampler(rng),
            patrol_policy, attacker_patrol,
            seed=derive_seed(seed, "heatmap", "engine", idx),
            policy_rng=stream(seed, "heatmap", "patrol", idx))
        for event in episode.events(ATTACK):
            counts[event.cell.row, event.cell.col] += 1
    return Heatmap(counts, n_samples)


#===============================================================================
# TRACES
#===============================================================================

def trace_records(episode):
    return [episode.header_record()] + list(episode.step_records())


def export_trace(episode, path):
    """Writes an episode as JSON lines: one header then one line per step"""
    records = trace_records(episode)
    with open(path, "w") as fp:
        for record in records:
            fp.write(json.dumps(record, sort_keys=True))
            fp.write("\n")
    signals.trace_exported.send(path, records=records,
                                grid=episode.game.grid)
    return path


def read_trace(path):
    with open(path) as fp:
        records = [json.loads(line) for line in fp if line.strip()]
    if not records or records[0].get("kind") != "header":
        raise TraceFormatError("{0} has no trace header".format(path))
    if records[0]["schema"] != TRACE_SCHEMA_VERSION:
        raise TraceFormatError("Unsupported trace schema {0}".format(
            records[0]["schema"]))
    return records[0], records[1:]


class TraceCheck(object):

    def __init__(self, steps, mismatches):
        self.steps = steps
        self.mismatches = mismatches

    def __repr__(self):
        return "TraceCheck({0} steps, {1} mismatches)".format(
            self.steps, len(self.mismatches))

    @property
    def ok(self):
        return not self.mismatches


def replay_trace(path):
    """Re-plays the recorded actions with the recorded engine seed and
    compares every step reward and event"""
    header, steps = read_trace(path)
    grid = GridWorld(header["density"])
    game = PatrolGame(grid, GameConfig(**header["config"]))
    actions = [(s["drone_actions"], s["ranger_actions"],
                s["attacker_actions"]) for s in steps]
    outcomes = replay_actions(game, header["defender"], header["attacker"],
                              actions, header["seed"])
    mismatches = []
    for step, outcome in zip(steps, outcomes):
        events = [event_record(e) for e in outcome.events]
        if outcome.defender_reward != step["reward"] or \
           events != step["events"]:
            mismatches.append(step["t"])
    return TraceCheck(len(steps), mismatches)


#===============================================================================
# EXPERIMENT
#===============================================================================

class Experiment(object):
    """Trains, stores and evaluates everything a configuration needs"""

    def __init__(self, config, grid=None, directory=None):
        self.config = config
        self.grid = grid or build_grid(config)
        self.hash = config_hash(config)
        self.directory = directory or os.path.join(config["RUN_DIR"],
                                                   self.hash[:12])
        self.game = PatrolGame(self.grid, GameConfig.from_config(config))
        self._embeddings = None

    def __repr__(self):
        return "Experiment({0!r})".format(self.directory)

    @property
    def patrol_dir(self):
        return os.path.join(self.directory, "patrol")

    def allocation_dir(self, algorithm):
        return os.path.join(self.directory, "allocation", algorithm)

    def record(self, stage):
        return RunRecord(self.directory, self.config, stage)

    def attacker_patrol(self):
        return HeuristicAttacker(self.grid,
                                 self.config["ATTACKER_UPDATE_CADENCE"],
                                 rank_mode=self.config["GRID_RANK_MODE"])

    # patrol

    def train_patrol(self, episodes=None):
        with self.record("train-patrol") as record:
            model, rows = train_patrol(self.grid, self.config, episodes)
            if not os.path.isdir(self.patrol_dir):
                os.makedirs(self.patrol_dir)
            record.checkpoints = model.save(self.patrol_dir)
            if rows:
                tail = rows[-min(100, len(rows)):]
                record.results["final_mean_return"] = float(
                    np.mean([r["return"] for r in tail]))
        return model

    def load_patrol(self):
        model = PatrolModel(self.grid, self.config)
        for name in PatrolModel.FILES.values():
            path = os.path.join(self.patrol_dir, name)
            if not os.path.exists(path):
                raise MissingCheckpointError("patrol", path)
        return model.load(self.patrol_dir)

    def patrol_policy(self, model=None):
        model = model or self.load_patrol()
        return model.policy(self.config["PATROL_ALLOCATION_EPSILON"])

    # allocation

    def allocation_model(self, config=None):
        config = config or self.config
        if self._embeddings is None:
            model = AllocationModel(self.grid, config)
            self._embeddings = ([model.datasets[DEFENDER],
                                 model.datasets[ATTACKER]],
                                model.autoencoders)
            return model
        datasets, autoencoders = self._embeddings
        return AllocationModel(self.grid, config, datasets, autoencoders)

    def train_allocation(self, algorithm=None, patrol_model=None,
                         iterations=None):
        algorithm = algorithm or self.config["ALLOC_ALGORITHM"]
        if algorithm not in ALGORITHMS:
            raise ValueError("Unknown algorithm '{0}'".format(algorithm))
        iterations = self.config["ALLOC_ITERATIONS"] \
            if iterations is None else iterations
        policy = self.patrol_policy(patrol_model)
        with self.record("train-alloc-" + algorithm) as record:
            model = self.allocation_model()
            trainer = AllocationTrainer(model, policy, algorithm)
            trainer.train(iterations)
            directory = self.allocation_dir(algorithm)
            if not os.path.isdir(directory):
                os.makedirs(directory)
            record.checkpoints = model.save(directory)
            record.results["converged_at"] = trainer.converged_at
            record.results["simulations"] = trainer.simulations
        return model, trainer

    def load_allocation(self, algorithm):
        directory = self.allocation_dir(algorithm)
        for files in AllocationModel.files(directory).values():
            for path in files.values():
                if not os.path.exists(path):
                    raise MissingCheckpointError("allocation", path)
        return AllocationModel.load(self.grid, self.config, directory)

    def samplers(self, model, algorithm):
        if algorithm == RANDOM:
            defender = lambda rng: model.uniform(DEFENDER, rng)
        else:
            defender = lambda rng: model.sample(DEFENDER, rng)[0]
        attacker = lambda rng: model.sample(ATTACKER, rng)[0]
        return defender, attacker

    # evaluation

    def evaluate(self, algorithm, n_episodes=None, seed=None,
                 patrol_model=None, allocation_model=None):
        if n_episodes is None:
            n_episodes = self.config["EVAL_EPISODES"]
        seed = derive_seed(self.config["SEED"], "evaluate") \
            if seed is None else seed
        policy = self.patrol_policy(patrol_model)
        model = allocation_model or self.load_allocation(algorithm)
        defender, attacker = self.samplers(model, algorithm)
        with self.record("evaluate-" + algorithm) as record:
            report = evaluate(self.game, policy, defender, attacker,
                              n_episodes, seed, algorithm,
                              self.attacker_patrol())
            record.results.update(report.as_dict())
        return report

    def heatmap(self, algorithm, n_samples=None, seed=None,
                patrol_model=None, allocation_model=None):
        if n_samples is None:
            n_samples = self.config["EVAL_HEATMAP_SAMPLES"]
        seed = derive_seed(self.config["SEED"], "heatmap") \
            if seed is None else seed
        policy = self.patrol_policy(patrol_model)
        model = allocation_model or self.load_allocation(algorithm)
        defender, attacker = self.samplers(model, algorithm)
        with self.record("heatmap-" + algorithm) as record:
            heatmap = attack_heatmap(self.game, policy, defender, attacker,
                                     n_samples, seed, self.attacker_patrol())
            stem = os.path.join(self.directory, "heatmap-" + algorithm)
            record.metrics["heatmap_csv"] = heatmap.to_csv(stem + ".csv")
            record.metrics["heatmap_png"] = heatmap.to_png(
                stem + ".png", "Attacked cells ({0})".format(algorithm))
            record.results["attacks"] = heatmap.total
        return heatmap

    def trace(self, algorithm, path=None, seed=None, patrol_model=None,
              allocation_model=None):
        """Exports one sampled episode"""
        seed = derive_seed(self.config["SEED"], "trace") \
            if seed is None else seed
        policy = self.patrol_policy(patrol_model)
        model = allocation_model or self.load_allocation(algorithm)
        defender, attacker = self.samplers(model, algorithm)
        rng = stream(seed, "trace", "allocation")
        attacker_patrol = self.attacker_patrol()
        episode = play_episode(self.game, defender(rng), attacker(rng),
                               policy, attacker_patrol,
                               seed=derive_seed(seed, "trace", "engine"),
                               policy_rng=stream(seed, "trace", "patrol"))
        path = path or os.path.join(self.directory,
                                    "trace-{0}.jsonl".format(algorithm))
        with self.record("trace-" + algorithm) as record:
            record.metrics["trace"] = export_trace(episode, path)
            record.results["length"] = episode.length
            record.results["return"] = episode.defender_return
        return episode, path


#===============================================================================
# SWEEPS AND TIMING
#===============================================================================

def uncertainty_sweep(config, levels=DEFAULT_LEVELS, algorithm=COMBSGPO,
                      n_episodes=None):
    """Trains and evaluates a defender for every ``(beta, kappa)`` level"""
    rows = []
    for beta, kappa in levels:
        level_config = dict(config, GAME_BETA=float(beta),
                            GAME_KAPPA=float(kappa))
        experiment = Experiment(level_config)
        patrol_model = experiment.train_patrol()
        model, _ = experiment.train_allocation(algorithm, patrol_model)
        report = experiment.evaluate(algorithm, n_episodes,
                                     patrol_model=patrol_model,
                                     allocation_model=model)
        rows.append({"beta": float(beta), "kappa": float(kappa),
                     "mean": report.mean, "std": report.std,
                     "stderr": report.stderr,
                     "captures": report.captures,
                     "attacks": report.attacks})
        logger.info("Sweep level beta=%.2f kappa=%.2f: %.3f +- %.3f",
                    beta, kappa, report.mean, report.std)
    return rows


def timing_report(config, algorithms=None, runs=TIMING_RUNS,
                  patrol_model=None):
    """Wall-clock seconds each allocation algorithm needs to reach its
    plateau, over ``runs`` seeds, on a single worker"""
    algorithms = algorithms or config["EVAL_TIMING_ALGORITHMS"]
    experiment = Experiment(config)
    patrol_model = patrol_model or experiment.load_patrol()
    policy = experiment.patrol_policy(patrol_model)
    rows = []
    for algorithm in algorithms:
        seconds, converged = [], 0
        for run in range(runs):
            run_seed = derive_seed(config["SEED"], "timing", run) % (2 ** 31)
            run_config = dict(config, SEED=run_seed)
            model = experiment.allocation_model(run_config)
            trainer = AllocationTrainer(model, policy, algorithm,
                                        seed=run_seed)
            start = time.perf_counter()
            trainer.train(config["ALLOC_ITERATIONS"], stop_on_plateau=True)
            seconds.append(time.perf_counter() - start)
            converged += trainer.converged_at is not None
        rows.append({"algorithm": algorithm,
                     "mean_seconds": float(np.mean(seconds)),
                     "std_seconds": float(np.std(seconds)),
                     "runs": runs, "converged": converged})
        logger.info("%s: %.2fs +- %.2fs (%d/%d converged)", algorithm,
                    rows[-1]["mean_seconds"], rows[-1]["std_seconds"],
                    converged, runs)
    return rows


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
