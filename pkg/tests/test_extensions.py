#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

import csv
import os

import numpy as np
import pytest

from greensec import harness, signals
from greensec.allocation import AllocationModel, AllocationTrainer, PG
from greensec.attacker import HeuristicAttacker
from greensec.engine import play_episode
from greensec.extensions import metrics, snapshots
from greensec.patrol import StationaryPatrolPolicy, train_patrol


def read_csv(path):
    with open(path, newline="") as fp:
        return list(csv.DictReader(fp))


@pytest.fixture
def metric_slots(monkeypatch):
    writer = metrics.MetricsWriter()
    monkeypatch.setattr(metrics, "writer", writer)
    pairs = [(signals.run_started, metrics.run_started),
             (signals.patrol_episode, metrics.patrol_episode),
             (signals.allocation_iteration, metrics.allocation_iteration),
             (signals.evaluation_episode, metrics.evaluation_episode)]
    for signal, slot in pairs:
        signal.connect(slot)
    yield writer
    for signal, slot in pairs:
        signal.disconnect(slot)


def test_writer_without_run_is_silent():
    assert metrics.MetricsWriter().write("x.csv", ("a",), {"a": 1}) is None


def test_writer_rewrites_then_appends(tmp_path):
    writer = metrics.MetricsWriter(str(tmp_path))
    writer.write("rows.csv", ("a", "b"), {"a": 1, "b": 2, "c": 3})
    writer.write("rows.csv", ("a", "b"), {"a": 4, "b": 5})
    assert read_csv(str(tmp_path / "rows.csv")) == [
        {"a": "1", "b": "2"}, {"a": "4", "b": "5"}]
    writer.reset(str(tmp_path))
    writer.write("rows.csv", ("a", "b"), {"a": 6, "b": 7})
    assert read_csv(str(tmp_path / "rows.csv")) == [{"a": "6", "b": "7"}]


def test_patrol_metrics(metric_slots, small_config, grid, tmp_path):
    with harness.RunRecord(str(tmp_path), small_config, "train-patrol"):
        _, rows = train_patrol(grid, small_config, episodes=2)
    written = read_csv(str(tmp_path / metrics.PATROL_FILENAME))
    assert [int(r["episode"]) for r in written] == [0, 1]
    assert float(written[1]["return"]) == pytest.approx(rows[1]["return"])


def test_allocation_and_evaluation_metrics(metric_slots, small_config, grid,
                                           tmp_path):
    model = AllocationModel(grid, small_config)
    with harness.RunRecord(str(tmp_path), small_config, "train-alloc-pg"):
        AllocationTrainer(model, StationaryPatrolPolicy(), PG).train(2)
    curve = read_csv(str(tmp_path / "allocation-pg.csv"))
    assert [int(r["iteration"]) for r in curve] == [0, 1]
    assert set(curve[0]) == set(["iteration", "mean_return", "g_d_norm",
                                 "g_a_norm", "cg_residual"])

    game = harness.Experiment(small_config, grid).game
    with harness.RunRecord(str(tmp_path), small_config, "evaluate-pg"):
        harness.evaluate(game, StationaryPatrolPolicy(),
                         lambda rng: model.sample("defender", rng)[0],
                         lambda rng: model.sample("attacker", rng)[0],
                         3, 4, "pg")
    episodes = read_csv(str(tmp_path / "evaluation-pg.csv"))
    assert len(episodes) == 3
    assert set(episodes[0]) == set(metrics.EVALUATION_FIELDS)


def test_snapshots_render_every_step(small_config, grid, tmp_path):
    model = AllocationModel(grid, small_config)
    rng = np.random.default_rng(0)
    game = harness.Experiment(small_config, grid).game
    episode = play_episode(game, model.sample("defender", rng)[0],
                           model.sample("attacker", rng)[0],
                           StationaryPatrolPolicy(), HeuristicAttacker(grid),
                           seed=3)
    path = str(tmp_path / "trace.jsonl")
    with signals.trace_exported.connected_to(snapshots.trace_exported):
        harness.export_trace(episode, path)
    directory = snapshots.frames_dir(path)
    assert directory == str(tmp_path / "trace-frames")
    frames = sorted(os.listdir(directory))
    assert len(frames) == episode.length
    assert frames[0] == "frame-0000.png"
