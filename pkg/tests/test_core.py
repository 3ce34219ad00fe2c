#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

import logging

import pytest

from greensec import core, settings, signals
from greensec.extensions import metrics


def test_extensions_are_discovered():
    assert core.EXTENSIONS == frozenset(["metrics", "snapshots"])
    assert core.get_extension_requirements("snapshots") == ["matplotlib"]
    assert core.get_extension_requirements("metrics") == []


def test_unknown_extension():
    with pytest.raises(settings.ConfigError):
        core.get_extension("tensorboard")


def test_create_app_with_overrides(clean_app):
    app = core.create_app(overrides={"SEED": 7, "EXTENSIONS": (),
                                     "LOG_LEVEL": "WARNING"})
    assert app is core.app
    assert app.config["SEED"] == 7
    assert app.config["CONFIG_PATH"] is None
    assert core.current_config()["SEED"] == 7
    assert set(core.current_config()) == set(settings.DEFAULTS)
    assert app.logger.level == logging.WARNING


def test_create_app_reads_the_environment(clean_app, monkeypatch, tmp_path):
    path = tmp_path / "config.py"
    path.write_text("GRID_WIDTH = 9\nEXTENSIONS = ()\n")
    monkeypatch.setenv(core.CONFIG_ENV_VAR, str(path))
    app = core.create_app()
    assert app.config["GRID_WIDTH"] == 9
    assert app.config["CONFIG_PATH"] == str(path)


def test_extensions_are_initialized_once(clean_app):
    core.create_app(overrides={"EXTENSIONS": ("metrics",)})
    core.create_app(overrides={"EXTENSIONS": ("metrics",)})
    assert clean_app.loaded_extensions == set(["metrics"])
    assert clean_app.metrics is metrics.writer
    receivers = list(signals.patrol_episode.receivers_for(object()))
    assert receivers.count(metrics.patrol_episode) == 1


def test_bad_configuration_is_rejected(clean_app):
    with pytest.raises(settings.ConfigError):
        core.create_app(overrides={"EXTENSIONS": ("tensorboard",)})


def test_library_loggers_reach_the_app_logger():
    app_logger = core.app.logger
    assert logging.getLogger("greensec.engine").parent is app_logger
