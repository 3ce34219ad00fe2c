#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

import pytest

from greensec import settings
from greensec.settings import ConfigError


def test_defaults_are_valid():
    config = settings.default_config()
    assert config == settings.DEFAULTS
    assert config is not settings.DEFAULTS


def test_unknown_key():
    with pytest.raises(ConfigError) as err:
        settings.default_config(GRID_DEPTH=3)
    assert err.value.key == "GRID_DEPTH"


@pytest.mark.parametrize("key, value", [
    ("GRID_WIDTH", 2),
    ("GRID_WIDTH", 8.),
    ("GRID_WIDTH", True),
    ("GAME_BETA", 1.5),
    ("GAME_R_C_BAR", 0.2),
    ("GAME_ATTACKERS", -1),
    ("ALLOC_ALGORITHM", "annealing"),
    ("ALLOC_CG_TOL", 0.),
    ("PATROL_CONV_FILTERS", ()),
    ("GRID_RIVER_CELLS", [(1, "a")]),
    ("EVAL_SWEEP_LEVELS", [(0.5, 2.)]),
    ("FLOAT_BITS", 16),
    ("RUN_DIR", ""),
])
def test_bad_values(key, value):
    with pytest.raises(ConfigError) as err:
        settings.default_config(**{key: value})
    assert err.value.key == key


def test_game_without_attackers_is_valid():
    from greensec.engine import GameConfig, PatrolGame
    from greensec.gridworld import build_grid
    config = settings.default_config(GAME_ATTACKERS=0)
    game = PatrolGame(build_grid(config), GameConfig.from_config(config))
    state = game.init_patrol([(0, 0), (1, 1), (2, 2)], [])
    assert state.attacker_status == []
    assert game.is_terminal(state)


def test_missing_key():
    config = dict(settings.DEFAULTS)
    del config["SEED"]
    with pytest.raises(ConfigError):
        settings.validate(config)


def test_load_config(tmp_path):
    path = tmp_path / "config.py"
    path.write_text("GRID_WIDTH = 6\nGAME_BETA = 0.25\nlowercase = 'ignored'\n")
    config = settings.load_config(str(path), {"SEED": 3})
    assert config["GRID_WIDTH"] == 6
    assert config["GAME_BETA"] == 0.25
    assert config["SEED"] == 3
    assert config["GRID_HEIGHT"] == settings.DEFAULTS["GRID_HEIGHT"]


def test_load_config_unknown_key(tmp_path):
    path = tmp_path / "config.py"
    path.write_text("GRID_DEPTH = 6\n")
    with pytest.raises(ConfigError) as err:
        settings.load_config(str(path))
    assert err.value.key == "GRID_DEPTH"


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        settings.load_config(str(tmp_path / "nowhere.py"))


@pytest.mark.parametrize("profile, setting", [
    ("desk", "SS"), ("10x10", "MR"), ("15x15", "SR"),
])
def test_rendered_config_loads_back(tmp_path, profile, setting):
    config = settings.default_config(
        **settings.profile_config(profile, setting))
    path = settings.write_config(str(tmp_path / "config.py"), config,
                                 profile, setting)
    loaded = settings.load_config(path)
    assert settings.config_hash(loaded) == settings.config_hash(config)
    assert loaded["EXTENSIONS"] == config["EXTENSIONS"]
    with open(path) as fp:
        assert "({0} profile, {1} setting)".format(profile, setting) in \
            fp.readline() + fp.readline()


def test_profiles():
    desk = settings.profile_config("desk", "MS")
    assert desk["GAME_ATTACKERS"] == 2
    assert desk["ALLOC_EMBED_ATTACKER"] == 4
    large = settings.profile_config("15x15", "SS")
    assert (large["GRID_WIDTH"], large["GRID_HEIGHT"]) == (15, 15)
    assert (large["GAME_DRONES"], large["GAME_RANGERS"]) == (3, 2)
    assert (large["ALLOC_EMBED_DEFENDER"],
            large["ALLOC_EMBED_ATTACKER"]) == (50, 2)
    assert large["ALLOC_LR"] == 4e-5
    assert settings.profile_config("10x10", "MR")["GRID_DENSITY"] == "random"


def test_unknown_profile_and_setting():
    with pytest.raises(ConfigError):
        settings.profile_config("20x20")
    with pytest.raises(ConfigError):
        settings.profile_config("desk", "XX")


def test_hash_ignores_operational_keys():
    base = settings.default_config()
    assert settings.config_hash(base) == settings.config_hash(
        settings.default_config(RUN_DIR="elsewhere", LOG_LEVEL="DEBUG",
                                EXTENSIONS=()))
    assert settings.config_hash(base) != settings.config_hash(
        settings.default_config(SEED=1))


def test_hash_is_type_stable():
    assert settings.config_hash(settings.default_config(GAME_BETA=0)) == \
        settings.config_hash(settings.default_config(GAME_BETA=0.))
    assert settings.config_hash(settings.default_config(
        PATROL_HIDDEN=[128, 64])) == settings.config_hash(
            settings.default_config(PATROL_HIDDEN=(128, 64)))
