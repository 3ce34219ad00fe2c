#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Greensec configuration.

A configuration file is a python file of ``UPPER_CASE = value`` lines, loaded
with ``flask.Config.from_pyfile``. Every key has a default here, unknown keys
are errors and every value is checked before anything runs.

Profiles bundle the values of a park size:

``desk``
    8x8 park, 2 drones, 1 ranger, small budgets (the default)
``10x10`` / ``15x15``
    3 drones and 2 rangers with full-size networks and datasets

and settings pick the density and the number of attackers: ``SS`` (spatial,
one attacker), ``SR`` (random, one), ``MS`` (spatial, two), ``MR`` (random,
two).

"""

#===============================================================================
# IMPORTS
#===============================================================================

import codecs
import hashlib
import json
import numbers
import os

import flask
import jinja2


#===============================================================================
# ERRORS
#===============================================================================

class ConfigError(ValueError):

    def __init__(self, key, message):
        self.key = key
        super(ConfigError, self).__init__("{0}: {1}".format(key, message))


#===============================================================================
# DEFAULTS
#===============================================================================

DEFAULTS = {
    # park
    "GRID_WIDTH": 8,
    "GRID_HEIGHT": 8,
    "GRID_DENSITY": "spatial",
    "GRID_SEED": 0,
    "GRID_RIVER_CELLS": None,
    "GRID_ROAD_CELLS": None,
    "GRID_RANK_MODE": "distance",

    # game
    "GAME_DRONES": 2,
    "GAME_RANGERS": 1,
    "GAME_ATTACKERS": 1,
    "GAME_MAX_STEPS": 40,
    "GAME_BETA": 0.,
    "GAME_KAPPA": 0.,
    "GAME_R_PLUS": 10.,
    "GAME_R_MINUS_SCALE": 1.,
    "GAME_R_C": 0.1,
    "GAME_R_C_BAR": -0.2,
    "GAME_GAMMA": 0.99,

    # attacker
    "ATTACKER_UPDATE_CADENCE": "episode",

    # patrol
    "PATROL_EPISODES": 600,
    "PATROL_LR": 3e-4,
    "PATROL_BATCH_SIZE": 32,
    "PATROL_DRONE_BUFFER": 20000,
    "PATROL_RANGER_BUFFER": 20000,
    "PATROL_DRONE_SYNC": 20,
    "PATROL_RANGER_SYNC": 50,
    "PATROL_EPSILON_START": 1.0,
    "PATROL_EPSILON_END": 0.05,
    "PATROL_EPSILON_DECAY": 10000,
    "PATROL_WARMUP": 32,
    "PATROL_CONV_FILTERS": (10, 20),
    "PATROL_HIDDEN": (128, 64),
    "PATROL_DENSITY_CHANNEL": "visited",
    "PATROL_ALLOCATION_EPSILON": 0.,
    "PATROL_LOG_EVERY": 50,

    # allocation
    "ALLOC_ALGORITHM": "combsgpo",
    "ALLOC_DATASET_SIZE": 5000,
    "ALLOC_EMBED_DEFENDER": 16,
    "ALLOC_EMBED_ATTACKER": 2,
    "ALLOC_HIDDEN_DEFENDER": 32,
    "ALLOC_HIDDEN_ATTACKER": 32,
    "ALLOC_LR": 1e-2,
    "ALLOC_CRITIC_LR": 1e-2,
    "ALLOC_SAMPLES": 10,
    "ALLOC_ITERATIONS": 300,
    "ALLOC_CG_MAXITER": 10,
    "ALLOC_CG_TOL": 1e-8,
    "ALLOC_STD_SCALE": 0.5,
    "ALLOC_MATCHING": "cosine",
    "ALLOC_AE_EPOCHS": 20,
    "ALLOC_AE_BATCH": 256,
    "ALLOC_AE_LR": 1e-3,
    "ALLOC_PLATEAU_WINDOW": 50,
    "ALLOC_PLATEAU_TOL": 0.01,
    "ALLOC_LOG_EVERY": 25,

    # evaluation
    "EVAL_EPISODES": 150,
    "EVAL_HEATMAP_SAMPLES": 100,
    "EVAL_SWEEP_LEVELS": ((0., 0.), (0.25, 0.25), (0.75, 0.75)),
    "EVAL_TIMING_RUNS": 5,
    "EVAL_TIMING_ALGORITHMS": ("combsgpo", "pg", "optgradfp"),

    # run
    "SEED": 0,
    "FLOAT_BITS": 64,
    "RUN_DIR": "_runs",
    "EXTENSIONS": ("metrics",),
    "LOG_LEVEL": "INFO",
}

# keys that never change results
OPERATIONAL_KEYS = frozenset(["RUN_DIR", "EXTENSIONS", "LOG_LEVEL",
                              "PATROL_LOG_EVERY", "ALLOC_LOG_EVERY"])

PROFILES = ("desk", "10x10", "15x15")

SETTINGS = {
    "SS": ("spatial", 1),
    "SR": ("random", 1),
    "MS": ("spatial", 2),
    "MR": ("random", 2),
}

# (side, attackers) -> (defender k, attacker k)
EMBEDDING_SIZES = {
    (15, 1): (50, 2), (15, 2): (50, 4),
    (10, 1): (30, 2), (10, 2): (30, 4),
}

# (side, attackers) -> (defender hidden, attacker hidden)
HIDDEN_UNITS = {
    (15, 1): (128, 128), (15, 2): (32, 128),
    (10, 1): (64, 32), (10, 2): (32, 32),
}

# (side, attackers) -> coPO step size
COPO_RATES = {
    (15, 1): 4e-5, (15, 2): 3e-5,
    (10, 1): 3e-5, (10, 2): 3e-5,
}


#===============================================================================
# VALIDATION
#===============================================================================

def _integer(low=None):
    def check(value):
        if isinstance(value, bool) or not isinstance(value, numbers.Integral):
            return "must be an integer"
        if low is not None and value < low:
            return "must be >= {0}".format(low)
    return check


def _real(low=None, high=None, strict_low=False):
    def check(value):
        if isinstance(value, bool) or not isinstance(value, numbers.Real):
            return "must be a number"
        if low is not None and (value <= low if strict_low else value < low):
            return "must be {0} {1}".format(">" if strict_low else ">=", low)
        if high is not None and value > high:
            return "must be <= {0}".format(high)
    return check


def _negative(value):
    if isinstance(value, bool) or not isinstance(value, numbers.Real) or \
       value >= 0:
        return "must be a negative number"


def _choice(*options):
    def check(value):
        if value not in options:
            return "must be one of {0}".format(", ".join(map(str, options)))
    return check


def _cells(value):
    if value is None:
        return None
    try:
        for row, col in value:
            if not isinstance(row, numbers.Integral) or \
               not isinstance(col, numbers.Integral):
                return "cells must be (row, col) integer pairs"
    except (TypeError, ValueError):
        return "must be None or a sequence of (row, col) pairs"


def _int_tuple(value):
    if not isinstance(value, (tuple, list)) or not value or \
       any(isinstance(v, bool) or not isinstance(v, numbers.Integral) or
           v < 1 for v in value):
        return "must be a non-empty sequence of positive integers"


def _levels(value):
    try:
        for beta, kappa in value:
            if not (0 <= beta <= 1 and 0 <= kappa <= 1):
                return "levels must lie in [0, 1]"
    except (TypeError, ValueError):
        return "must be a sequence of (beta, kappa) pairs"


def _names(value):
    if not isinstance(value, (tuple, list)) or \
       any(not isinstance(v, str) for v in value):
        return "must be a sequence of names"


VALIDATORS = {
    "GRID_WIDTH": _integer(3),
    "GRID_HEIGHT": _integer(3),
    "GRID_DENSITY": _choice("spatial", "random"),
    "GRID_SEED": _integer(0),
    "GRID_RIVER_CELLS": _cells,
    "GRID_ROAD_CELLS": _cells,
    "GRID_RANK_MODE": _choice("distance", "ordinal"),
    "GAME_DRONES": _integer(0),
    "GAME_RANGERS": _integer(0),
    "GAME_ATTACKERS": _integer(0),
    "GAME_MAX_STEPS": _integer(1),
    "GAME_BETA": _real(0., 1.),
    "GAME_KAPPA": _real(0., 1.),
    "GAME_R_PLUS": _real(0., strict_low=True),
    "GAME_R_MINUS_SCALE": _real(0., strict_low=True),
    "GAME_R_C": _real(),
    "GAME_R_C_BAR": _negative,
    "GAME_GAMMA": _real(0., 1.),
    "ATTACKER_UPDATE_CADENCE": _choice("episode", "timestep"),
    "PATROL_EPISODES": _integer(0),
    "PATROL_LR": _real(0., strict_low=True),
    "PATROL_BATCH_SIZE": _integer(1),
    "PATROL_DRONE_BUFFER": _integer(1),
    "PATROL_RANGER_BUFFER": _integer(1),
    "PATROL_DRONE_SYNC": _integer(1),
    "PATROL_RANGER_SYNC": _integer(1),
    "PATROL_EPSILON_START": _real(0., 1.),
    "PATROL_EPSILON_END": _real(0., 1.),
    "PATROL_EPSILON_DECAY": _integer(1),
    "PATROL_WARMUP": _integer(0),
    "PATROL_CONV_FILTERS": _int_tuple,
    "PATROL_HIDDEN": _int_tuple,
    "PATROL_DENSITY_CHANNEL": _choice("visited", "own"),
    "PATROL_ALLOCATION_EPSILON": _real(0., 1.),
    "PATROL_LOG_EVERY": _integer(1),
    "ALLOC_ALGORITHM": _choice("combsgpo", "pg", "optgradfp", "random"),
    "ALLOC_DATASET_SIZE": _integer(1),
    "ALLOC_EMBED_DEFENDER": _integer(1),
    "ALLOC_EMBED_ATTACKER": _integer(1),
    "ALLOC_HIDDEN_DEFENDER": _integer(1),
    "ALLOC_HIDDEN_ATTACKER": _integer(1),
    "ALLOC_LR": _real(0., strict_low=True),
    "ALLOC_CRITIC_LR": _real(0., strict_low=True),
    "ALLOC_SAMPLES": _integer(1),
    "ALLOC_ITERATIONS": _integer(0),
    "ALLOC_CG_MAXITER": _integer(1),
    "ALLOC_CG_TOL": _real(0., strict_low=True),
    "ALLOC_STD_SCALE": _real(0., strict_low=True),
    "ALLOC_MATCHING": _choice("cosine", "squared"),
    "ALLOC_AE_EPOCHS": _integer(0),
    "ALLOC_AE_BATCH": _integer(1),
    "ALLOC_AE_LR": _real(0., strict_low=True),
    "ALLOC_PLATEAU_WINDOW": _integer(1),
    "ALLOC_PLATEAU_TOL": _real(0., strict_low=True),
    "ALLOC_LOG_EVERY": _integer(1),
    "EVAL_EPISODES": _integer(1),
    "EVAL_HEATMAP_SAMPLES": _integer(1),
    "EVAL_SWEEP_LEVELS": _levels,
    "EVAL_TIMING_RUNS": _integer(1),
    "EVAL_TIMING_ALGORITHMS": _names,
    "SEED": _integer(0),
    "FLOAT_BITS": _choice(32, 64),
    "RUN_DIR": lambda v: None if isinstance(v, str) and v else
    "must be a directory name",
    "EXTENSIONS": _names,
    "LOG_LEVEL": _choice("DEBUG", "INFO", "WARNING", "ERROR"),
}


def validate(config):
    """Checks every key of ``config``; returns it unchanged"""
    for key in config:
        if key.isupper() and key not in DEFAULTS:
            raise ConfigError(key, "unknown setting")
    for key, check in VALIDATORS.items():
        if key not in config:
            raise ConfigError(key, "missing")
        problem = check(config[key])
        if problem:
            raise ConfigError(key, "{0}, got {1!r}".format(problem,
                                                            config[key]))
    return config


def default_config(**overrides):
    config = dict(DEFAULTS)
    config.update(overrides)
    return validate(config)


def load_config(path, overrides=None):
    """Reads a configuration file on top of the defaults"""
    loaded = flask.Config(os.path.dirname(os.path.abspath(path)))
    try:
        loaded.from_pyfile(os.path.abspath(path))
    except IOError as err:
        raise ConfigError("GREENSEC_CONFIG_MODULE",
                          "cannot read {0} ({1})".format(path, err.strerror))
    config = dict(DEFAULTS)
    for key, value in loaded.items():
        if key not in DEFAULTS:
            raise ConfigError(key, "unknown setting in {0}".format(path))
        config[key] = value
    config.update(overrides or {})
    return validate(config)


#===============================================================================
# PROFILES
#===============================================================================

def profile_config(profile="desk", setting="SS"):
    """Overrides for a park size and an experiment setting"""
    if profile not in PROFILES:
        raise ConfigError("profile", "must be one of {0}".format(
            ", ".join(PROFILES)))
    if setting not in SETTINGS:
        raise ConfigError("setting", "must be one of {0}".format(
            ", ".join(sorted(SETTINGS))))
    density, attackers = SETTINGS[setting]
    overrides = {"GRID_DENSITY": density, "GAME_ATTACKERS": attackers}
    if profile == "desk":
        overrides["ALLOC_EMBED_ATTACKER"] = 2 * attackers
        return overrides
    side = int(profile.split("x")[0])
    embed_d, embed_a = EMBEDDING_SIZES[(side, attackers)]
    hidden_d, hidden_a = HIDDEN_UNITS[(side, attackers)]
    overrides.update({
        "GRID_WIDTH": side,
        "GRID_HEIGHT": side,
        "GAME_DRONES": 3,
        "GAME_RANGERS": 2,
        "GAME_MAX_STEPS": 100,
        "PATROL_EPISODES": 5000,
        "PATROL_DRONE_BUFFER": 192000,
        "PATROL_RANGER_BUFFER": 64000,
        "PATROL_EPSILON_DECAY": 25000,
        "ALLOC_DATASET_SIZE": 100000,
        "ALLOC_EMBED_DEFENDER": embed_d,
        "ALLOC_EMBED_ATTACKER": embed_a,
        "ALLOC_HIDDEN_DEFENDER": hidden_d,
        "ALLOC_HIDDEN_ATTACKER": hidden_a,
        "ALLOC_LR": COPO_RATES[(side, attackers)],
        "ALLOC_ITERATIONS": 2000,
        "ALLOC_AE_EPOCHS": 10,
    })
    return overrides


#===============================================================================
# FILES
#===============================================================================

CONFIG_FILENAME = "config.py"

TEMPLATES = jinja2.Environment(keep_trailing_newline=True)

TEMPLATES.filters["py"] = repr

CONFIG_TEMPLATE = TEMPLATES.from_string(u"""# encoding: utf-8
# Greensec configuration ({{ profile }} profile, {{ setting }} setting)

#==============================================================================
# PARK
#==============================================================================

# Side lengths, in cells
GRID_WIDTH = {{ c.GRID_WIDTH|py }}
GRID_HEIGHT = {{ c.GRID_HEIGHT|py }}

# spatial (river, road and boundary) or random
GRID_DENSITY = {{ c.GRID_DENSITY|py }}
GRID_SEED = {{ c.GRID_SEED|py }}

# None places the river on column WIDTH // 3 and the road on row
# 2 * HEIGHT // 3
GRID_RIVER_CELLS = {{ c.GRID_RIVER_CELLS|py }}
GRID_ROAD_CELLS = {{ c.GRID_ROAD_CELLS|py }}

# distance or ordinal
GRID_RANK_MODE = {{ c.GRID_RANK_MODE|py }}

#==============================================================================
# GAME
#==============================================================================

GAME_DRONES = {{ c.GAME_DRONES|py }}
GAME_RANGERS = {{ c.GAME_RANGERS|py }}
GAME_ATTACKERS = {{ c.GAME_ATTACKERS|py }}
GAME_MAX_STEPS = {{ c.GAME_MAX_STEPS|py }}

# Detection and observation uncertainty
GAME_BETA = {{ c.GAME_BETA|py }}
GAME_KAPPA = {{ c.GAME_KAPPA|py }}

# Capture reward, damage scale, justified and unjustified communication
GAME_R_PLUS = {{ c.GAME_R_PLUS|py }}
GAME_R_MINUS_SCALE = {{ c.GAME_R_MINUS_SCALE|py }}
GAME_R_C = {{ c.GAME_R_C|py }}
GAME_R_C_BAR = {{ c.GAME_R_C_BAR|py }}
GAME_GAMMA = {{ c.GAME_GAMMA|py }}

# episode or timestep
ATTACKER_UPDATE_CADENCE = {{ c.ATTACKER_UPDATE_CADENCE|py }}

#==============================================================================
# PATROL
#==============================================================================

PATROL_EPISODES = {{ c.PATROL_EPISODES|py }}
PATROL_LR = {{ c.PATROL_LR|py }}
PATROL_BATCH_SIZE = {{ c.PATROL_BATCH_SIZE|py }}
PATROL_DRONE_BUFFER = {{ c.PATROL_DRONE_BUFFER|py }}
PATROL_RANGER_BUFFER = {{ c.PATROL_RANGER_BUFFER|py }}
PATROL_DRONE_SYNC = {{ c.PATROL_DRONE_SYNC|py }}
PATROL_RANGER_SYNC = {{ c.PATROL_RANGER_SYNC|py }}
PATROL_EPSILON_START = {{ c.PATROL_EPSILON_START|py }}
PATROL_EPSILON_END = {{ c.PATROL_EPSILON_END|py }}
PATROL_EPSILON_DECAY = {{ c.PATROL_EPSILON_DECAY|py }}
PATROL_WARMUP = {{ c.PATROL_WARMUP|py }}
PATROL_CONV_FILTERS = {{ c.PATROL_CONV_FILTERS|py }}
PATROL_HIDDEN = {{ c.PATROL_HIDDEN|py }}

# visited or own
PATROL_DENSITY_CHANNEL = {{ c.PATROL_DENSITY_CHANNEL|py }}

# Exploration kept while the allocation policies train
PATROL_ALLOCATION_EPSILON = {{ c.PATROL_ALLOCATION_EPSILON|py }}
PATROL_LOG_EVERY = {{ c.PATROL_LOG_EVERY|py }}

#==============================================================================
# ALLOCATION
#==============================================================================

# combsgpo, pg, optgradfp or random
ALLOC_ALGORITHM = {{ c.ALLOC_ALGORITHM|py }}
ALLOC_DATASET_SIZE = {{ c.ALLOC_DATASET_SIZE|py }}
ALLOC_EMBED_DEFENDER = {{ c.ALLOC_EMBED_DEFENDER|py }}
ALLOC_EMBED_ATTACKER = {{ c.ALLOC_EMBED_ATTACKER|py }}
ALLOC_HIDDEN_DEFENDER = {{ c.ALLOC_HIDDEN_DEFENDER|py }}
ALLOC_HIDDEN_ATTACKER = {{ c.ALLOC_HIDDEN_ATTACKER|py }}
ALLOC_LR = {{ c.ALLOC_LR|py }}
ALLOC_CRITIC_LR = {{ c.ALLOC_CRITIC_LR|py }}
ALLOC_SAMPLES = {{ c.ALLOC_SAMPLES|py }}
ALLOC_ITERATIONS = {{ c.ALLOC_ITERATIONS|py }}
ALLOC_CG_MAXITER = {{ c.ALLOC_CG_MAXITER|py }}
ALLOC_CG_TOL = {{ c.ALLOC_CG_TOL|py }}
ALLOC_STD_SCALE = {{ c.ALLOC_STD_SCALE|py }}

# cosine or squared
ALLOC_MATCHING = {{ c.ALLOC_MATCHING|py }}
ALLOC_AE_EPOCHS = {{ c.ALLOC_AE_EPOCHS|py }}
ALLOC_AE_BATCH = {{ c.ALLOC_AE_BATCH|py }}
ALLOC_AE_LR = {{ c.ALLOC_AE_LR|py }}
ALLOC_PLATEAU_WINDOW = {{ c.ALLOC_PLATEAU_WINDOW|py }}
ALLOC_PLATEAU_TOL = {{ c.ALLOC_PLATEAU_TOL|py }}
ALLOC_LOG_EVERY = {{ c.ALLOC_LOG_EVERY|py }}

#==============================================================================
# EVALUATION
#==============================================================================

EVAL_EPISODES = {{ c.EVAL_EPISODES|py }}
EVAL_HEATMAP_SAMPLES = {{ c.EVAL_HEATMAP_SAMPLES|py }}
EVAL_SWEEP_LEVELS = {{ c.EVAL_SWEEP_LEVELS|py }}
EVAL_TIMING_RUNS = {{ c.EVAL_TIMING_RUNS|py }}
EVAL_TIMING_ALGORITHMS = {{ c.EVAL_TIMING_ALGORITHMS|py }}

#==============================================================================
# RUN
#==============================================================================

SEED = {{ c.SEED|py }}

# 64 or 32
FLOAT_BITS = {{ c.FLOAT_BITS|py }}

# Every run writes a subdirectory here
RUN_DIR = {{ c.RUN_DIR|py }}

# The extensions are the name of the files inside 'extensions' folder
EXTENSIONS = (
    {%- for ext in c.EXTENSIONS %}
    {{ ext|py }},
    {%- endfor %}
)

LOG_LEVEL = {{ c.LOG_LEVEL|py }}
""")


def render_config(config, profile="custom", setting="-"):
    return CONFIG_TEMPLATE.render(c=config, profile=profile, setting=setting)


def write_config(path, config, profile="custom", setting="-"):
    with codecs.open(path, "w", encoding="utf8") as fp:
        fp.write(render_config(config, profile, setting))
    return path


#===============================================================================
# HASH
#===============================================================================

def _canonical(value):
    if isinstance(value, (tuple, list)):
        return [_canonical(v) for v in value]
    if isinstance(value, numbers.Real) and not isinstance(value, bool):
        return float(value)
    return value


def config_hash(config):
    """SHA-256 of every setting that changes results"""
    payload = dict((k, _canonical(config[k])) for k in sorted(DEFAULTS)
                   if k not in OPERATIONAL_KEYS)
    text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
