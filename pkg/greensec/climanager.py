#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Command line manager for greensec

::

    $ greensec init-config myrun --profile 10x10 --setting MS
    $ greensec --config myrun/config.py train-patrol
    $ greensec --config myrun/config.py train-alloc --algo combsgpo
    $ greensec --config myrun/config.py evaluate --algo combsgpo

"""

#===============================================================================
# IMPORTS
#===============================================================================

import codecs
import csv
import functools
import os

import click
import jinja2

from flask.cli import FlaskGroup

from . import core, settings
from .allocation import (ALGORITHMS, COMBSGPO, DEFENDER, ATTACKER,
                         AllocationModel, DatasetFormatError, ZeroQueryError,
                         datasets_from_config)
from .attacker import EmptyAllocationError
from .competitive import ConjugateGradientError, EmptyBatchError
from .engine import AllocationError, GameConfigError, TerminalStateError
from .gridworld import GridConfigurationError, InvalidDimensionError
from .harness import (Experiment, MissingCheckpointError, TraceFormatError,
                      replay_trace, timing_report, uncertainty_sweep)
from .nn import CheckpointError, ShapeError
from .patrol import UnknownAgentError


#===============================================================================
# CONSTANTS
#===============================================================================

CONFIG_FILENAME = settings.CONFIG_FILENAME

REQUIREMENTS_FILENAME = "requirements.txt"

REQUIREMENTS_TEMPLATE = jinja2.Template("""
{%- for r in requirements %}
{{r}}
{%- endfor %}
""".strip())

GRID_FILENAME = "density.csv"

SWEEP_FILENAME = "sweep.csv"

TIMING_FILENAME = "timing.csv"

SWEEP_FIELDS = ("beta", "kappa", "mean", "std", "stderr", "captures",
                "attacks")

TIMING_FIELDS = ("algorithm", "mean_seconds", "std_seconds", "runs",
                 "converged")

GREENSEC_ERRORS = (settings.ConfigError, InvalidDimensionError,
                   GridConfigurationError, AllocationError, GameConfigError,
                   TerminalStateError, ShapeError, CheckpointError,
                   ConjugateGradientError, MissingCheckpointError,
                   TraceFormatError, DatasetFormatError, ZeroQueryError,
                   EmptyAllocationError, EmptyBatchError, UnknownAgentError)


#===============================================================================
# MANAGER
#===============================================================================

def _load_app():
    return core.create_app()


def _set_config(ctx, param, value):
    if value:
        os.environ[core.CONFIG_ENV_VAR] = os.path.abspath(value)
    return value


@click.group(cls=FlaskGroup, create_app=_load_app,
             add_default_commands=False, add_version_option=False)
@click.option("--config", type=click.Path(dir_okay=False), expose_value=False,
              is_eager=True, callback=_set_config,
              help="Configuration file (sets GREENSEC_CONFIG_MODULE).")
def manager():
    """Greensec: allocation and patrolling for green security games."""


#===============================================================================
# FUNCTIONS
#===============================================================================

def handle_errors(func):
    """Turns greensec errors into command line messages"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except GREENSEC_ERRORS as err:
            raise click.ClickException(str(err))
    return wrapper


def experiment():
    return Experiment(core.current_config())


def write_rows(path, fields, rows):
    with open(path, "w", newline="") as fp:
        writer = csv.DictWriter(fp, fieldnames=fields)
        writer.writeheader()
        for row in rows:
            writer.writerow(dict((f, row[f]) for f in fields))
    return path


def algorithm_option(default=None):
    return click.option("--algo", "algorithm", default=default,
                        type=click.Choice(ALGORITHMS),
                        help="Allocation algorithm.")


#===============================================================================
# COMMANDS
#===============================================================================

@manager.command("init-config")
@click.argument("dest", type=click.Path(file_okay=False))
@click.option("--profile", default="desk", type=click.Choice(settings.PROFILES),
              help="Park size.")
@click.option("--setting", default="SS",
              type=click.Choice(sorted(settings.SETTINGS)),
              help="Density and number of attackers.")
@click.option("--extension", "extensions", multiple=True,
              type=click.Choice(sorted(core.EXTENSIONS)),
              help="Enable an extension (repeatable).")
@handle_errors
def init_config(dest, profile, setting, extensions):
    """Create a new configuration into a given directory"""
    overrides = settings.profile_config(profile, setting)
    if extensions:
        overrides["EXTENSIONS"] = tuple(extensions)
    config = settings.default_config(**overrides)

    requirements = []
    for ext in config["EXTENSIONS"]:
        requirements.extend(core.get_extension_requirements(ext))

    if not os.path.isdir(dest):
        os.makedirs(dest)
    config_fpath = os.path.join(dest, CONFIG_FILENAME)
    settings.write_config(config_fpath, config, profile, setting)
    requirements_fpath = os.path.join(dest, REQUIREMENTS_FILENAME)
    with codecs.open(requirements_fpath, "w", encoding="utf8") as fp:
        fp.write(REQUIREMENTS_TEMPLATE.render(requirements=requirements))
    click.echo("Your configuration is ready: {0}".format(config_fpath))


@manager.command("gen-grid")
@click.option("--output", type=click.Path(dir_okay=False),
              help="Defaults to the run directory.")
@handle_errors
def gen_grid(output):
    """Export the animal density map as CSV"""
    exp = experiment()
    if output is None:
        if not os.path.isdir(exp.directory):
            os.makedirs(exp.directory)
        output = os.path.join(exp.directory, GRID_FILENAME)
    exp.grid.to_csv(output)
    click.echo(output)


@manager.command("gen-dataset")
@click.option("--output", type=click.Path(file_okay=False),
              help="Defaults to the run directory.")
@handle_errors
def gen_dataset(output):
    """Write the defender and attacker allocation datasets"""
    config = core.current_config()
    exp = Experiment(config)
    output = output or os.path.join(exp.directory, "datasets")
    if not os.path.isdir(output):
        os.makedirs(output)
    defender, attacker = datasets_from_config(exp.grid, config)
    files = AllocationModel.files(output)
    for role, dataset in ((DEFENDER, defender), (ATTACKER, attacker)):
        dataset.save(files[role]["dataset"])
        click.echo(files[role]["dataset"])


@manager.command("train-patrol")
@click.option("--episodes", type=click.IntRange(1), default=None,
              help="Overrides PATROL_EPISODES.")
@handle_errors
def train_patrol(episodes):
    """Train the drone and ranger Q networks"""
    exp = experiment()
    exp.train_patrol(episodes)
    click.echo(exp.patrol_dir)


@manager.command("train-alloc")
@algorithm_option()
@click.option("--iterations", type=click.IntRange(1), default=None,
              help="Overrides ALLOC_ITERATIONS.")
@handle_errors
def train_alloc(algorithm, iterations):
    """Train both allocation policies against the frozen patrol"""
    exp = experiment()
    algorithm = algorithm or exp.config["ALLOC_ALGORITHM"]
    _, trainer = exp.train_allocation(algorithm, iterations=iterations)
    if trainer.converged_at is not None:
        click.echo("Plateau reached at iteration {0}".format(
            trainer.converged_at))
    click.echo(exp.allocation_dir(algorithm))


@manager.command("evaluate")
@algorithm_option(COMBSGPO)
@click.option("--episodes", type=click.IntRange(1), default=None,
              help="Overrides EVAL_EPISODES.")
@click.option("--seed", type=click.IntRange(0), default=None)
@handle_errors
def evaluate(algorithm, episodes, seed):
    """Average defender utility over sampled episodes"""
    report = experiment().evaluate(algorithm, episodes, seed)
    click.echo("{0}: {1:.3f} +- {2:.3f} ({3} episodes)".format(
        algorithm, report.mean, report.std, report.n_episodes))


@manager.command("heatmap")
@algorithm_option(COMBSGPO)
@click.option("--samples", type=click.IntRange(1), default=None,
              help="Overrides EVAL_HEATMAP_SAMPLES.")
@click.option("--seed", type=click.IntRange(0), default=None)
@handle_errors
def heatmap(algorithm, samples, seed):
    """Count attacked cells over sampled attacker allocations"""
    exp = experiment()
    result = exp.heatmap(algorithm, samples, seed)
    click.echo("{0} attacks, written to {1}".format(
        result.total, os.path.join(exp.directory, "heatmap-" + algorithm)))


@manager.command("sweep")
@algorithm_option(COMBSGPO)
@click.option("--episodes", type=click.IntRange(1), default=None)
@handle_errors
def sweep(algorithm, episodes):
    """Train and evaluate for every (beta, kappa) level"""
    config = core.current_config()
    rows = uncertainty_sweep(config, config["EVAL_SWEEP_LEVELS"], algorithm,
                             episodes)
    path = os.path.join(config["RUN_DIR"], SWEEP_FILENAME)
    if not os.path.isdir(config["RUN_DIR"]):
        os.makedirs(config["RUN_DIR"])
    click.echo(write_rows(path, SWEEP_FIELDS, rows))


@manager.command("timing")
@click.option("--runs", type=click.IntRange(1), default=None,
              help="Overrides EVAL_TIMING_RUNS.")
@handle_errors
def timing(runs):
    """Wall-clock time to plateau of each allocation algorithm"""
    config = core.current_config()
    exp = Experiment(config)
    rows = timing_report(config, runs=runs or config["EVAL_TIMING_RUNS"])
    if not os.path.isdir(exp.directory):
        os.makedirs(exp.directory)
    click.echo(write_rows(os.path.join(exp.directory, TIMING_FILENAME),
                          TIMING_FIELDS, rows))


@manager.command("trace")
@algorithm_option(COMBSGPO)
@click.option("--output", type=click.Path(dir_okay=False), default=None)
@click.option("--seed", type=click.IntRange(0), default=None)
@handle_errors
def trace(algorithm, output, seed):
    """Export one sampled episode as JSON lines"""
    episode, path = experiment().trace(algorithm, output, seed)
    click.echo("{0} steps written to {1}".format(episode.length, path))


@manager.command("replay")
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@handle_errors
def replay(path):
    """Re-simulate a trace and compare it step by step"""
    check = replay_trace(path)
    if not check.ok:
        raise click.ClickException(
            "{0} of {1} steps differ (t = {2})".format(
                len(check.mismatches), check.steps,
                ", ".join(map(str, check.mismatches))))
    click.echo("{0} steps replayed identically".format(check.steps))


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
