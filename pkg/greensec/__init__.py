#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Greensec is a two-stage green security game toolkit.

At a glance, Greensec has:

- A gridworld park with random or feature-driven animal densities
- A patrol simulator with drones, rangers and attackers, uncertain detection
  and uncertain signal observation
- A heuristic attacker that learns where to strike across episodes
- Multi-agent Double DQN patrolling for drones and rangers
- Allocation policies over learned embeddings, trained with competitive
  policy optimization, plus policy-gradient and fictitious-play baselines
- An experiment harness: evaluation, attack heatmaps, uncertainty sweeps,
  timing and replayable episode traces

"""

PRJ = "Greensec"

VERSION = ("0", "3", "dev")

STR_VERSION = ".".join(VERSION)

DESCRIPTION = __doc__

SHORT_DESCRIPTION = DESCRIPTION.splitlines()[0].strip()

AUTHOR = "The Greensec developers"

LICENSE = "BSD"

KEYWORDS = "security games reinforcement learning patrolling conservation"

CLASSIFIERS = (
    "Topic :: Scientific/Engineering :: Artificial Intelligence",
    "License :: OSI Approved :: BSD License",
    "Programming Language :: Python :: 3",
)


#===============================================================================
# FUNCTIONS
#===============================================================================

def get_manager():
    """Returns the greensec command line manager."""
    from . import climanager
    return climanager.manager


def run():
    """Runs the greensec command line."""
    manager = get_manager()
    manager(prog_name="greensec")


def get_app(load_config=False):
    """Returns greensec application

    :param load_config: if True try to load the config named by the
                        ``GREENSEC_CONFIG_MODULE`` environment variable

    """
    from . import core
    if load_config:
        return core.create_app()
    return core.app


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
