#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Signals emited from greensec

``run_started``
    sender: the run record; ``config`` keyword.
``patrol_episode``
    sender: the patrol trainer; ``row`` keyword with the episode metrics.
``allocation_iteration``
    sender: the allocation trainer; ``algorithm`` and ``row`` keywords.
``evaluation_episode``
    sender: the evaluation label; ``row`` keyword.
``trace_exported``
    sender: the trace path; ``records`` and ``grid`` keywords.

"""

#===============================================================================
# IMPORTS
#===============================================================================

from blinker import Namespace


#===============================================================================
# SIGNALS
#===============================================================================

greensec_signals = Namespace()

run_started = greensec_signals.signal('run-started')
patrol_episode = greensec_signals.signal('patrol-episode')
allocation_iteration = greensec_signals.signal('allocation-iteration')
evaluation_episode = greensec_signals.signal('evaluation-episode')
trace_exported = greensec_signals.signal('trace-exported')


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
