#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Extension that writes the metrics CSV files of every run.

Files go to the directory of the run that is currently started:

``patrol-metrics.csv``
    one row per patrol training episode
``allocation-<algorithm>.csv``
    the learning curve of an allocation algorithm
``evaluation-<label>.csv``
    the return of every evaluation episode

A file is rewritten by the first row a run sends to it.

"""


#===============================================================================
# IMPORTs
#===============================================================================

import csv
import os

from greensec.allocation import CURVE_FIELDS
from greensec.patrol import METRIC_FIELDS


#===============================================================================
# CONSTANTS
#===============================================================================

PATROL_FILENAME = "patrol-metrics.csv"

EVALUATION_FIELDS = ("episode", "return", "length", "captures", "attacks",
                     "escapes")


#===============================================================================
# HELPERS
#===============================================================================

class MetricsWriter(object):

    def __init__(self, directory=None):
        self.directory = directory
        self.opened = set()

    def __repr__(self):
        return "MetricsWriter({0!r})".format(self.directory)

    def reset(self, directory):
        self.directory = directory
        self.opened = set()

    def write(self, filename, fields, row):
        if self.directory is None:
            return None
        path = os.path.join(self.directory, filename)
        fresh = path not in self.opened
        with open(path, "w" if fresh else "a", newline="") as fp:
            writer = csv.DictWriter(fp, fieldnames=fields,
                                    extrasaction="ignore")
            if fresh:
                writer.writeheader()
            writer.writerow(row)
        self.opened.add(path)
        return path


writer = MetricsWriter()


#===============================================================================
# SLOTS
#===============================================================================

def run_started(record, **extra):
    writer.reset(record.directory)


def patrol_episode(learner, **extra):
    writer.write(PATROL_FILENAME, METRIC_FIELDS, extra["row"])


def allocation_iteration(trainer, **extra):
    filename = "allocation-{0}.csv".format(extra["algorithm"])
    writer.write(filename, CURVE_FIELDS, extra["row"])


def evaluation_episode(label, **extra):
    filename = "evaluation-{0}.csv".format(label)
    writer.write(filename, EVALUATION_FIELDS, extra["row"])


#===============================================================================
# INITIALIZER
#===============================================================================

REQUIREMENTS = []

def init(app):
    app.signals.signal('run-started').connect(run_started)
    app.signals.signal('patrol-episode').connect(patrol_episode)
    app.signals.signal('allocation-iteration').connect(allocation_iteration)
    app.signals.signal('evaluation-episode').connect(evaluation_episode)
    app.metrics = writer


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
