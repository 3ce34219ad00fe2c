#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Extension that renders every exported trace as PNG frames.

A trace ``trace-combsgpo.jsonl`` gets a sibling directory
``trace-combsgpo-frames/`` with one ``frame-NNNN.png`` per step: the density
map shaded in green, drones as triangles (red when signaling, blue when
notifying), rangers as squares, attackers as crosses and captures circled.

"""


#===============================================================================
# IMPORTs
#===============================================================================

import logging
import os

import matplotlib
matplotlib.use("Agg")
from matplotlib import pyplot as plt

from greensec.engine import ACTIVE, FLEEING, CAPTURE


#===============================================================================
# LOGGER
#===============================================================================

logger = logging.getLogger(__name__)


#===============================================================================
# CONSTANTS
#===============================================================================

COMM_COLORS = {"signal": "red", "notify": "blue", "noop": "black"}

STATUS_COLORS = {ACTIVE: "darkorange", FLEEING: "purple"}


#===============================================================================
# HELPERS
#===============================================================================

def frames_dir(path):
    return os.path.splitext(path)[0] + "-frames"


def render_frame(density, step, path):
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.imshow(density, cmap="Greens", vmin=0., vmax=1.,
              interpolation="nearest")
    for (row, col), comm in zip(step["drones"], step["comms"]):
        ax.scatter(col, row, marker="^", s=80, c=COMM_COLORS[comm])
    for row, col in step["rangers"]:
        ax.scatter(col, row, marker="s", s=80, c="saddlebrown")
    for attacker in step["attackers"]:
        color = STATUS_COLORS.get(attacker["status"])
        if color:
            row, col = attacker["cell"]
            ax.scatter(col, row, marker="x", s=80, c=color)
    for event in step["events"]:
        if event["kind"] == CAPTURE:
            row, col = event["cell"]
            ax.scatter(col, row, marker="o", s=240, facecolors="none",
                       edgecolors="red", linewidths=2)
    ax.set_title("t = {0}  reward = {1:.2f}".format(step["t"],
                                                    step["reward"]))
    ax.set_xticks([])
    ax.set_yticks([])
    fig.savefig(path, dpi=72, bbox_inches="tight")
    plt.close(fig)
    return path


def render_trace(path, records):
    header, steps = records[0], records[1:]
    directory = frames_dir(path)
    if not os.path.isdir(directory):
        os.makedirs(directory)
    frames = []
    for idx, step in enumerate(steps):
        fpath = os.path.join(directory, "frame-{0:04d}.png".format(idx))
        frames.append(render_frame(header["density"], step, fpath))
    logger.info("%d frames written to %s", len(frames), directory)
    return frames


#===============================================================================
# SLOTS
#===============================================================================

def trace_exported(path, **extra):
    render_trace(path, extra["records"])


#===============================================================================
# INITIALIZER
#===============================================================================

REQUIREMENTS = ["matplotlib"]

def init(app):
    app.signals.signal('trace-exported').connect(trace_exported)


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
