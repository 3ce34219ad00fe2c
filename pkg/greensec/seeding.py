#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Seed streams.

Every random component receives its own generator, derived from the master
seed and a path of keys::

    derive_seed(master, "patrol", "episode", 12)

Keys are strings or non-negative integers. Strings are folded with CRC-32 so
the derived seed is the same on every platform and Python version (no use of
``hash()``). The derivation is ``numpy.random.SeedSequence(master,
spawn_key=folded_keys).generate_state(2)`` packed into one 64-bit integer.

"""

#===============================================================================
# IMPORTS
#===============================================================================

import zlib

import numpy as np


#===============================================================================
# FUNCTIONS
#===============================================================================

def _fold(key):
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError("Integer seed keys must be non-negative")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8")) & 0xffffffff


def derive_seed(master, *keys):
    """Returns a 64-bit seed for the stream named by ``keys``"""
    seq = np.random.SeedSequence(int(master),
                                 spawn_key=tuple(_fold(k) for k in keys))
    low, high = seq.generate_state(2, dtype=np.uint32)
    return (int(high) << 32) | int(low)


def stream(master, *keys):
    """A ``numpy.random.Generator`` for the stream named by ``keys``"""
    return np.random.default_rng(derive_seed(master, *keys))


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
