#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

import numpy as np
import pytest

from greensec.seeding import derive_seed, stream


def test_derive_seed_is_stable():
    assert derive_seed(7, "patrol", 3) == derive_seed(7, "patrol", 3)
    assert 0 <= derive_seed(7, "patrol", 3) < 2 ** 64


def test_keys_select_independent_streams():
    seeds = set([derive_seed(7), derive_seed(8), derive_seed(7, "a"),
                 derive_seed(7, "b"), derive_seed(7, "a", 0),
                 derive_seed(7, "a", 1)])
    assert len(seeds) == 6


def test_stream_draws_repeat():
    np.testing.assert_array_equal(stream(1, "x").random(5),
                                  stream(1, "x").random(5))


def test_negative_keys_are_rejected():
    with pytest.raises(ValueError):
        derive_seed(0, -1)
