#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Packages for containing all extensions

"""

#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
