#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD


#===============================================================================
# DOCS
#===============================================================================

"""This file is for distribute greensec with setuptools

"""


#===============================================================================
# IMPORTS
#===============================================================================

import os

from setuptools import setup, find_packages

import greensec


#===============================================================================
# CONSTANTS
#===============================================================================

PATH = os.path.abspath(os.path.dirname(__file__))

REQUIREMENTS_PATH = os.path.join(PATH, "requirements.txt")

with open(REQUIREMENTS_PATH) as fp:
    REQUIREMENTS = [line for line in fp.read().splitlines()
                    if line and not line.startswith("#")]


#===============================================================================
# FUNCTIONS
#===============================================================================

setup(
    name=greensec.PRJ.lower(),
    version=greensec.STR_VERSION,
    description=greensec.SHORT_DESCRIPTION,
    long_description=greensec.DESCRIPTION,
    author=greensec.AUTHOR,
    license=greensec.LICENSE,
    keywords=greensec.KEYWORDS,
    classifiers=greensec.CLASSIFIERS,
    packages=[pkg for pkg in find_packages() if pkg.startswith("greensec")],
    include_package_data=True,
    entry_points={'console_scripts': ['greensec = greensec:run']},
    install_requires=REQUIREMENTS,
    extras_require={"test": ["pytest>=6"]},
    python_requires=">=3.8",
)
