#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""This module contains only the flask application.

The application is never served: it carries the configuration
(``app.config``), the logger every greensec module logs under
(``app.logger``), the signals and the command line group.

"""

#===============================================================================
# IMPORTS
#===============================================================================

import os
import importlib
import logging

import flask

from . import settings
from .signals import greensec_signals


#===============================================================================
# CONSTANTS
#===============================================================================

GREENSEC_PATH = os.path.abspath(os.path.dirname(__file__))

EXTENSIONS_PATH = os.path.join(GREENSEC_PATH, "extensions")

EXTENSIONS = frozenset(
    os.path.splitext(mn)[0]
    for mn in os.listdir(EXTENSIONS_PATH)
    if not mn.startswith("_") and mn.endswith(".py")
)

CONFIG_ENV_VAR = "GREENSEC_CONFIG_MODULE"


#===============================================================================
# APP
#===============================================================================

app = flask.Flask("greensec")
app.config.update(settings.DEFAULTS)
app.signals = greensec_signals
app.loaded_extensions = set()


#===============================================================================
# FUNCTIONS
#===============================================================================

def get_extension(ext):
    if ext not in EXTENSIONS:
        raise settings.ConfigError("EXTENSIONS",
                                   "unknown extension '{0}'".format(ext))
    modname = 'greensec.extensions.{ext}'.format(ext=ext)
    mod = importlib.import_module(modname)
    return mod


def get_extension_requirements(ext):
    """Returns a list of all dependencies of the given extension"""
    return get_extension(ext).REQUIREMENTS


def setup_logging(level):
    """Library loggers (``greensec.*``) propagate to the app logger"""
    app.logger.setLevel(getattr(logging, level))
    return app.logger


def create_app(config_path=None, overrides=None):
    """Loads and validates a configuration into ``app.config`` and
    initializes the enabled extensions.

    :param config_path: configuration file; defaults to the file named by
                        the ``GREENSEC_CONFIG_MODULE`` environment variable,
                        or the defaults when neither is given

    """
    config_path = config_path or os.environ.get(CONFIG_ENV_VAR)
    if config_path:
        config = settings.load_config(config_path, overrides)
    else:
        config = settings.default_config(**(overrides or {}))
    app.config.update(config)
    app.config["CONFIG_PATH"] = config_path
    setup_logging(config["LOG_LEVEL"])
    for ext in config["EXTENSIONS"]:
        if ext in app.loaded_extensions:
            continue
        mod = get_extension(ext)
        mod.init(app)
        app.loaded_extensions.add(ext)
    app.logger.debug("Configuration loaded from %s",
                     config_path or "defaults")
    return app


def current_config():
    """The greensec settings currently installed in ``app.config``"""
    return dict((k, app.config[k]) for k in settings.DEFAULTS)


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
