#!/usr/bin/env python
# -*- coding: utf-8 -*-

# Copyright (c) 2020-2021, The Greensec developers
# This file is part of Greensec
# License: BSD

#===============================================================================
# DOCS
#===============================================================================

"""Competitive policy optimization for two-player zero-sum games.

The defender ascends ``U`` with parameters ``x``; the attacker ascends
``-U`` with parameters ``y``. Each update plays the Nash equilibrium of a
regularized bilinear approximation of the game around the current point::

    dx =  a (I + a^2 D D^T)^-1 (g_x - a D h)
    dy = -a (I + a^2 D^T D)^-1 (h + a D^T g_x)

where ``g_x`` is the gradient of ``U`` w.r.t. ``x``, ``h`` the gradient of
``U`` w.r.t. ``y`` and ``D`` the mixed second derivative. ``D`` is only ever
used through matrix-vector products, and both inverses are applied with
conjugate gradient.

The module also holds small matrix games with softmax policies and exact
derivatives, used to validate the update against plain simultaneous gradient
play and fictitious-play averaging.

"""

#===============================================================================
# IMPORTS
#===============================================================================

import logging

import numpy as np

from scipy.sparse import linalg as splinalg

from .nn import softmax


#===============================================================================
# LOGGER
#===============================================================================

logger = logging.getLogger(__name__)


#===============================================================================
# CONSTANTS
#===============================================================================

MATCHING_PENNIES = ((1., -1.), (-1., 1.))


#===============================================================================
# ERRORS
#===============================================================================

class ConjugateGradientError(ArithmeticError):

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super(ConjugateGradientError, self).__init__(
            "Conjugate gradient stopped after {0} iterations with residual "
            "{1:.3e}".format(iterations, residual))


class EmptyBatchError(ValueError):
    pass


#===============================================================================
# TERMS
#===============================================================================

class CGConfig(object):

    def __init__(self, maxiter=10, tol=1e-8):
        if maxiter < 1 or tol <= 0:
            raise ValueError("CG needs maxiter >= 1 and tol > 0")
        self.maxiter = int(maxiter)
        self.tol = float(tol)

    def __repr__(self):
        return "CGConfig(maxiter={0}, tol={1!r})".format(
            self.maxiter, self.tol)


class CoPOTerms(object):
    """First and mixed second order terms of one competitive update.

    :param g_d: defender ascent direction
    :param g_a: attacker ascent direction (``-dU/dy``)
    :param operator: mixed derivative of ``U`` as a ``LinearOperator`` of
                     shape ``(len(g_d), len(g_a))``

    """

    def __init__(self, g_d, g_a, operator):
        self.g_d = np.asarray(g_d, dtype=np.float64)
        self.g_a = np.asarray(g_a, dtype=np.float64)
        self.operator = splinalg.aslinearoperator(operator)
        if self.operator.shape != (self.g_d.size, self.g_a.size):
            raise ValueError("Mixed operator has shape {0}, expected "
                             "{1}".format(self.operator.shape,
                                          (self.g_d.size, self.g_a.size)))

    def __repr__(self):
        return "CoPOTerms(|g_d|={0:.3e}, |g_a|={1:.3e})".format(
            self.g_d_norm, self.g_a_norm)

    @property
    def g_d_norm(self):
        return float(np.linalg.norm(self.g_d))

    @property
    def g_a_norm(self):
        return float(np.linalg.norm(self.g_a))


def estimate_copo_terms(score_d, score_a, advantages):
    """Score-function estimates from ``n_s`` joint samples.

    :param score_d: ``(n_s, P_d)`` log-density gradients of the defender
    :param score_a: ``(n_s, P_a)`` log-density gradients of the attacker
    :param advantages: ``(n_s,)`` defender advantages

    """
    score_d = np.atleast_2d(np.asarray(score_d, dtype=np.float64))
    score_a = np.atleast_2d(np.asarray(score_a, dtype=np.float64))
    adv = np.asarray(advantages, dtype=np.float64).ravel()
    n = adv.size
    if n == 0:
        raise EmptyBatchError("At least one sample is required")
    if score_d.shape[0] != n or score_a.shape[0] != n:
        raise ValueError("Scores and advantages disagree on the sample count")

    g_d = score_d.T.dot(adv) / n
    g_a = score_a.T.dot(-adv) / n

    def matvec(v):
        return score_d.T.dot(adv * score_a.dot(np.ravel(v))) / n

    def rmatvec(u):
        return score_a.T.dot(adv * score_d.dot(np.ravel(u))) / n

    operator = splinalg.LinearOperator(
        (score_d.shape[1], score_a.shape[1]), matvec=matvec,
        rmatvec=rmatvec, dtype=np.float64)
    return CoPOTerms(g_d, g_a, operator)


#===============================================================================
# UPDATES
#===============================================================================

def solve_regularized(gram_matvec, size, rhs, cg_config):
    """Solves ``(I + gram) x = rhs`` by conjugate gradient.

    :returns: ``(x, residual norm)``

    """
    system = splinalg.LinearOperator(
        (size, size), matvec=lambda v: np.ravel(v) + gram_matvec(np.ravel(v)),
        dtype=np.float64)
    solution, info = splinalg.cg(system, rhs, rtol=0., atol=cg_config.tol,
                                 maxiter=cg_config.maxiter)
    residual = float(np.linalg.norm(system.matvec(solution) - rhs))
    if info != 0 or residual > cg_config.tol:
        raise ConjugateGradientError(residual, cg_config.maxiter)
    return solution, residual


def competitive_step(terms, alpha, cg_config=None):
    """Both players' steps at the equilibrium of the local game.

    :returns: ``(delta_d, delta_a, residual)``

    """
    cg_config = cg_config or CGConfig()
    if alpha <= 0:
        raise ValueError("The step size must be > 0")
    D = terms.operator
    g_d = terms.g_d
    h = -terms.g_a
    a2 = alpha * alpha

    rhs_d = g_d - alpha * D.matvec(h)
    x_d, res_d = solve_regularized(lambda v: a2 * D.matvec(D.rmatvec(v)),
                                   g_d.size, rhs_d, cg_config)
    rhs_a = h + alpha * D.rmatvec(g_d)
    x_a, res_a = solve_regularized(lambda v: a2 * D.rmatvec(D.matvec(v)),
                                   h.size, rhs_a, cg_config)
    return alpha * x_d, -alpha * x_a, max(res_d, res_a)


def simultaneous_step(terms, alpha):
    """Independent gradient steps, the decoupled limit of the update"""
    return alpha * terms.g_d, alpha * terms.g_a


#===============================================================================
# TOY GAMES
#===============================================================================

class ScalarBilinearGame(object):
    """``U(x, y) = x * y`` with scalar parameters"""

    def terms(self, x, y):
        x, y = float(np.ravel(x)[0]), float(np.ravel(y)[0])
        return CoPOTerms([y], [-x], np.ones((1, 1)))


class MatrixGame(object):
    """A zero-sum matrix game where both players mix with softmax over
    logits. The row player (defender) receives ``x^T A y``.

    :param payoff: the payoff matrix ``A``
    :param nash: the equilibrium strategies ``(x*, y*)`` for distances

    """

    def __init__(self, payoff, nash=None):
        self.payoff = np.asarray(payoff, dtype=np.float64)
        m, n = self.payoff.shape
        self.nash = nash or (np.full(m, 1. / m), np.full(n, 1. / n))

    def __repr__(self):
        return "MatrixGame({0}x{1})".format(*self.payoff.shape)

    def strategies(self, theta, phi):
        return softmax(theta), softmax(phi)

    def value(self, theta, phi):
        x, y = self.strategies(theta, phi)
        return float(x.dot(self.payoff).dot(y))

    @staticmethod
    def _jacobian(p):
        return np.diag(p) - np.outer(p, p)

    def terms(self, theta, phi, against=None):
        """Exact terms; ``against`` replaces the opponents' strategies
        ``(x, y)`` in the first order terms"""
        x, y = self.strategies(theta, phi)
        jx, jy = self._jacobian(x), self._jacobian(y)
        ox, oy = against if against is not None else (x, y)
        g_d = jx.dot(self.payoff.dot(oy))
        g_a = -jy.dot(self.payoff.T.dot(ox))
        return CoPOTerms(g_d, g_a, jx.dot(self.payoff).dot(jy))

    def nash_distance(self, x, y):
        nx, ny = self.nash
        return float(np.linalg.norm(np.concatenate([x - nx, y - ny])))


def matching_pennies():
    return MatrixGame(MATCHING_PENNIES)


class ToyRun(object):

    def __init__(self, theta, phi):
        self.theta = theta
        self.phi = phi
        self.distances = []
        self.average_distances = []
        self.residuals = []

    def __repr__(self):
        return "ToyRun({0} iterations)".format(len(self.distances))


def play_toy(game, algorithm, theta, phi, alpha, iterations, cg_config=None):
    """Runs ``copo``, ``pg`` or ``optgradfp`` on a matrix game.

    ``optgradfp`` plays gradient steps against the opponents' historical
    average strategy and tracks the running average of its own strategies.

    """
    theta = np.array(theta, dtype=np.float64)
    phi = np.array(phi, dtype=np.float64)
    run = ToyRun(theta, phi)
    sum_x, sum_y = np.zeros_like(theta), np.zeros_like(phi)
    for it in range(iterations):
        x, y = game.strategies(theta, phi)
        sum_x += x
        sum_y += y
        avg_x, avg_y = sum_x / (it + 1), sum_y / (it + 1)
        if algorithm == "copo":
            delta_d, delta_a, residual = competitive_step(
                game.terms(theta, phi), alpha, cg_config)
            run.residuals.append(residual)
        elif algorithm == "pg":
            delta_d, delta_a = simultaneous_step(game.terms(theta, phi),
                                                 alpha)
        elif algorithm == "optgradfp":
            delta_d, delta_a = simultaneous_step(
                game.terms(theta, phi, against=(avg_x, avg_y)), alpha)
        else:
            raise ValueError("Unknown algorithm '{0}'".format(algorithm))
        theta = theta + delta_d
        phi = phi + delta_a
        x, y = game.strategies(theta, phi)
        run.distances.append(game.nash_distance(x, y))
        run.average_distances.append(game.nash_distance(avg_x, avg_y))
    run.theta, run.phi = theta, phi
    logger.debug("%s on %r: final distance %.3e", algorithm, game,
                 run.distances[-1] if run.distances else float("nan"))
    return run


#===============================================================================
# MAIN
#===============================================================================

if __name__ == "__main__":
    print(__doc__)
