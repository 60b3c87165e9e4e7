"""Regularized transport kernel: softmax cell weights and their derivatives.

For dual weights psi at homotopy time t < 1, each source point carries a
softmax distribution over the targets with exponents
(psi_j - t*c_j(x) - offset_j) / (1 - t).  This module evaluates, by
quadrature against the source density,

  grad       -integral of the softmax weights (one entry per target),
  hessian    1/(1-t) * integral of (pi pi^T - diag(pi)),
  dt_grad    the time derivative of grad, whose integrand carries the
             differences (psi_k - c_k - offset_k) - (psi_j - c_j - offset_j)
             divided by (1-t)^2.

All exponentials are shifted by the per-point maximum exponent before
exponentiating; the raw formulas overflow for t close to 1.
"""

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteValueError
from .model import cost_matrix, density_eval


@dataclass(frozen=True)
class DualState:
    """Homotopy time t in [0, 1] paired with the N dual weights."""

    t: float
    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=float)
        object.__setattr__(self, "psi", psi)
        psi.setflags(write=False)
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")
        if not np.all(np.isfinite(psi)):
            raise NonFiniteValueError("dual weights contain non-finite entries")


@dataclass(frozen=True)
class KernelEval:
    """Gradient, Hessian, and mixed time derivative from one quadrature sweep."""

    grad: np.ndarray
    hess: np.ndarray
    dt_grad: np.ndarray


def _check_time(t):
    if not 0.0 <= t < 1.0:
        raise ValueError(f"kernel derivatives require t in [0, 1), got {t}")


class KernelEvaluator:
    """Kernel derivatives for one (problem, grid) pair.

    Precomputes the cost matrix and the density-weighted quadrature weights,
    which dominate the per-call cost otherwise; repeated evaluations (ODE
    stages, Newton iterations) should share one instance.
    """

    def __init__(self, problem, grid):
        self.problem = problem
        self.grid = grid
        self.cost = cost_matrix(grid.nodes, problem.targets.points, problem.cost.exponent)
        self.offsets = np.asarray(problem.offsets, dtype=float)
        self.mu_weights = grid.weights * density_eval(problem.mu, grid.nodes)
        self.n = problem.n

    def node_weights(self, psi, t):
        """(M, N) softmax weights at every quadrature node."""
        _check_time(t)
        psi = np.asarray(psi, dtype=float)
        if not np.all(np.isfinite(psi)):
            raise NonFiniteValueError("dual weights contain non-finite entries")
        expo = (psi[None, :] - self.offsets[None, :] - t * self.cost) / (1.0 - t)
        expo -= expo.max(axis=1, keepdims=True)
        pi = np.exp(expo)
        pi /= pi.sum(axis=1, keepdims=True)
        return pi

    def value(self, psi, t):
        """Dual transport value -(1-t) * integral of log-sum-exp.

        Only used as the independent reference for derivative checks; the
        solver itself never needs it.
        """
        _check_time(t)
        psi = np.asarray(psi, dtype=float)
        expo = (psi[None, :] - self.offsets[None, :] - t * self.cost) / (1.0 - t)
        m = expo.max(axis=1)
        lse = m + np.log(np.exp(expo - m[:, None]).sum(axis=1))
        return -(1.0 - t) * float(np.sum(self.mu_weights * lse))

    def grad(self, psi, t):
        pi = self.node_weights(psi, t)
        return -np.sum(self.mu_weights[:, None] * pi, axis=0)

    def hessian(self, psi, t):
        pi = self.node_weights(psi, t)
        piw = self.mu_weights[:, None] * pi
        return (piw.T @ pi - np.diag(piw.sum(axis=0))) / (1.0 - t)

    def dt_grad(self, psi, t):
        pi = self.node_weights(psi, t)
        psi = np.asarray(psi, dtype=float)
        depth = psi[None, :] - self.offsets[None, :] - self.cost
        mean_depth = (pi * depth).sum(axis=1, keepdims=True)
        piw = self.mu_weights[:, None] * pi
        return np.sum(piw * (mean_depth - depth), axis=0) / (1.0 - t) ** 2

    def evaluate(self, psi, t):
        """All three derivative blocks from a single softmax sweep."""
        pi = self.node_weights(psi, t)
        psi = np.asarray(psi, dtype=float)
        piw = self.mu_weights[:, None] * pi
        col = piw.sum(axis=0)
        grad = -col
        hess = (piw.T @ pi - np.diag(col)) / (1.0 - t)
        depth = psi[None, :] - self.offsets[None, :] - self.cost
        mean_depth = (pi * depth).sum(axis=1, keepdims=True)
        dt_grad = np.sum(piw * (mean_depth - depth), axis=0) / (1.0 - t) ** 2
        return KernelEval(grad=grad, hess=hess, dt_grad=dt_grad)


def softmax_weights(psi, t, x, problem):
    """Softmax weights over the targets at a single source point x."""
    _check_time(t)
    psi = np.asarray(psi, dtype=float)
    costs = cost_matrix(x, problem.targets.points, problem.cost.exponent)[0]
    expo = (psi - problem.offsets - t * costs) / (1.0 - t)
    expo -= expo.max()
    pi = np.exp(expo)
    return pi / pi.sum()


def kernel_grad(psi, t, problem, grid):
    return KernelEvaluator(problem, grid).grad(psi, t)


def kernel_hessian(psi, t, problem, grid):
    return KernelEvaluator(problem, grid).hessian(psi, t)


def kernel_dt_grad(psi, t, problem, grid):
    return KernelEvaluator(problem, grid).dt_grad(psi, t)
