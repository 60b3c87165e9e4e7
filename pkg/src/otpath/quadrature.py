"""Composite Gauss-Legendre quadrature on a box in 1-D or 2-D.

Every integral against a source density goes through this module.  Grids are
deterministic: the same (domain, panels, order) always produces bit-identical
nodes and weights, and `integrate` reduces with numpy's pairwise summation so
results do not depend on chunking.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NonFiniteValueError

MIN_ORDER = 2
MAX_ORDER = 16


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product composite Gauss-Legendre rule.

    nodes has shape (M, dim) with M = (panels_per_axis * order) ** dim;
    weights are strictly positive and sum to the box volume.
    """

    nodes: np.ndarray
    weights: np.ndarray
    panels_per_axis: int
    order: int
    lower: tuple
    upper: tuple

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.weights.setflags(write=False)

    @property
    def dim(self):
        return len(self.lower)

    @property
    def n_nodes(self):
        return self.nodes.shape[0]


def _axis_rule(lo, hi, panels, order):
    """Nodes/weights of the composite rule on [lo, hi] for one axis."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def build_grid(domain, panels_per_axis, order):
    """Build the composite rule over `domain` (any object with lower/upper).

    panels_per_axis >= 1 and order in [2, 16]; the 2-D rule is the tensor
    product of the per-axis rules.
    """
    if panels_per_axis < 1:
        raise ConfigError(f"panels_per_axis must be >= 1, got {panels_per_axis}")
    if not MIN_ORDER <= order <= MAX_ORDER:
        raise ConfigError(
            f"quadrature order must be in [{MIN_ORDER}, {MAX_ORDER}], got {order}"
        )
    lower = tuple(float(v) for v in domain.lower)
    upper = tuple(float(v) for v in domain.upper)
    axes = [
        _axis_rule(lo, hi, panels_per_axis, order) for lo, hi in zip(lower, upper)
    ]
    if len(axes) == 1:
        nodes = axes[0][0][:, None].copy()
        weights = axes[0][1].copy()
    elif len(axes) == 2:
        (x1, w1), (x2, w2) = axes
        g1, g2 = np.meshgrid(x1, x2, indexing="ij")
        nodes = np.column_stack([g1.ravel(), g2.ravel()])
        weights = (w1[:, None] * w2[None, :]).ravel()
    else:
        raise ConfigError(f"only 1-D and 2-D domains are supported, got dim={len(axes)}")
    return QuadratureGrid(
        nodes=nodes,
        weights=weights,
        panels_per_axis=int(panels_per_axis),
        order=int(order),
        lower=lower,
        upper=upper,
    )


def refine_grid(grid, factor):
    """Same rule with `factor` times as many panels per axis."""
    box = _Box(grid.lower, grid.upper)
    return build_grid(box, grid.panels_per_axis * int(factor), grid.order)


@dataclass(frozen=True)
class _Box:
    lower: tuple
    upper: tuple


def integrate(grid, f):
    """Sum of weights * f(nodes); raises if f is non-finite anywhere.

    `f` receives the full (M, dim) node array and must return (M,) values.
    """
    values = np.asarray(f(grid.nodes), dtype=float)
    if values.shape != (grid.n_nodes,):
        raise ValueError(
            f"integrand returned shape {values.shape}, expected ({grid.n_nodes},)"
        )
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values))[0])
        raise NonFiniteValueError(
            f"integrand is non-finite at node {bad}: x={grid.nodes[bad]}"
        )
    return float(np.sum(grid.weights * values))


def integrate_vector(grid, f, n):
    """Componentwise integral of an (M, n)-valued integrand in one sweep."""
    values = np.asarray(f(grid.nodes), dtype=float)
    if values.shape != (grid.n_nodes, n):
        raise ValueError(
            f"integrand returned shape {values.shape}, expected ({grid.n_nodes}, {n})"
        )
    if not np.all(np.isfinite(values)):
        bad = int(np.flatnonzero(~np.isfinite(values).all(axis=1))[0])
        raise NonFiniteValueError(
            f"vector integrand is non-finite at node {bad}: x={grid.nodes[bad]}"
        )
    return np.sum(grid.weights[:, None] * values, axis=0)
