"""Laguerre (power) cells: geometry, measures, and terminal-residual pieces.

Cell j of weight vector w is the set of source points where
cost(x, y_j) - w_j is minimal over the targets.  Two measure backends:

  analytic   1-D with quadratic cost only: cells are intervals whose
             endpoints solve the pairwise bisector equations in closed form,
             and masses come from closed-form interval integrals.
  grid       any supported dimension/cost: label every quadrature node by its
             minimizing target (ties to the lowest index) and sum the
             density-weighted quadrature weights per label.

The analytic route is exact up to rounding; the grid route carries an
O(node spacing) boundary error, which is why it is never used where the
acceptance tolerances are tighter than that.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .kernel import KernelEvaluator
from .model import cost_matrix, density_eval, interval_mass, uniform_density

MODE_AUTO = "auto"
MODE_ANALYTIC = "analytic"
MODE_GRID = "grid"


@dataclass(frozen=True)
class LaguerreDiagram1D:
    """Interval cells in 1-D: sorted-order permutation, the N-1 cut points
    (clipped to the domain, nondecreasing; equal cuts flag empty cells), and
    the per-target masses in original target order."""

    order: np.ndarray
    boundaries: np.ndarray
    measures: np.ndarray

    def __post_init__(self):
        for name in ("order", "boundaries", "measures"):
            getattr(self, name).setflags(write=False)


@dataclass(frozen=True)
class CellField:
    """Per-node cell labels on a grid, optionally with softmax weights."""

    nodes: np.ndarray
    labels: np.ndarray
    weights: np.ndarray = None

    def __post_init__(self):
        self.labels.setflags(write=False)
        if self.weights is not None:
            self.weights.setflags(write=False)


def _sorted_cells(y, w, lo, hi):
    """Exact interval cells for coordinate-sorted targets y with weights w.

    Cell boundaries solve (x - y_i)^2 - w_i = (x - y_j)^2 - w_j pairwise.
    Returns (cells, cuts): `cells` lists (sorted_index, a, b) for every
    nonempty cell, in increasing position; `cuts` are the N-1 partition
    points.  Non-adjacent domination (a weight large enough to swallow
    neighbors) is handled by the max/min over all pairs, not just neighbors.
    """
    n = y.size
    if n == 1:
        return [(0, lo, hi)], np.empty(0)
    diff = y[None, :] - y[:, None]  # y_j - y_i
    with np.errstate(divide="ignore", invalid="ignore"):
        bnd = 0.5 * (y[:, None] + y[None, :]) + (w[:, None] - w[None, :]) / (2.0 * diff)
    upper = np.triu(np.ones((n, n), dtype=bool), k=1)
    right = np.where(upper, bnd, np.inf).min(axis=1)
    left = np.where(upper.T, bnd.T, -np.inf).max(axis=1)
    starts = np.clip(np.maximum(left, lo), lo, hi)
    ends = np.clip(np.minimum(right, hi), lo, hi)
    cells = [(k, starts[k], ends[k]) for k in range(n) if starts[k] < ends[k]]
    cuts = np.empty(n - 1)
    cur = lo
    ends_by_idx = {k: b for k, _, b in cells}
    for k in range(n - 1):
        cur = ends_by_idx.get(k, cur)
        cuts[k] = cur
    return cells, cuts


def cells_1d(psi, targets, domain, density=None):
    """1-D Laguerre diagram for quadratic cost; masses under `density`
    (uniform on the domain when omitted)."""
    if targets.dim != 1:
        raise ConfigError("cells_1d requires 1-D targets")
    if density is None:
        density = uniform_density(domain)
    psi = np.asarray(psi, dtype=float)
    coords = targets.points[:, 0]
    order = np.argsort(coords)
    y = coords[order]
    if np.any(np.diff(y) <= 0.0):
        raise ConfigError("duplicate target coordinates")
    cells, cuts = _sorted_cells(y, psi[order], domain.lower[0], domain.upper[0])
    measures = np.zeros(targets.n)
    for k, a, b in cells:
        measures[order[k]] = interval_mass(density, a, b)
    return LaguerreDiagram1D(order=order, boundaries=cuts, measures=measures)


def grid_labels(weights, targets, grid, cost_exponent=2.0):
    """Per-node argmin of cost(x, y_j) - weights_j; ties go to the lowest index."""
    costs = cost_matrix(grid.nodes, targets.points, cost_exponent)
    return np.argmin(costs - np.asarray(weights, dtype=float)[None, :], axis=1)


def power_cell_measures(
    weights, targets, domain, density, grid=None, mode=MODE_AUTO, cost_exponent=2.0
):
    """Masses of the power cells of `weights` under `density`."""
    weights = np.asarray(weights, dtype=float)
    if mode == MODE_AUTO:
        mode = (
            MODE_ANALYTIC if targets.dim == 1 and cost_exponent == 2.0 else MODE_GRID
        )
    if mode == MODE_ANALYTIC:
        if targets.dim != 1 or cost_exponent != 2.0:
            raise ConfigError("analytic cell measures need 1-D quadratic cost")
        return cells_1d(weights, targets, domain, density).measures
    if grid is None:
        raise ConfigError("grid-label cell measures need a quadrature grid")
    labels = grid_labels(weights, targets, grid, cost_exponent)
    node_mass = grid.weights * density_eval(density, grid.nodes)
    return np.bincount(labels, weights=node_mass, minlength=targets.n)


def cell_measures(psi, problem, grid, mode=MODE_AUTO):
    """Source-density masses of the problem's cells at dual weights psi.

    The anchored variant's offsets shift the effective weights, matching the
    argmin convention cost_j(x) - psi_j - offset_j used everywhere.
    """
    return power_cell_measures(
        np.asarray(psi, dtype=float) - problem.offsets,
        problem.targets,
        problem.domain,
        problem.mu,
        grid=grid,
        mode=mode,
        cost_exponent=problem.cost.exponent,
    )


def _grid_spacing(grid):
    counts = grid.panels_per_axis * grid.order
    return max((hi - lo) / counts for lo, hi in zip(grid.lower, grid.upper))


def measure_jacobian(
    weights, targets, domain, density, grid=None, mode=MODE_AUTO, fd_step=1e-5
):
    """Jacobian of weights -> cell masses (quadratic cost).

    Analytic in 1-D: each interface point between consecutive nonempty cells
    i, j contributes density(x_ij) / (2|y_i - y_j|) on the diagonal and its
    negative off-diagonal.  On a grid, central differences; the step is
    widened so cell boundaries move by at least one node spacing, because
    grid-label masses are piecewise constant below that scale.
    """
    weights = np.asarray(weights, dtype=float)
    n = targets.n
    if mode == MODE_AUTO:
        mode = MODE_ANALYTIC if targets.dim == 1 else MODE_GRID
    if mode == MODE_ANALYTIC:
        coords = targets.points[:, 0]
        order = np.argsort(coords)
        y = coords[order]
        cells, _ = _sorted_cells(y, weights[order], domain.lower[0], domain.upper[0])
        jac = np.zeros((n, n))
        lo, hi = domain.lower[0], domain.upper[0]
        for (ka, _, end_a), (kb, _, _) in zip(cells[:-1], cells[1:]):
            cut = end_a
            if not lo < cut < hi:
                continue
            i, j = order[ka], order[kb]
            gain = density_eval(density, np.array([cut])) / (2.0 * abs(y[kb] - y[ka]))
            jac[i, i] += gain
            jac[j, j] += gain
            jac[i, j] -= gain
            jac[j, i] -= gain
        return jac
    if grid is None:
        raise ConfigError("grid-mode measure Jacobian needs a quadrature grid")
    pts = targets.points
    gaps = np.sqrt(((pts[:, None, :] - pts[None, :, :]) ** 2).sum(-1))
    step = max(fd_step, 2.0 * _grid_spacing(grid) * float(gaps.max()))
    jac = np.zeros((n, n))
    for k in range(n):
        bump = np.zeros(n)
        bump[k] = step
        plus = power_cell_measures(
            weights + bump, targets, domain, density, grid=grid, mode=MODE_GRID
        )
        minus = power_cell_measures(
            weights - bump, targets, domain, density, grid=grid, mode=MODE_GRID
        )
        jac[:, k] = (plus - minus) / (2.0 * step)
    return 0.5 * (jac + jac.T)


def smoothed_cell_field(psi, t, problem, grid):
    """Softmax cell weights on the grid for t < 1, plus hard argmin labels."""
    if t >= 1.0:
        raise ValueError("smoothed cells are only defined for t < 1")
    psi = np.asarray(psi, dtype=float)
    weights = KernelEvaluator(problem, grid).node_weights(psi, t)
    labels = grid_labels(psi - problem.offsets, problem.targets, grid, problem.cost.exponent)
    return CellField(nodes=grid.nodes, labels=labels, weights=weights)


def label_field(psi, problem, grid):
    """Hard cell labels at t = 1 (no softmax weights)."""
    labels = grid_labels(
        np.asarray(psi, dtype=float) - problem.offsets,
        problem.targets,
        grid,
        problem.cost.exponent,
    )
    return CellField(nodes=grid.nodes, labels=labels, weights=None)


def unregularized_residual(problem, psi, grid):
    """Residual of the t = 1 optimality system; its sup-norm is the reported
    terminal error.

    The transport term becomes exact cell masses of the source density.  For
    p4 the penalty term is also a cell mass: rho-cells of -psi under the
    quadratic inner cost, against mu-cells of psi under the outer cost.
    """
    psi = np.asarray(psi, dtype=float)
    mu_mass = cell_measures(psi, problem, grid)
    if problem.variant == "p4":
        penalty = power_cell_measures(
            -psi,
            problem.targets,
            problem.domain,
            problem.rho,
            grid=grid,
            cost_exponent=2.0,
        )
    else:
        penalty = np.exp(-psi)
    return penalty - mu_mass


def triple_intersection_check(psi, problem, grid, eps=None):
    """Count grid nodes where three consecutive targets are all within eps of
    the pointwise minimum of cost_j(x) - psi_j - offset_j.

    A zero count certifies (at grid resolution) that consecutive cells meet
    only pairwise, i.e. the cell layout is nested along the target ordering.
    """
    psi = np.asarray(psi, dtype=float)
    n = problem.n
    if n < 3:
        return 0
    costs = cost_matrix(grid.nodes, problem.targets.points, problem.cost.exponent)
    if eps is None:
        eps = 1e-3 * float(costs.max() - costs.min())
    adjusted = costs - (psi - problem.offsets)[None, :]
    gap = adjusted - adjusted.min(axis=1, keepdims=True)
    near = gap <= eps
    triple = near[:, :-2] & near[:, 1:-1] & near[:, 2:]
    return int(np.count_nonzero(triple.any(axis=1)))
