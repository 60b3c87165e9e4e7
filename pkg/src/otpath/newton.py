"""Newton-type solvers: the plain 1-D baseline on the unregularized dual, a
damped fixed-time solver used as an independent oracle for the trajectory,
and the equal-mass weight solve that seeds the Wasserstein-penalty variant.

The baseline is deliberately undamped so its initialization sensitivity is
reproducible; the other two are damped because downstream code relies on
them converging.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, SolverError
from .laguerre import cells_1d, measure_jacobian, power_cell_measures
from .linsolve import solve_dual_system
from .model import Domain
from .residuals import ResidualSystem

MAX_HALVINGS = 30


@dataclass(frozen=True)
class NewtonReport:
    psi: np.ndarray
    iterations: int
    residual_sup: float
    converged: bool


def newton_1d(problem, psi0=None, tol=1e-8, max_iter=100, grid=None):
    """Plain Newton iteration on the unregularized 1-D dual.

    Residual: exp(-psi_j) - mu(cell_j(psi)).  The Jacobian is analytic:
    interface points between adjacent nonempty cells contribute
    mu(x_ij) / (2|y_i - y_j|) off-diagonal, and the diagonal collects
    -exp(-psi_i) minus the row's interface terms.  Stops at sup-norm below
    `tol` or after `max_iter` updates; divergence is reported, not raised.
    `grid` is accepted for signature parity but the closed-form cell masses
    make it unnecessary.
    """
    if problem.dim != 1 or problem.cost.exponent != 2.0:
        raise ConfigError("the Newton baseline needs 1-D targets and quadratic cost")
    n = problem.n
    psi = np.zeros(n) if psi0 is None else np.asarray(psi0, dtype=float).copy()
    targets, domain, mu = problem.targets, problem.domain, problem.mu

    def res(p):
        with np.errstate(over="ignore"):  # divergence shows up as inf, reported below
            return np.exp(-p) - cells_1d(p, targets, domain, mu).measures

    g = res(psi)
    for k in range(max_iter):
        if np.abs(g).max() < tol:
            return NewtonReport(psi=psi, iterations=k, residual_sup=float(np.abs(g).max()), converged=True)
        with np.errstate(over="ignore"):
            jac = -np.diag(np.exp(-psi)) - measure_jacobian(psi, targets, domain, mu)
        try:
            step = solve_dual_system(jac, g)
        except SolverError:
            return NewtonReport(psi=psi, iterations=k, residual_sup=np.inf, converged=False)
        psi = psi - step
        if not np.all(np.isfinite(psi)) or np.abs(psi).max() > 1e8:
            return NewtonReport(psi=psi, iterations=k + 1, residual_sup=np.inf, converged=False)
        g = res(psi)
        if not np.all(np.isfinite(g)):
            return NewtonReport(psi=psi, iterations=k + 1, residual_sup=np.inf, converged=False)
    sup = float(np.abs(g).max())
    return NewtonReport(psi=psi, iterations=max_iter, residual_sup=sup, converged=sup < tol)


def _newton_direction(jac, g, deflate):
    """Newton step, falling back to growing diagonal regularization when the
    Jacobian degenerates (empty cells zero out rows)."""
    try:
        return solve_dual_system(jac, g, deflate=deflate)
    except SolverError:
        pass
    n = jac.shape[0]
    sign = 1.0 if np.trace(jac) >= 0.0 else -1.0
    scale = max(1.0, float(np.abs(jac).max()))
    for lam in (1e-8, 1e-6, 1e-4, 1e-2, 1.0):
        try:
            return solve_dual_system(
                jac + sign * lam * scale * np.eye(n), g, deflate=deflate
            )
        except SolverError:
            continue
    raise SolverError("Jacobian is singular beyond repair")


def _damped_newton(res_fn, jac_fn, psi0, tol, max_iter, deflate=False):
    """Shared damped iteration: accept the full step if the sup-norm drops,
    otherwise halve it up to MAX_HALVINGS times."""
    psi = np.asarray(psi0, dtype=float).copy()
    g = res_fn(psi)
    sup = float(np.abs(g).max())
    for k in range(max_iter):
        if sup < tol:
            return NewtonReport(psi=psi, iterations=k, residual_sup=sup, converged=True)
        try:
            step = _newton_direction(jac_fn(psi), g, deflate)
        except SolverError:
            return NewtonReport(psi=psi, iterations=k, residual_sup=sup, converged=False)
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial = psi - scale * step
            try:
                g_trial = res_fn(trial)
            except SolverError:
                g_trial = None
            if g_trial is not None and np.all(np.isfinite(g_trial)):
                sup_trial = float(np.abs(g_trial).max())
                if sup_trial < sup:
                    psi, g, sup = trial, g_trial, sup_trial
                    break
            scale *= 0.5
        else:
            return NewtonReport(psi=psi, iterations=k, residual_sup=sup, converged=False)
    return NewtonReport(psi=psi, iterations=max_iter, residual_sup=sup, converged=sup < tol)


def fixed_t_oracle(problem, t, tol=1e-10, grid=None, psi0=None, max_iter=100):
    """Damped Newton on the fixed-t residual; independent of the ODE path.

    Warm-startable through psi0; the default start extrapolates the
    closed-form initial data to time t.
    """
    if grid is None:
        raise ConfigError("fixed_t_oracle needs a quadrature grid")
    system = ResidualSystem(problem, grid)
    if psi0 is None:
        init = system.initial_state()
        psi0 = init.psi0 if init.dpsi0 is None else init.psi0 + t * init.dpsi0
    return _damped_newton(
        lambda p: system.value(p, t),
        lambda p: system.jacobian(p, t),
        psi0,
        tol,
        max_iter,
        deflate=problem.variant == "p4",
    )


def solve_xi_star(targets, rho, grid, tol=1e-8, max_iter=100):
    """Weights whose power cells split rho into N equal masses.

    Damped Newton on xi -> rho-cells(xi) - 1/N with the measure Jacobian and
    the standard semi-discrete globalization: besides decreasing the residual,
    a step must keep every cell mass above half the smallest mass seen at the
    start (an empty cell zeroes a Jacobian row and stalls the iteration).
    The Jacobian's all-ones kernel is deflated, and the returned weights are
    normalized to mean zero (cell masses are shift-invariant, so the defining
    equation only fixes xi up to a constant).
    """
    domain = Domain(lower=grid.lower, upper=grid.upper)
    n = targets.n

    def masses(xi):
        return power_cell_measures(xi, targets, domain, rho, grid=grid, cost_exponent=2.0)

    xi = np.zeros(n)
    current = masses(xi)
    floor = 0.5 * min(float(current.min()), 1.0 / n)
    g = current - 1.0 / n
    sup = float(np.abs(g).max())
    iterations = max_iter
    converged = False
    for k in range(max_iter):
        if sup < tol:
            iterations, converged = k, True
            break
        try:
            step = _newton_direction(
                measure_jacobian(xi, targets, domain, rho, grid=grid), g, deflate=True
            )
        except SolverError:
            iterations = k
            break
        scale = 1.0
        for _ in range(MAX_HALVINGS + 1):
            trial_masses = masses(xi - scale * step)
            trial_sup = float(np.abs(trial_masses - 1.0 / n).max())
            if trial_masses.min() >= floor and trial_sup < sup:
                xi = xi - scale * step
                g = trial_masses - 1.0 / n
                sup = trial_sup
                break
            scale *= 0.5
        else:
            iterations = k
            break
    centered = xi - xi.mean()
    return NewtonReport(
        psi=centered, iterations=iterations, residual_sup=sup, converged=converged
    )
