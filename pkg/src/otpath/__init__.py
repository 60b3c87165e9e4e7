"""Semi-discrete optimal transport along the entropic-regularization path.

The solver follows the curve of dual optimizers of a regularized
transport-plus-penalty problem from its closed-form start (full
regularization) to the unregularized optimum, by explicit third-order
Runge-Kutta integration of the governing ODE.  Laguerre-cell diagnostics and
a Newton baseline make the endpoint independently checkable.
"""

from .errors import ConfigError, NearSingularJacobianError, NonFiniteValueError, SolverError
from .homotopy import (
    RKTableau,
    TerminalReport,
    Trajectory,
    capture_snapshot,
    integrate_homotopy,
    ode_rhs,
    rk3_tableau,
)
from .kernel import (
    DualState,
    KernelEval,
    KernelEvaluator,
    kernel_dt_grad,
    kernel_grad,
    kernel_hessian,
    softmax_weights,
)
from .laguerre import (
    CellField,
    LaguerreDiagram1D,
    cell_measures,
    cells_1d,
    label_field,
    power_cell_measures,
    smoothed_cell_field,
    triple_intersection_check,
    unregularized_residual,
)
from .model import (
    CostSpec,
    DensitySpec,
    Domain,
    ProblemSpec,
    TargetSet,
    build_problem,
    density_eval,
    gaussian_bump_density,
    parabola_targets,
    sample_targets,
    uniform_density,
    unit_domain,
)
from .newton import NewtonReport, fixed_t_oracle, newton_1d, solve_xi_star
from .quadrature import QuadratureGrid, build_grid, integrate, integrate_vector, refine_grid
from .residuals import (
    InitialData,
    ResidualEval,
    ResidualSystem,
    initial_state,
    residual,
    residual_dt,
    residual_jacobian,
)

__version__ = "0.1.0"

__all__ = [
    "CellField",
    "ConfigError",
    "CostSpec",
    "DensitySpec",
    "Domain",
    "DualState",
    "InitialData",
    "KernelEval",
    "KernelEvaluator",
    "LaguerreDiagram1D",
    "NearSingularJacobianError",
    "NewtonReport",
    "NonFiniteValueError",
    "ProblemSpec",
    "QuadratureGrid",
    "ResidualEval",
    "ResidualSystem",
    "RKTableau",
    "SolverError",
    "TargetSet",
    "TerminalReport",
    "Trajectory",
    "build_grid",
    "build_problem",
    "capture_snapshot",
    "cell_measures",
    "cells_1d",
    "density_eval",
    "fixed_t_oracle",
    "gaussian_bump_density",
    "initial_state",
    "integrate",
    "integrate_homotopy",
    "integrate_vector",
    "kernel_dt_grad",
    "kernel_grad",
    "kernel_hessian",
    "label_field",
    "newton_1d",
    "ode_rhs",
    "parabola_targets",
    "power_cell_measures",
    "refine_grid",
    "residual",
    "residual_dt",
    "residual_jacobian",
    "rk3_tableau",
    "sample_targets",
    "smoothed_cell_field",
    "softmax_weights",
    "solve_xi_star",
    "triple_intersection_check",
    "uniform_density",
    "unit_domain",
]
