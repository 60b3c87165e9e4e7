"""Dense linear solves for the stage systems, with a condition guard.

Systems are N x N with N <= 64, so LU with partial pivoting plus a LAPACK
reciprocal-condition estimate costs nothing next to quadrature.  The
Wasserstein-penalty variant's Jacobian is exactly singular along the all-ones
direction (constant shifts of the dual weights change nothing); `deflate=True`
adds a rank-one term on that direction, which pins the mean of the solution
to (essentially) zero without touching the orthogonal complement.
"""

import warnings

import numpy as np
from scipy.linalg import LinAlgWarning, get_lapack_funcs, lu_factor, lu_solve

from .errors import NearSingularJacobianError

RCOND_FLOOR = 1e-14  # condition estimate beyond 1e14 is treated as singular


def solve_dual_system(mat, rhs, deflate=False, t=None):
    mat = np.asarray(mat, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    n = mat.shape[0]
    if deflate:
        shift = np.trace(mat)
        if abs(shift) < 1e-12:
            shift = -1.0
        mat = mat + (shift / n) * np.ones((n, n))
    if not np.all(np.isfinite(mat)) or not np.all(np.isfinite(rhs)):
        raise NearSingularJacobianError(t if t is not None else np.nan, "non-finite system")
    anorm = np.abs(mat).sum(axis=0).max()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", LinAlgWarning)  # rcond guard below reports it
        lu, piv = lu_factor(mat)
    (gecon,) = get_lapack_funcs(("gecon",), (mat,))
    rcond, info = gecon(lu, anorm, norm="1")
    if info != 0 or not np.isfinite(rcond) or rcond < RCOND_FLOOR:
        raise NearSingularJacobianError(
            t if t is not None else np.nan, f"rcond={rcond:.3g}"
        )
    return lu_solve((lu, piv), rhs)
