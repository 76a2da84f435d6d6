"""Matrix-free conjugate gradients for the lab's symmetric solves.

The two systems we meet (Dirichlet Laplace for initial guesses, the singular
Neumann system behind the flux potential) are symmetric positive on the
working subspace, so plain CG with an optional per-iteration projection onto
that subspace covers both.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import SolverError

__all__ = ["conjugate_gradient"]


def conjugate_gradient(
    apply_a: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
    project: Callable[[np.ndarray], np.ndarray] | None = None,
) -> tuple[np.ndarray, float, int]:
    """Solve A x = b for symmetric positive (semi)definite A.

    project, when given, is applied to the right-hand side, the iterates and
    the residuals; it must be the orthogonal projection onto the complement
    of the nullspace of A (for the Neumann solve: remove the mean).

    Returns (x, relative_residual, iterations).
    """
    b = np.asarray(b, dtype=float)
    if project is not None:
        b = project(b)
    if max_iter is None:
        max_iter = 10 * b.size
    b_norm = float(np.sqrt(np.vdot(b, b).real))
    x = np.zeros_like(b)
    if b_norm == 0.0:
        return x, 0.0, 0
    r = b.copy()
    p = r.copy()
    rs = float(np.vdot(r, r).real)
    it = 0
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        if project is not None:
            ap = project(ap)
        p_ap = float(np.vdot(p, ap).real)
        if p_ap <= 0.0:
            raise SolverError("operator is not positive definite on the search space")
        alpha = rs / p_ap
        x += alpha * p
        r -= alpha * ap
        if project is not None:
            x = project(x)
            r = project(r)
        rs_new = float(np.vdot(r, r).real)
        if np.sqrt(rs_new) <= tol * b_norm:
            rs = rs_new
            break
        p = r + (rs_new / rs) * p
        rs = rs_new
    return x, float(np.sqrt(rs) / b_norm), it
