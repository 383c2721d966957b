"""Dense dual simplex for small LPs  min c.x  s.t.  A x <= b.

Built for the estimator's workload: three unknowns, a few hundred
half-spaces, and constraints that only ever get added. The dual simplex
keeps a basis of ``n`` active rows that stays dual feasible when rows are
appended, so a previous optimal basis is a valid warm start.

The first ``2n`` rows of ``A`` must be ``n`` pairs of opposite bounding
faces (lower face, upper face). Picking one face from each pair gives the
cold-start candidates.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import Infeasible, Unbounded

FEAS_TOL = 1e-10
DUAL_TOL = 1e-12
PIVOT_TOL = 1e-12


@dataclass
class LPResult:
    value: float
    x: np.ndarray
    basis: tuple
    iterations: int


def _dual(A, c, basis):
    try:
        return np.linalg.solve(A[list(basis)].T, -c)
    except np.linalg.LinAlgError:
        return None


def _start_basis(A, c, n):
    scale = DUAL_TOL * (1.0 + np.abs(c).max())
    for choice in itertools.product((0, 1), repeat=n):
        basis = tuple(2 * j + side for j, side in enumerate(choice))
        y = _dual(A, c, basis)
        if y is not None and (y >= -scale).all():
            return basis, y
    raise Unbounded("no dual-feasible basis among the bounding faces")


def solve_lp(c: Sequence[float], A: np.ndarray, b: np.ndarray,
             basis: Optional[Sequence[int]] = None, max_iter: Optional[int] = None) -> LPResult:
    """Minimize ``c.x`` over ``A x <= b``; deterministic by Bland's rule."""
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    y = None
    if basis is not None:
        basis = tuple(basis)
        if max(basis) < m and len(set(basis)) == n:
            y = _dual(A, c, basis)
            if y is not None and not (y >= -DUAL_TOL * (1.0 + np.abs(c).max())).all():
                y = None
    if y is None:
        basis, y = _start_basis(A, c, n)
    basis = list(basis)
    y = np.maximum(y, 0.0)
    tol = FEAS_TOL * (1.0 + np.abs(b))
    limit = max_iter if max_iter is not None else 50 * m + 100

    for it in range(limit):
        AB = A[basis]
        x = np.linalg.solve(AB, b[basis])
        viol = np.flatnonzero(A @ x - b > tol)
        if viol.size == 0:
            return LPResult(float(c @ x), x, tuple(basis), it)
        enter = int(viol[0])
        w = np.linalg.solve(AB.T, A[enter])
        best = None
        for k in sorted(range(n), key=lambda k: basis[k]):
            if w[k] > PIVOT_TOL:
                theta = y[k] / w[k]
                if best is None or theta < best[0] - 1e-15:
                    best = (theta, k)
        if best is None:
            raise Infeasible(f"constraint {enter} cannot be satisfied")
        theta, k = best
        y = np.maximum(y - theta * w, 0.0)
        y[k] = theta
        basis[k] = enter
    raise RuntimeError("dual simplex iteration limit reached")


def lp_solve(objective: Sequence[float], poly, sense: str = "min",
             basis: Optional[Sequence[int]] = None) -> LPResult:
    """Optimize ``objective . p`` over a :class:`ParamPolytope`.

    ``sense`` is ``"min"`` or ``"max"``; the returned value is in the
    requested sense.
    """
    c = np.asarray(objective, dtype=float)
    if sense == "max":
        res = solve_lp(-c, poly.A, poly.b, basis)
        res.value = -res.value
        return res
    if sense != "min":
        raise ValueError(f"unknown sense {sense!r}")
    return solve_lp(c, poly.A, poly.b, basis)
