"""Linear-programming facade.

Wraps scipy's HiGHS backend behind a small, status-checked interface:
bounded LP minimization plus a strict-feasibility test for homogeneous
alternative systems (does z >= 0 with Mz = 0 and g.z < 0 exist?).
Every "yes" from the strict test carries a re-verified witness.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "LinearProgram",
    "LpOutcome",
    "LpStatus",
    "NumericalFailure",
    "solve",
    "strict_homogeneous_feasible",
]

# Scaled primal-feasibility bound an Optimal outcome must satisfy.
FEAS_TOL = 1e-7


class NumericalFailure(RuntimeError):
    """The solver could not produce a trustworthy outcome."""


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LinearProgram:
    """min c.x subject to A_eq x = b_eq, A_le x <= b_le, lower <= x <= upper."""

    c: np.ndarray
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    a_le: np.ndarray | None = None
    b_le: np.ndarray | None = None
    lower: np.ndarray | None = None  # default 0
    upper: np.ndarray | None = None  # default +inf

    def __post_init__(self):
        n = len(self.c)
        for a, b, label in ((self.a_eq, self.b_eq, "eq"), (self.a_le, self.b_le, "le")):
            if (a is None) != (b is None):
                raise ValueError(f"{label} block needs both matrix and rhs")
            if a is not None and (a.shape[1] != n or a.shape[0] != len(b)):
                raise ValueError(f"{label} block dimensions inconsistent")
        lo, hi = self.bound_arrays()
        if len(lo) != n or len(hi) != n:
            raise ValueError("bound lengths inconsistent")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")

    def bound_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        n = len(self.c)
        lo = np.zeros(n) if self.lower is None else np.asarray(self.lower, dtype=float)
        hi = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, dtype=float)
        return lo, hi


@dataclass(frozen=True)
class LpOutcome:
    status: LpStatus
    solution: np.ndarray | None
    objective: float | None


def solve(lp: LinearProgram, presolve: bool = True) -> LpOutcome:
    """Solve the LP; Optimal outcomes are residual-checked before return.

    presolve=False trades a little speed on large instances for robustness
    on near-degenerate ones: presolve decides eliminations one at a time
    against fixed tolerances, and chained substitutions through barely
    feasible rows can misreport a consistent instance as infeasible.
    """
    lo, hi = lp.bound_arrays()
    res = linprog(
        lp.c,
        A_ub=lp.a_le,
        b_ub=lp.b_le,
        A_eq=lp.a_eq,
        b_eq=lp.b_eq,
        bounds=list(zip(lo, hi)),
        method="highs",
        options={"presolve": presolve},
    )
    if res.status == 2:
        return LpOutcome(LpStatus.INFEASIBLE, None, None)
    if res.status == 3:
        return LpOutcome(LpStatus.UNBOUNDED, None, None)
    if res.status != 0:
        raise NumericalFailure(f"solver failed: {res.message}")

    x = np.asarray(res.x)
    scale = 1.0
    resid = 0.0
    if lp.a_eq is not None:
        scale = max(scale, float(np.abs(lp.b_eq).max(initial=0.0)))
        resid = max(resid, float(np.abs(lp.a_eq @ x - lp.b_eq).max(initial=0.0)))
    if lp.a_le is not None:
        scale = max(scale, float(np.abs(lp.b_le).max(initial=0.0)))
        resid = max(resid, float((lp.a_le @ x - lp.b_le).max(initial=0.0)))
    resid = max(resid, float((lo - x).max(initial=0.0)), float((x - hi).max(initial=0.0)))
    if resid > FEAS_TOL * scale:
        raise NumericalFailure(f"primal residual {resid:.3e} exceeds tolerance")
    return LpOutcome(LpStatus.OPTIMAL, x, float(res.fun))


def strict_homogeneous_feasible(
    m: np.ndarray, g: np.ndarray
) -> tuple[bool, np.ndarray | None]:
    """Decide whether some z >= 0 has Mz = 0 and g.z < 0.

    Homogeneity lets the witness be normalized, so the open condition is
    decided by min g.z over {z >= 0, Mz = 0, sum(z) <= 1}: strictly
    negative optimum (below -1e-9 * max(1, ||g||_inf)) means feasible.
    Columns are equilibrated to unit max magnitude first; the rescaling
    maps witnesses back exactly, and without it any witness forced to
    put its mass on near-zero columns would land in the dead zone around
    zero no matter how decisively the unnormalized system is feasible.
    A positive answer is only returned together with a witness that
    passed an independent residual check against the original data.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    g = np.asarray(g, dtype=float)
    if m.shape[1] != len(g):
        raise ValueError("M must have one column per entry of g")
    n = len(g)
    col_scale = np.abs(m).max(axis=0, initial=0.0)
    col_scale = np.where(col_scale > 0.0, col_scale, 1.0)
    m_eq = m / col_scale
    g_eq = g / col_scale
    lp = LinearProgram(
        c=g_eq,
        a_eq=m_eq,
        b_eq=np.zeros(m.shape[0]),
        a_le=np.ones((1, n)),
        b_le=np.ones(1),
    )
    out = solve(lp)
    if out.status is not LpStatus.OPTIMAL:
        # z = 0 is always feasible and the simplex bound rules out
        # unboundedness, so anything else is a solver breakdown.
        raise NumericalFailure(f"unexpected status {out.status} on homogeneous system")

    eps = 1e-9 * max(1.0, float(np.abs(g_eq).max(initial=0.0)))
    if out.objective >= -eps:
        return False, None

    z_eq = np.asarray(out.solution)
    if float(z_eq.min(initial=0.0)) < -1e-9:
        raise NumericalFailure("witness has negative components")
    z = np.clip(z_eq, 0.0, None) / col_scale
    if float(np.abs(m @ z).max(initial=0.0)) > FEAS_TOL or float(g @ z) >= 0.0:
        raise NumericalFailure("witness failed re-verification")
    return True, z
