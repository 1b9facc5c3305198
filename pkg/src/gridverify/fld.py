"""Failed-link detection inside a blacked-out area.

Builds the L1-relaxed recovery program from quantities observable outside
the attacked area (pre/post phase angles everywhere, pre-attack injections,
post-attack injection changes outside the area), solves it, and rounds the
fractional link-state vector at a threshold.  A connected-grid variant
pins all in-area injection changes to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attack import AttackScenario, PostAttackState, induced_links
from .grid import GridTopology, build_admittance, build_incidence
from .lp import LinearProgram, LpStatus, NumericalFailure, solve

__all__ = [
    "Observables",
    "EstimationResult",
    "InfeasibleModel",
    "observe",
    "build_p1",
    "constraint_residual",
    "estimate",
    "estimate_connected",
]

DEFAULT_ETA = 0.5

# Rounding tie guard: x within this of the threshold still counts as >= eta.
_TIE_EPS = 1e-12


class InfeasibleModel(RuntimeError):
    """The observables admit no solution under the model's constraints."""


@dataclass(frozen=True)
class Observables:
    """What the defender can see: everything except the area's internals.

    delta_outside holds the injection changes of nodes OUTSIDE the area;
    nothing here is derived from the failed set or from in-area deltas.
    """

    topology: GridTopology
    v_h: frozenset[int]
    theta_pre: np.ndarray
    theta_post: np.ndarray
    delta_outside: dict[int, float]

    @property
    def e_h(self) -> frozenset[int]:
        return induced_links(self.topology, self.v_h)

    def area_nodes(self) -> tuple[int, ...]:
        return tuple(sorted(self.v_h))

    def area_links(self) -> tuple[int, ...]:
        return tuple(sorted(self.e_h))

    def d_tilde(self) -> np.ndarray:
        """D * Gamma * diag(D^T theta_post) over the full link set."""
        d = build_incidence(self.topology)
        per_link = (d.T @ self.theta_post) / self.topology.reactance
        return d * per_link[np.newaxis, :]


def observe(
    topology: GridTopology,
    scenario: AttackScenario,
    theta_pre: np.ndarray,
    post: PostAttackState,
) -> Observables:
    """Project simulator output onto the observable quantities."""
    outside = {
        n: float(post.delta[topology.node_pos(n)])
        for n in topology.node_ids
        if n not in scenario.v_h
    }
    return Observables(
        topology=topology,
        v_h=scenario.v_h,
        theta_pre=np.asarray(theta_pre, dtype=float),
        theta_post=post.theta_post,
        delta_outside=outside,
    )


@dataclass(frozen=True)
class EstimationResult:
    """Fractional link states, rounded failed set, and in-area deltas."""

    link_order: tuple[int, ...]
    x_h: np.ndarray
    node_order: tuple[int, ...]
    delta_h_est: np.ndarray
    f_hat: frozenset[int]
    eta: float

    def x_of(self, link_id: int) -> float:
        return float(self.x_h[self.link_order.index(link_id)])


def _area_blocks(obs: Observables):
    """Index helpers and the constant term of the recovery constraint."""
    top = obs.topology
    nodes = obs.area_nodes()
    links = obs.area_links()
    n_rows = [top.node_pos(n) for n in nodes]
    l_cols = [top.link_pos(l) for l in links]
    b = build_admittance(top)
    c0 = b[n_rows, :] @ (obs.theta_pre - obs.theta_post)
    d_tilde_h = obs.d_tilde()[np.ix_(n_rows, l_cols)]
    return nodes, links, c0, d_tilde_h


def build_p1(obs: Observables, connected: bool = False) -> LinearProgram:
    """The recovery LP over variables (x_H, delta_H).

    Equality rows: delta_H - Dtilde_H x_H = B_{H|G} (theta - theta');
    x in [0,1]; each delta component boxed by its node's injection sign
    (or pinned to 0 in the connected variant); objective sum(x).
    """
    top = obs.topology
    nodes, links, c0, d_tilde_h = _area_blocks(obs)
    n, m = len(nodes), len(links)

    a_eq = np.hstack([-d_tilde_h, np.eye(n)])
    c = np.concatenate([np.ones(m), np.zeros(n)])

    lo = np.zeros(m + n)
    hi = np.ones(m + n)
    for i, node in enumerate(nodes):
        p_v = top.injection(node)
        if connected:
            lo[m + i] = hi[m + i] = 0.0
        elif p_v > 0:
            lo[m + i], hi[m + i] = 0.0, p_v
        else:
            lo[m + i], hi[m + i] = p_v, 0.0
    return LinearProgram(c=c, a_eq=a_eq, b_eq=c0, lower=lo, upper=hi)


def constraint_residual(obs: Observables, x_h: np.ndarray, delta_h: np.ndarray) -> float:
    """Inf-norm violation of the recovery constraint at a candidate point."""
    _, _, c0, d_tilde_h = _area_blocks(obs)
    if len(c0) == 0:
        return 0.0
    return float(np.abs(delta_h - d_tilde_h @ x_h - c0).max())


def _run(obs: Observables, eta: float, connected: bool) -> EstimationResult:
    if not 0.0 < eta < 1.0:
        raise ValueError(f"threshold {eta} outside (0, 1)")
    nodes = obs.area_nodes()
    links = obs.area_links()
    prog = build_p1(obs, connected=connected)
    m = len(links)
    lo, hi = prog.bound_arrays()
    # Two numerical defenses, both exact reformulations in effect.  First,
    # the solver quietly discards matrix entries around 1e-9, so a row
    # whose flow coefficients all sit near that magnitude (an area with
    # nearly balanced angles) collapses to nonsense; small rows are
    # lifted toward O(1), capped at 1e8 per unit of angle magnitude so
    # amplified rounding noise stays inside solver tolerances.  Second,
    # the constant term is itself only accurate to rounding in B(theta -
    # theta'), and near-floor flow coefficients blow that error up past
    # any feasibility tolerance once presolve substitutes through the
    # equalities; a slack per row bounded by a noise allowance far below
    # the downstream residual criterion keeps a consistent instance from
    # being rejected as infeasible.
    n = len(nodes)
    theta_scale = max(
        1.0,
        float(np.abs(obs.theta_pre).max(initial=0.0)),
        float(np.abs(obs.theta_post).max(initial=0.0)),
    )
    content = np.maximum(
        np.abs(prog.a_eq[:, :m]).max(axis=1, initial=0.0), np.abs(prog.b_eq)
    )
    row_scale = np.clip(np.maximum(content, 1e-8 * theta_scale), None, 1.0)
    # Delta and slack columns keep coefficient 1 in the lifted rows --
    # each appears in exactly one row, so the variable is rescaled and
    # its bounds with it.  A lifted coefficient on a barely-wider-than-
    # zero variable is exactly the pattern presolve mangles (it may pin
    # the variable anywhere in its range, and a huge coefficient turns
    # that arbitrary choice into a phantom constant), while a unit
    # coefficient caps the damage at the bound width itself.
    noise = 1e-12 * theta_scale / row_scale
    out = solve(
        LinearProgram(
            c=np.concatenate([prog.c, np.zeros(n)]),
            a_eq=np.hstack(
                [prog.a_eq[:, :m] / row_scale[:, np.newaxis], np.eye(n), np.eye(n)]
            ),
            b_eq=prog.b_eq / row_scale,
            lower=np.concatenate([lo[:m], lo[m:] / row_scale, -noise]),
            upper=np.concatenate([hi[:m], hi[m:] / row_scale, noise]),
        ),
        presolve=False,
    )
    if out.status is LpStatus.INFEASIBLE:
        raise InfeasibleModel(
            "observables inconsistent with the model"
            + (" (grid may have split)" if connected else "")
        )
    if out.status is not LpStatus.OPTIMAL:
        raise NumericalFailure(f"unexpected LP status {out.status}")
    x = np.clip(out.solution[:m], 0.0, 1.0)
    delta = out.solution[m : m + n] * row_scale
    f_hat = frozenset(l for i, l in enumerate(links) if x[i] >= eta - _TIE_EPS)
    return EstimationResult(
        link_order=links,
        x_h=x,
        node_order=nodes,
        delta_h_est=delta,
        f_hat=f_hat,
        eta=eta,
    )


def estimate(obs: Observables, eta: float = DEFAULT_ETA) -> EstimationResult:
    """Solve the recovery LP and round at the threshold."""
    return _run(obs, eta, connected=False)


def estimate_connected(obs: Observables, eta: float = DEFAULT_ETA) -> EstimationResult:
    """Variant for a known-connected post-attack grid (delta_H = 0)."""
    return _run(obs, eta, connected=True)
