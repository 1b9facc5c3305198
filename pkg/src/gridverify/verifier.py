"""Certify estimated link states using only blackout-area observables.

Two complementary machineries operate on the area subgraph H:

* closed-form cut certificates — for links forming 1- or 2-link cuts of H,
  an upper bound on the shed power of each side (a "hyper-node") yields
  inequalities that, when strict, prove the estimate correct;
* homogeneous-LP certificates — a Farkas-style system whose feasibility
  proves that the estimator could not have produced the observed state for
  the tested link unless that state is correct; verified links sharpen the
  system for the remaining ones, so the test is iterated to a fixpoint.

Ground-truth-based "guaranteed" checkers mirror the same conditions with
exact quantities; they exist for evaluation only and never feed back into
the observable-only path.
"""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field, replace

import numpy as np

from .attack import IDENTIFIABLE_TOL
from .fld import DEFAULT_ETA, EstimationResult, Observables
from .grid import CutCatalog, GridTopology, hyper_nodes_for_cut, induced_subgraph
from .lp import NumericalFailure, strict_homogeneous_feasible

__all__ = [
    "HyperNode",
    "NodeGValues",
    "GaleSystem",
    "LedgerRecord",
    "VerificationLedger",
    "METHOD_TAGS",
    "VERIFY_FAILED",
    "VERIFY_OPERATIONAL",
    "identifiable_links",
    "hyper_nodes",
    "recover_delta",
    "node_g",
    "f_hat",
    "verify_1cut",
    "verify_2cut",
    "algorithm1",
    "build_gale",
    "algorithm2",
    "guaranteed_by_gale",
    "guaranteed_by_hypernode",
]

VERIFY_FAILED = "verify-failed"
VERIFY_OPERATIONAL = "verify-operational"

METHOD_TAGS = frozenset(
    {"cut1", "cut2-thm3", "cut2-thm4", "cut2-thm5", "alg2-lp", "corollary-connected"}
)

# Strict inequalities are certified only with this relative margin, so a
# razor-thin numerical pass can never mint an unsound certificate.
_STRICT_EPS_REL = 1e-9

# Below this (relative) size a reported injection change counts as zero.
_NONZERO_REL = 1e-12

# Three-valued sign of a hypothetical link flow seen from one node.
_POS, _NEG, _AMB = 1, -1, 0


def _eps_strict(*terms: float) -> float:
    scale = max(1.0, *(abs(t) for t in terms)) if terms else 1.0
    return _STRICT_EPS_REL * scale


def _trisign(value: float, tol: float) -> int:
    if value > tol:
        return _POS
    if value < -tol:
        return _NEG
    return _AMB


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class HyperNode:
    """One side of a cut of H, aggregated into a single super-node.

    ``d_u`` maps each boundary link to the side's aggregated hypothetical
    flow on it (MW); ``f_hat`` is the shed-power upper bound computed under
    some fixed hypothesis, left None until one is chosen.
    """

    nodes: frozenset[int]
    boundary: tuple[int, ...]
    d_u: Mapping[int, float]
    f_hat: float | None = None
    s_u: frozenset[int] | None = None

    def __post_init__(self):
        if not self.nodes:
            raise ValueError("hyper-node needs at least one node")
        if list(self.boundary) != sorted(self.boundary):
            raise ValueError("boundary links must be sorted")
        missing = [e for e in self.boundary if e not in self.d_u]
        if missing:
            raise ValueError(f"no aggregated flow for boundary links {missing}")


@dataclass(frozen=True)
class NodeGValues:
    """Per-node shed-power coefficients (both orientations), in MW.

    Exact when the node's injection change is known; otherwise both fall
    back to |p|, which dominates every feasible value.
    """

    g_plus: float
    g_minus: float
    known: bool


@dataclass(frozen=True)
class GaleSystem:
    """Homogeneous system whose strictly-negative ray certifies one link."""

    m: np.ndarray
    g: np.ndarray
    link: int
    hypothesis: str

    def __post_init__(self):
        if self.m.shape[1] != self.g.shape[0]:
            raise ValueError("matrix and objective dimensions disagree")


@dataclass
class LedgerRecord:
    link: int
    estimated: str  # "failed" | "operational"
    verified: bool = False
    method: str | None = None
    identifiable: bool = True


@dataclass
class VerificationLedger:
    """Per-link verdicts plus the knowledge accumulated while verifying."""

    records: dict[int, LedgerRecord]
    e_v: set[int] = field(default_factory=set)
    u_b: set[int] = field(default_factory=set)
    delta_known: dict[int, float] = field(default_factory=dict)
    witnesses: dict[int, np.ndarray] = field(default_factory=dict)
    numerical_failures: int = 0

    def rows(self) -> list[LedgerRecord]:
        return [self.records[l] for l in sorted(self.records)]

    def known_states(self) -> dict[int, bool]:
        """link -> hypothesized-failed flag for every verified link."""
        return {l: self.records[l].estimated == "failed" for l in self.e_v}

    def clone(self) -> VerificationLedger:
        return VerificationLedger(
            records={l: replace(r) for l, r in self.records.items()},
            e_v=set(self.e_v),
            u_b=set(self.u_b),
            delta_known=dict(self.delta_known),
            witnesses=dict(self.witnesses),
            numerical_failures=self.numerical_failures,
        )


# ---------------------------------------------------------------------------
# observable-side primitives


def identifiable_links(obs: Observables) -> frozenset[int]:
    """Area links whose hypothetical flow is distinguishable from zero."""
    top = obs.topology
    theta = obs.theta_post
    out = set()
    for e in obs.area_links():
        s, t = top.endpoints[top.link_pos(e)]
        gap = abs(theta[top.node_pos(s)] - theta[top.node_pos(t)])
        if gap > IDENTIFIABLE_TOL:
            out.add(e)
    return frozenset(out)


def _same_type(p_a: float, p_b: float) -> bool:
    return (p_a > 0.0) == (p_b > 0.0)


def _ratio_recover(p_v: float, neighbors: list[tuple[float, float]]) -> float | None:
    """Recover a node's injection change from neighbor (p, delta) pairs.

    A same-type neighbor shares the node's island shedding ratio; a
    different-type neighbor that shed anything proves the node's side shed
    nothing.  Returns None when neither rule applies.
    """
    for p_u, d_u in neighbors:
        if _same_type(p_v, p_u) and p_u != 0.0:
            return p_v * d_u / p_u
    for p_u, d_u in neighbors:
        if not _same_type(p_v, p_u) and abs(d_u) > _NONZERO_REL * max(1.0, abs(p_u)):
            return 0.0
    return None


def recover_delta(obs: Observables) -> tuple[frozenset[int], dict[int, float]]:
    """Infer in-area injection changes from adjacent outside nodes.

    Only cross-boundary links (never attackable) connect an area node to a
    node whose change is reported, so any such neighbor sits in the same
    post-attack island and the proportional policy fixes the ratio.
    """
    top = obs.topology
    area_links = obs.e_h
    known: dict[int, float] = {}
    for v in obs.area_nodes():
        neighbors = []
        for e in top.incident_links(v):
            if e in area_links:
                continue
            s, t = top.endpoints[top.link_pos(e)]
            far = t if s == v else s
            neighbors.append((top.injection(far), obs.delta_outside[far]))
        value = _ratio_recover(top.injection(v), neighbors)
        if value is not None:
            known[v] = value
    return frozenset(known), known


def node_g(node: int, injection: float, delta_known: Mapping[int, float]) -> NodeGValues:
    """Shed-power coefficients of one node, exact when its change is known."""
    p = injection
    if node not in delta_known:
        return NodeGValues(abs(p), abs(p), known=False)
    delta = delta_known[node]
    post = p - delta
    if p > 0.0:
        plus, minus = post, delta
    else:
        plus, minus = -delta, -post
    cap = abs(p)
    plus = min(max(plus, 0.0), cap)
    minus = min(max(minus, 0.0), cap)
    return NodeGValues(plus, minus, known=True)


def _branch(signs: Mapping[int, int], states: Mapping[int, bool]) -> str | None:
    """Which coefficient direction the boundary selects, None if undecidable.

    ``signs`` holds the three-valued aggregated flow sign of each boundary
    link; ``states`` the known/hypothesized failed flags (absent = unknown).
    The selection rule is evaluated over every completion of the unknowns,
    and a direction is returned only when all completions agree.
    """
    known_failed = [e for e in signs if states.get(e) is True]
    unknown = [e for e in signs if e not in states]
    if known_failed:
        if any(signs[e] == _NEG for e in known_failed):
            return "plus"
        if any(signs[e] != _POS for e in known_failed + unknown):
            return None
        return "minus"
    outcomes = set()
    if any(s == _POS for s in signs.values()):
        outcomes.add("plus")
    elif any(s == _AMB for s in signs.values()):
        outcomes.update(("plus", "minus"))
    else:
        outcomes.add("minus")
    if unknown:
        if any(signs[e] != _POS for e in unknown):
            outcomes.add("plus")
        if any(signs[e] != _NEG for e in unknown):
            outcomes.add("minus")
    return outcomes.pop() if len(outcomes) == 1 else None


def f_hat(
    hyper: HyperNode,
    states: Mapping[int, bool],
    node_gs: Mapping[int, NodeGValues],
    link_tols: Mapping[int, float] | None = None,
    connected: bool = False,
) -> float:
    """Upper bound on the hyper-node's shed power.

    ``states`` merges verified link states with the hypothesis under test;
    the boundary's known flags and flow signs select which coefficient
    direction applies.  Nodes with unknown changes contribute |p|; when the
    selection cannot be pinned down, each known node contributes the larger
    of its two coefficients, which dominates either direction.
    """
    if connected:
        return 0.0
    signs = {
        e: _trisign(
            hyper.d_u[e],
            link_tols[e] if link_tols is not None else IDENTIFIABLE_TOL,
        )
        for e in hyper.boundary
    }
    picked = _branch(signs, states)
    total = 0.0
    for u in sorted(hyper.nodes):
        values = node_gs[u]
        if not values.known:
            total += values.g_plus
        elif picked == "plus":
            total += values.g_plus
        elif picked == "minus":
            total += values.g_minus
        else:
            total += max(values.g_plus, values.g_minus)
    return total


# ---------------------------------------------------------------------------
# cut certificates


def verify_1cut(
    link: int,
    est: EstimationResult,
    u1: HyperNode,
    u2: HyperNode,
    eta: float,
) -> bool:
    """Certify a bridge link from the shed-power bounds of its two sides."""
    if u1.f_hat is None or u2.f_hat is None:
        raise ValueError("both hyper-nodes need f_hat computed")
    magnitude = abs(u1.d_u[link])
    bound = min(u1.f_hat, u2.f_hat)
    eps = _eps_strict(bound, magnitude)
    if link in est.f_hat:
        return bound - eta * magnitude < -eps
    return bound + (eta - 1.0) * magnitude < -eps


BoundFn = Callable[[HyperNode, Mapping[int, bool]], float]


def verify_2cut(
    pair: tuple[int, int],
    est: EstimationResult,
    u1: HyperNode,
    u2: HyperNode,
    eta: float,
    bound: BoundFn,
) -> dict[int, bool]:
    """Certify the links of a 2-link cut; either side's pass suffices.

    ``bound`` evaluates a hyper-node's shed-power bound under a hypothesis
    mapping (link -> assumed-failed).  Single-link conditions hypothesize
    the tested link in its contradicted state; joint conditions use the
    hypothesis-free bound, which dominates both.
    """
    e1, e2 = sorted(pair)
    out = {e1: False, e2: False}
    for side in (u1, u2):
        got = _verify_2cut_side(e1, e2, est, side, eta, bound)
        out[e1] = out[e1] or got[e1]
        out[e2] = out[e2] or got[e2]
    return out


def _verify_2cut_side(
    e1: int,
    e2: int,
    est: EstimationResult,
    u: HyperNode,
    eta: float,
    bound: BoundFn,
) -> dict[int, bool]:
    d1, d2 = u.d_u[e1], u.d_u[e2]
    a1, a2 = abs(d1), abs(d2)
    res = {e1: False, e2: False}
    if a1 == 0.0 or a2 == 0.0:
        return res
    same = d1 * d2 > 0.0
    in1, in2 = e1 in est.f_hat, e2 in est.f_hat

    if not in1 and not in2:
        if same:
            f1 = bound(u, {e1: True})
            if f1 + a2 - (1.0 - eta) * a1 < -_eps_strict(f1, a1, a2):
                res[e1] = True
            f2 = bound(u, {e2: True})
            if f2 + a1 - (1.0 - eta) * a2 < -_eps_strict(f2, a1, a2):
                res[e2] = True
        else:
            f = bound(u, {})
            eps = _eps_strict(f, a1, a2)
            gate = f + (eta - 1.0) * min(a1, a2) < -eps
            spread = (f + a1 - (1.0 - eta) * a2 < -eps) or (
                f + a2 - (1.0 - eta) * a1 < -eps
            )
            if gate and spread:
                res = {e1: True, e2: True}
    elif in1 and in2:
        f1 = bound(u, {e1: False})
        if eta * a1 - f1 - a2 > _eps_strict(f1, a1, a2):
            res[e1] = True
        f2 = bound(u, {e2: False})
        if eta * a2 - f2 - a1 > _eps_strict(f2, a1, a2):
            res[e2] = True
    else:
        failed, oper = (e1, e2) if in1 else (e2, e1)
        a_f, a_o = (a1, a2) if in1 else (a2, a1)
        if same:
            f = bound(u, {})
            eps = _eps_strict(f, a_f, a_o)
            gate = (f - eta * a_f < -eps) and (f + (eta - 1.0) * a_o < -eps)
            spread = (eta * a_f - f - a_o > eps) or (
                (1.0 - eta) * a_o - f - a_f > eps
            )
            if gate and spread:
                res = {failed: True, oper: True}
        else:
            f_f = bound(u, {failed: False})
            if eta * a_f - f_f - a_o > _eps_strict(f_f, a_f, a_o):
                res[failed] = True
            f_o = bound(u, {oper: True})
            if (1.0 - eta) * a_o - f_o - a_f > _eps_strict(f_o, a_f, a_o):
                res[oper] = True
    return res


# ---------------------------------------------------------------------------
# hyper-node construction


@dataclass
class _AreaCache:
    top: GridTopology
    area: GridTopology
    nodes: tuple[int, ...]
    links: tuple[int, ...]
    node_row: dict[int, int]
    link_col: dict[int, int]
    d_full: np.ndarray


def _area_cache(obs: Observables) -> _AreaCache:
    top = obs.topology
    nodes = obs.area_nodes()
    links = obs.area_links()
    return _AreaCache(
        top=top,
        area=induced_subgraph(top, set(obs.v_h)),
        nodes=nodes,
        links=links,
        node_row={v: top.node_pos(v) for v in nodes},
        link_col={e: top.link_pos(e) for e in links},
        d_full=obs.d_tilde(),
    )


def _make_hyper(cache: _AreaCache, side: set[int], cut: tuple[int, ...]) -> HyperNode:
    rows = [cache.node_row[v] for v in side]
    d_u = {
        e: float(cache.d_full[rows, cache.link_col[e]].sum())
        for e in cut
    }
    return HyperNode(nodes=frozenset(side), boundary=tuple(sorted(cut)), d_u=d_u)


def hyper_nodes(obs: Observables, cut) -> tuple[HyperNode, HyperNode]:
    """Both hyper-nodes a 1- or 2-link cut splits the area into."""
    cache = _area_cache(obs)
    cut = tuple(sorted(set(cut)))
    side1, side2 = hyper_nodes_for_cut(cache.area, set(cut))
    return _make_hyper(cache, side1, cut), _make_hyper(cache, side2, cut)


# ---------------------------------------------------------------------------
# Algorithm: cut-based verification


def algorithm1(
    obs: Observables,
    est: EstimationResult,
    catalog: CutCatalog,
    eta: float = DEFAULT_ETA,
    connected: bool = False,
) -> VerificationLedger:
    """Verify links in 1- and 2-link cuts, growing knowledge as it goes.

    Bridges are processed first in id order; every link verified operational
    triggers a recovery attempt for its endpoints' injection changes (links
    already verified operational count as usable neighbor edges).  Cut pairs
    follow in lexicographic order.  In connected mode every identifiable
    bridge is certified outright and all in-area changes are known zero.
    """
    cache = _area_cache(obs)
    if set(est.link_order) != set(cache.links):
        raise ValueError("estimate and observables cover different link sets")
    ident = identifiable_links(obs)
    records = {
        e: LedgerRecord(
            link=e,
            estimated="failed" if e in est.f_hat else "operational",
            identifiable=e in ident,
        )
        for e in cache.links
    }
    if connected:
        delta_known = {v: 0.0 for v in cache.nodes}
    else:
        _, delta_known = recover_delta(obs)
    ledger = VerificationLedger(
        records=records, u_b=set(delta_known), delta_known=dict(delta_known)
    )

    top = cache.top
    node_gs = {
        v: node_g(v, top.injection(v), ledger.delta_known) for v in cache.nodes
    }
    link_tols = {
        e: IDENTIFIABLE_TOL / float(top.reactance[cache.link_col[e]])
        for e in cache.links
    }

    def bound(hyper: HyperNode, hypothesis: Mapping[int, bool]) -> float:
        states = ledger.known_states()
        states.update(hypothesis)
        return f_hat(hyper, states, node_gs, link_tols, connected=connected)

    def extend_u_b(v: int) -> None:
        if v in ledger.u_b:
            return
        neighbors = []
        for e in top.incident_links(v):
            s, t = top.endpoints[top.link_pos(e)]
            far = t if s == v else s
            if e in ledger.records:
                usable = (
                    e in ledger.e_v
                    and ledger.records[e].estimated == "operational"
                    and far in ledger.delta_known
                )
                if usable:
                    neighbors.append((top.injection(far), ledger.delta_known[far]))
            else:
                neighbors.append((top.injection(far), obs.delta_outside[far]))
        value = _ratio_recover(top.injection(v), neighbors)
        if value is not None:
            ledger.u_b.add(v)
            ledger.delta_known[v] = value
            node_gs[v] = node_g(v, top.injection(v), ledger.delta_known)

    def mark(link: int, tag: str) -> None:
        record = ledger.records[link]
        record.verified = True
        record.method = tag
        ledger.e_v.add(link)
        if record.estimated == "operational" and not connected:
            s, t = top.endpoints[top.link_pos(link)]
            for v in sorted((s, t)):
                extend_u_b(v)

    for e in sorted(catalog.bridges):
        if not records[e].identifiable:
            continue
        if connected:
            # With no island split there is no shed power at all, so the
            # margin for an identifiable bridge is always strict; the
            # inequality carries no information and is skipped outright.
            mark(e, "corollary-connected")
            continue
        side1, side2 = hyper_nodes_for_cut(cache.area, {e})
        h1 = _make_hyper(cache, side1, (e,))
        h2 = _make_hyper(cache, side2, (e,))
        contradiction = {e: records[e].estimated == "operational"}
        h1 = replace(h1, f_hat=bound(h1, contradiction))
        h2 = replace(h2, f_hat=bound(h2, contradiction))
        if verify_1cut(e, est, h1, h2, eta):
            mark(e, "cut1")

    for pair in sorted(catalog.two_edge_cuts):
        e1, e2 = pair
        if not records[e1].identifiable or not records[e2].identifiable:
            continue
        side1, side2 = hyper_nodes_for_cut(cache.area, set(pair))
        h1 = _make_hyper(cache, side1, pair)
        h2 = _make_hyper(cache, side2, pair)
        flags = verify_2cut(pair, est, h1, h2, eta, bound)
        n_failed = (records[e1].estimated == "failed") + (
            records[e2].estimated == "failed"
        )
        tag = ("cut2-thm3", "cut2-thm4", "cut2-thm5")[n_failed]
        for l in pair:
            if flags[l] and l not in ledger.e_v:
                mark(l, tag)
    return ledger


# ---------------------------------------------------------------------------
# LP certificates


@dataclass
class _GaleParts:
    links: tuple[int, ...]
    left: np.ndarray  # [A_D | A_x] row block per link
    g_d: np.ndarray
    x_values: dict[int, float]  # binary state per link (1.0 = failed)


def _gale_parts(
    obs: Observables,
    failed_links: frozenset[int],
    delta_known: Mapping[int, float],
    connected: bool,
) -> _GaleParts:
    cache = _area_cache(obs)
    top = cache.top
    rows = [cache.node_row[v] for v in cache.nodes]
    cols = [cache.link_col[e] for e in cache.links]
    d_t = cache.d_full[np.ix_(rows, cols)].T  # |E_H| x |V_H|
    n_links = len(cache.links)
    if connected:
        a_d = np.hstack([d_t, -d_t])
        g_d = np.zeros(2 * len(cache.nodes))
    else:
        p = np.array([top.injection(v) for v in cache.nodes])
        loads = np.flatnonzero(p <= 0.0)
        gens = np.flatnonzero(p > 0.0)
        plus = np.empty(len(cache.nodes))
        minus = np.empty(len(cache.nodes))
        for i, v in enumerate(cache.nodes):
            values = node_g(v, top.injection(v), delta_known)
            plus[i], minus[i] = values.g_plus, values.g_minus
        a_d = np.hstack(
            [d_t[:, loads], -d_t[:, loads], -d_t[:, gens], d_t[:, gens]]
        )
        g_d = np.concatenate([plus[loads], minus[loads], minus[gens], plus[gens]])
    eye = np.eye(n_links)
    left = np.hstack([a_d, -eye, eye])
    x_values = {e: 1.0 if e in failed_links else 0.0 for e in cache.links}
    return _GaleParts(links=cache.links, left=left, g_d=g_d, x_values=x_values)


def _assemble(
    parts: _GaleParts,
    link: int,
    q_m: bool,
    e_v: set[int] | frozenset[int],
    eta: float,
) -> tuple[np.ndarray, np.ndarray]:
    n_links = len(parts.links)
    g_x_lo = np.ones(n_links)
    g_x_hi = np.ones(n_links)
    for i, e in enumerate(parts.links):
        if e in e_v:
            g_x_lo[i] = parts.x_values[e]
            g_x_hi[i] = 1.0 - parts.x_values[e]
    w = np.zeros((n_links, 1))
    position = parts.links.index(link)
    w[position, 0] = 1.0 if q_m else -1.0
    g_w = (eta - 1.0) if q_m else -eta
    m = np.hstack([parts.left, w, np.ones((n_links, 1))])
    g = np.concatenate([parts.g_d, g_x_lo, g_x_hi, [g_w], [0.0]])
    return m, g


def build_gale(
    link: int,
    hypothesis: str,
    obs: Observables,
    est: EstimationResult,
    e_v: set[int] | frozenset[int],
    delta_known: Mapping[int, float],
    eta: float,
    connected: bool = False,
) -> GaleSystem:
    """Assemble the homogeneous test system for one unverified link.

    ``verify-failed`` tests a link estimated failed (a ray shows a false
    alarm was impossible); ``verify-operational`` tests one estimated
    operational (a ray shows a miss was impossible).  Verified links pin
    their certified state exactly; everything else enters at its worst
    bound.
    """
    if hypothesis not in (VERIFY_FAILED, VERIFY_OPERATIONAL):
        raise ValueError(f"unknown hypothesis {hypothesis!r}")
    if link in e_v:
        raise ValueError(f"link {link} is already verified")
    if link not in obs.e_h:
        raise ValueError(f"link {link} is not an area link")
    parts = _gale_parts(obs, est.f_hat, delta_known, connected)
    m, g = _assemble(parts, link, hypothesis == VERIFY_OPERATIONAL, e_v, eta)
    return GaleSystem(m=m, g=g, link=link, hypothesis=hypothesis)


def algorithm2(
    obs: Observables,
    est: EstimationResult,
    ledger: VerificationLedger,
    eta: float = DEFAULT_ETA,
    connected: bool = False,
) -> VerificationLedger:
    """Extend a cut-verification ledger with LP certificates to a fixpoint.

    Each pass tests every unverified identifiable link against the same
    knowledge snapshot; additions apply between passes and the loop stops
    when a full pass adds nothing.  Solver breakdowns leave the link
    unverified and are counted, never raised.
    """
    out = ledger.clone()
    parts = _gale_parts(obs, est.f_hat, out.delta_known, connected)
    todo = [e for e in parts.links if out.records[e].identifiable]
    while True:
        added: list[tuple[int, np.ndarray]] = []
        for e in todo:
            if e in out.e_v:
                continue
            q_m = out.records[e].estimated == "operational"
            m, g = _assemble(parts, e, q_m, out.e_v, eta)
            try:
                feasible, ray = strict_homogeneous_feasible(m, g)
            except NumericalFailure:
                out.numerical_failures += 1
                continue
            if feasible:
                added.append((e, ray))
        if not added:
            break
        for e, ray in added:
            record = out.records[e]
            record.verified = True
            record.method = "alg2-lp"
            out.e_v.add(e)
            out.witnesses[e] = ray
    return out


# ---------------------------------------------------------------------------
# ground-truth checkers (evaluation only)


def guaranteed_by_gale(
    link: int,
    obs: Observables,
    failed: frozenset[int],
    delta_true: Mapping[int, float],
    eta: float,
    connected: bool = False,
) -> bool:
    """Whether the estimate of one link was certain, given ground truth.

    Builds the single-mistake system with exact coefficients: a feasible
    ray means the estimator could not have gotten this link wrong under
    any circumstances consistent with the observables.
    """
    if link not in obs.e_h:
        raise ValueError(f"link {link} is not an area link")
    if not connected:
        missing = [v for v in obs.area_nodes() if v not in delta_true]
        if missing:
            raise ValueError(f"ground-truth changes missing for nodes {missing}")
    parts = _gale_parts(obs, failed, delta_true, connected)
    m, g = _assemble(parts, link, link in failed, set(parts.links), eta)
    feasible, _ = strict_homogeneous_feasible(m, g)
    return feasible


def guaranteed_by_hypernode(
    link: int,
    hyper: HyperNode,
    topology: GridTopology,
    failed: frozenset[int],
    delta_true: Mapping[int, float],
    eta: float,
) -> bool:
    """Exact cut-condition check for one link, given ground truth.

    Evaluates the applicable set of closed-form conditions (uniform flow
    direction, no same-direction operational boundary link, strict margin)
    with the exact shed power of the hyper-node.
    """
    d_link = hyper.d_u[link]
    if d_link == 0.0:
        return False
    failed_boundary = [e for e in hyper.boundary if e in failed]
    g_plus_total = 0.0
    g_minus_total = 0.0
    for u in sorted(hyper.nodes):
        values = node_g(u, topology.injection(u), delta_true)
        g_plus_total += values.g_plus
        g_minus_total += values.g_minus
    if failed_boundary:
        shed = (
            g_plus_total
            if any(hyper.d_u[e] < 0.0 for e in failed_boundary)
            else g_minus_total
        )
    else:
        shed = (
            g_plus_total
            if any(hyper.d_u[e] > 0.0 for e in hyper.boundary)
            else g_minus_total
        )
    same_direction = {
        e
        for e in hyper.boundary
        if e not in failed
        and any(hyper.d_u[l] * hyper.d_u[e] > 0.0 for l in failed_boundary)
    }
    eps = _eps_strict(shed, d_link)
    if link in failed:
        if any(hyper.d_u[e] * d_link <= 0.0 for e in failed_boundary):
            return False
        if same_direction:
            return False
        return shed + (eta - 1.0) * abs(d_link) < -eps
    operational = [e for e in hyper.boundary if e not in failed]
    for i, a in enumerate(operational):
        for b in operational[i + 1 :]:
            if hyper.d_u[a] * hyper.d_u[b] <= 0.0:
                return False
    if same_direction:
        return False
    return shed - eta * abs(d_link) < -eps
