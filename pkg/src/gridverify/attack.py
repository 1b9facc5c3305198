"""Joint cyber-physical attack simulation.

Grows attacked areas by seeded BFS, samples failure sets, applies the
proportional load-shedding / generation-reduction policy per post-attack
island, and assembles the quantities the estimator and verifier consume:
theta', p', delta = p - p', and the hypothetical-flow matrix D~.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import (
    GridTopology,
    build_incidence,
    islands,
    solve_dc_power_flow,
    without_links,
)

__all__ = [
    "AttackScenario",
    "PostAttackState",
    "InsufficientLinks",
    "POLICY_VERSION",
    "induced_links",
    "generate_attack_area",
    "sample_failures",
    "apply_policy",
    "compute_post_attack",
    "filter_identifiable",
]

# Identifier recorded in scenario files for the shedding rule used here.
POLICY_VERSION = "proportional-1"

# Links whose post-attack angle difference falls below this are treated as
# carrying no information (their state cannot be told apart).
IDENTIFIABLE_TOL = 1e-9


class InsufficientLinks(ValueError):
    """Requested more failures than the area has links."""


@dataclass(frozen=True)
class AttackScenario:
    """An attacked area (node-induced) and the links failed inside it."""

    v_h: frozenset[int]
    e_h: frozenset[int]
    f: frozenset[int]
    seed: int | None = None

    def __post_init__(self):
        if not self.f <= self.e_h:
            raise ValueError("failed links must lie inside the attacked area")


@dataclass(frozen=True)
class PostAttackState:
    """Post-attack operating point plus derived attack quantities.

    d_tilde is D * Gamma * diag(D^T theta') over the FULL link set: for an
    operational link its column carries the actual post-attack flow at the
    endpoints, for a failed link the hypothetical flow had it survived.
    """

    theta_post: np.ndarray
    p_post: np.ndarray
    delta: np.ndarray
    island_partition: list[list[int]]
    d_tilde: np.ndarray


def induced_links(topology: GridTopology, nodes: frozenset[int]) -> frozenset[int]:
    return frozenset(
        l
        for l, (s, t) in zip(topology.link_ids, topology.endpoints)
        if s in nodes and t in nodes
    )


def generate_attack_area(
    topology: GridTopology, target_size: int, rng_seed
) -> AttackScenario:
    """BFS-grown area from a uniformly random start node.

    The queue is FIFO with neighbors enqueued in ascending node id; the
    area is the first `target_size` nodes in enqueue order.
    """
    if not 1 <= target_size <= topology.n_nodes:
        raise ValueError(f"target size {target_size} out of range")
    rng = np.random.default_rng(rng_seed)
    adj: dict[int, list[int]] = {n: [] for n in topology.node_ids}
    for s, t in topology.endpoints:
        adj[s].append(t)
        adj[t].append(s)
    for n in adj:
        adj[n].sort()

    start = topology.node_ids[int(rng.integers(topology.n_nodes))]
    order = [start]
    seen = {start}
    head = 0
    while len(order) < target_size and head < len(order):
        u = order[head]
        head += 1
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                order.append(v)
    v_h = frozenset(order[:target_size])
    return AttackScenario(v_h=v_h, e_h=induced_links(topology, v_h), f=frozenset())


def sample_failures(scenario: AttackScenario, k: int, rng_seed) -> AttackScenario:
    """Fail a uniform k-subset of the area's links."""
    if k > len(scenario.e_h):
        raise InsufficientLinks(f"cannot fail {k} of {len(scenario.e_h)} links")
    rng = np.random.default_rng(rng_seed)
    pool = sorted(scenario.e_h)
    chosen = rng.choice(len(pool), size=k, replace=False) if k else []
    return AttackScenario(
        v_h=scenario.v_h,
        e_h=scenario.e_h,
        f=frozenset(pool[i] for i in chosen),
        seed=scenario.seed,
    )


def apply_policy(p_island: np.ndarray) -> np.ndarray:
    """Proportional shedding for one island's injections.

    Only the deficient side changes: if generation falls short every load
    is scaled by Gen/Load, if load falls short every generator is scaled
    by Load/Gen, and an island missing one side entirely is zeroed out.
    """
    p = np.asarray(p_island, dtype=float)
    gen_mask = p > 0
    gen = float(p[gen_mask].sum())
    load = float(-p[~gen_mask].sum())
    out = p.copy()
    if gen == load:
        return out
    if gen == 0.0 or load == 0.0:
        return np.zeros_like(out)
    if gen < load:
        out[~gen_mask] *= gen / load
    else:
        out[gen_mask] *= load / gen
    return out


def compute_post_attack(
    topology: GridTopology, scenario: AttackScenario
) -> PostAttackState:
    """Partition, shed, re-solve, and assemble delta and D~."""
    partition = islands(topology, set(scenario.f))
    p_post = topology.injections.astype(float).copy()
    for comp in partition:
        idx = np.array([topology.node_pos(n) for n in comp])
        p_post[idx] = apply_policy(p_post[idx])

    surviving = without_links(topology, set(scenario.f))
    theta_post = solve_dc_power_flow(surviving, p_post)

    # Hypothetical-flow matrix over ALL links, failed ones included.
    d = build_incidence(topology)
    per_link = (d.T @ theta_post) / topology.reactance
    d_tilde = d * per_link[np.newaxis, :]

    return PostAttackState(
        theta_post=theta_post,
        p_post=p_post,
        delta=topology.injections - p_post,
        island_partition=partition,
        d_tilde=d_tilde,
    )


def filter_identifiable(
    topology: GridTopology, scenario: AttackScenario, post: PostAttackState
) -> frozenset[int]:
    """Area links whose endpoints kept distinct post-attack angles."""
    out = []
    for l in scenario.e_h:
        s, t = topology.endpoints[topology.link_pos(l)]
        gap = post.theta_post[topology.node_pos(s)] - post.theta_post[topology.node_pos(t)]
        if abs(gap) > IDENTIFIABLE_TOL:
            out.append(l)
    return frozenset(out)
