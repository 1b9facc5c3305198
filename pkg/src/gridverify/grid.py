"""Graph and linear-algebra substrate for DC power grids.

Topology, admittance/incidence matrices, DC power-flow solves, island
detection, and cut enumeration (bridges, 2-edge cuts, hyper-node sides).
All angles are radians in the DC approximation; injections are MW.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GridTopology",
    "CutCatalog",
    "UnbalancedInjection",
    "SingularSystem",
    "NotACut",
    "build_admittance",
    "build_incidence",
    "solve_dc_power_flow",
    "link_flows",
    "islands",
    "without_links",
    "induced_subgraph",
    "enumerate_cuts",
    "hyper_nodes_for_cut",
]


class UnbalancedInjection(ValueError):
    """A connected component's injections do not sum to ~0."""


class SingularSystem(RuntimeError):
    """The reduced power-flow system could not be solved accurately."""


class NotACut(ValueError):
    """The given link set does not disconnect its component."""


@dataclass(frozen=True)
class GridTopology:
    """An undirected grid graph with injections and per-link reactances.

    Nodes and links carry external integer ids; positions in the aligned
    arrays follow the sorted id order.  Each link has a fixed arbitrary
    orientation ``s -> t`` used for incidence signs and flow signs.
    Nodes with ``p_v > 0`` are generators, the rest (including ``p_v = 0``)
    are loads.
    """

    node_ids: tuple[int, ...]
    injections: np.ndarray  # MW, aligned with node_ids
    link_ids: tuple[int, ...]
    endpoints: tuple[tuple[int, int], ...]  # (s, t) node ids, aligned
    reactance: np.ndarray  # per-unit, aligned with link_ids

    # id -> position caches (not part of equality)
    _npos: dict[int, int] = field(default_factory=dict, compare=False, repr=False)
    _lpos: dict[int, int] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if list(self.node_ids) != sorted(self.node_ids):
            raise ValueError("node ids must be sorted and unique")
        if list(self.link_ids) != sorted(self.link_ids):
            raise ValueError("link ids must be sorted and unique")
        if np.any(np.asarray(self.reactance) <= 0):
            raise ValueError("link reactances must be positive")
        seen = set()
        for s, t in self.endpoints:
            if s == t:
                raise ValueError(f"self-loop at node {s}")
            key = (min(s, t), max(s, t))
            if key in seen:
                raise ValueError(f"parallel link {key} (merge at ingestion)")
            seen.add(key)
        self._npos.update({n: i for i, n in enumerate(self.node_ids)})
        self._lpos.update({l: i for i, l in enumerate(self.link_ids)})

    # -- lookups ---------------------------------------------------------
    def node_pos(self, node_id: int) -> int:
        return self._npos[node_id]

    def link_pos(self, link_id: int) -> int:
        return self._lpos[link_id]

    def injection(self, node_id: int) -> float:
        return float(self.injections[self._npos[node_id]])

    def is_generator(self, node_id: int) -> bool:
        return self.injection(node_id) > 0.0

    def incident_links(self, node_id: int) -> list[int]:
        return [
            l for l, (s, t) in zip(self.link_ids, self.endpoints)
            if s == node_id or t == node_id
        ]

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_links(self) -> int:
        return len(self.link_ids)


@dataclass(frozen=True)
class CutCatalog:
    """Single links (bridges) and link pairs whose removal disconnects H."""

    bridges: frozenset[int]
    two_edge_cuts: frozenset[tuple[int, int]]  # pairs sorted ascending


# ---------------------------------------------------------------------------
# matrices


def build_admittance(topology: GridTopology) -> np.ndarray:
    """Weighted-Laplacian admittance matrix B (|V| x |V|).

    Off-diagonal (u, v) is -1/r_uv for each link, diagonal is the negative
    row sum, so B = D @ Gamma @ D.T with Gamma = diag{1/r_e}.
    """
    n = topology.n_nodes
    b = np.zeros((n, n))
    for (s, t), r in zip(topology.endpoints, topology.reactance):
        i, j = topology.node_pos(s), topology.node_pos(t)
        w = 1.0 / r
        b[i, j] -= w
        b[j, i] -= w
        b[i, i] += w
        b[j, j] += w
    return b


def build_incidence(topology: GridTopology) -> np.ndarray:
    """Node-link incidence D (|V| x |E|): +1 at the source, -1 at the target."""
    d = np.zeros((topology.n_nodes, topology.n_links))
    for col, (s, t) in enumerate(topology.endpoints):
        d[topology.node_pos(s), col] = 1.0
        d[topology.node_pos(t), col] = -1.0
    return d


# ---------------------------------------------------------------------------
# power flow


def _components(topology: GridTopology, removed: frozenset[int] = frozenset()) -> list[list[int]]:
    """Connected components as sorted node-id lists, ordered by smallest id."""
    adj: dict[int, list[int]] = {n: [] for n in topology.node_ids}
    for l, (s, t) in zip(topology.link_ids, topology.endpoints):
        if l in removed:
            continue
        adj[s].append(t)
        adj[t].append(s)
    seen: set[int] = set()
    comps: list[list[int]] = []
    for start in topology.node_ids:  # ascending -> components by smallest id
        if start in seen:
            continue
        comp = [start]
        seen.add(start)
        stack = [start]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    comp.append(v)
                    stack.append(v)
        comp.sort()
        comps.append(comp)
    return comps


def solve_dc_power_flow(topology: GridTopology, injections: np.ndarray) -> np.ndarray:
    """Solve B theta = p per connected component.

    The lowest node id of each component is its reference (theta = 0); a
    component with no nonzero injections gets theta identically 0.  Raises
    UnbalancedInjection when a component's injections do not cancel, and
    SingularSystem if the direct solve fails to reach the residual bound
    1e-8 * max(1, ||p||_inf).
    """
    p = np.asarray(injections, dtype=float)
    if p.shape != (topology.n_nodes,):
        raise ValueError("injection vector shape mismatch")
    scale = max(1.0, float(np.abs(p).max()) if p.size else 1.0)
    b = build_admittance(topology)
    theta = np.zeros(topology.n_nodes)
    for comp in _components(topology):
        idx = np.array([topology.node_pos(n) for n in comp])
        p_c = p[idx]
        if not np.any(p_c != 0.0):
            continue  # dead island: theta stays 0
        if abs(p_c.sum()) > 1e-6 * scale:
            raise UnbalancedInjection(
                f"component starting at node {comp[0]} has net injection {p_c.sum():.3e}"
            )
        # Ground the reference (lowest id = first of the sorted component)
        # and solve the reduced system directly.
        red = idx[1:]
        if red.size:
            b_red = b[np.ix_(red, red)]
            try:
                theta[red] = np.linalg.solve(b_red, p[red])
            except np.linalg.LinAlgError as exc:
                raise SingularSystem(str(exc)) from None
    resid = float(np.abs(b @ theta - p).max()) if p.size else 0.0
    if resid > 1e-8 * scale:
        raise SingularSystem(f"power-flow residual {resid:.3e} exceeds tolerance")
    return theta


def link_flows(topology: GridTopology, theta: np.ndarray) -> np.ndarray:
    """Per-link MW flows (theta_s - theta_t)/r_st, signed by orientation."""
    flows = np.empty(topology.n_links)
    for col, ((s, t), r) in enumerate(zip(topology.endpoints, topology.reactance)):
        flows[col] = (theta[topology.node_pos(s)] - theta[topology.node_pos(t)]) / r
    return flows


def islands(topology: GridTopology, removed_links: set[int]) -> list[list[int]]:
    """Connected components of (V, E \\ removed_links), by smallest node id."""
    unknown = set(removed_links) - set(topology.link_ids)
    if unknown:
        raise ValueError(f"removed links not in topology: {sorted(unknown)}")
    return _components(topology, frozenset(removed_links))


def without_links(topology: GridTopology, removed: set[int]) -> GridTopology:
    """Copy of the topology with the given links deleted (nodes kept)."""
    keep = [
        (l, e, r)
        for l, e, r in zip(topology.link_ids, topology.endpoints, topology.reactance)
        if l not in removed
    ]
    return GridTopology(
        node_ids=topology.node_ids,
        injections=topology.injections,
        link_ids=tuple(l for l, _, _ in keep),
        endpoints=tuple(e for _, e, _ in keep),
        reactance=np.array([r for _, _, r in keep]),
    )


def induced_subgraph(topology: GridTopology, nodes: set[int]) -> GridTopology:
    """Node-induced subgraph keeping ids, injections, and orientations."""
    keep = sorted(nodes)
    missing = nodes - set(topology.node_ids)
    if missing:
        raise ValueError(f"nodes not in topology: {sorted(missing)}")
    lids, ends, rs = [], [], []
    for l, (s, t), r in zip(topology.link_ids, topology.endpoints, topology.reactance):
        if s in nodes and t in nodes:
            lids.append(l)
            ends.append((s, t))
            rs.append(r)
    return GridTopology(
        node_ids=tuple(keep),
        injections=np.array([topology.injection(n) for n in keep]),
        link_ids=tuple(lids),
        endpoints=tuple(ends),
        reactance=np.array(rs),
    )


# ---------------------------------------------------------------------------
# cuts


def _bridge_ids(topology: GridTopology, skip: int | None = None) -> set[int]:
    """Bridges of the graph (minus link `skip`), iterative lowpoint DFS."""
    adj: dict[int, list[tuple[int, int]]] = {n: [] for n in topology.node_ids}
    for l, (s, t) in zip(topology.link_ids, topology.endpoints):
        if l == skip:
            continue
        adj[s].append((t, l))
        adj[t].append((s, l))
    disc: dict[int, int] = {}
    low: dict[int, int] = {}
    out: set[int] = set()
    timer = 0
    for root in topology.node_ids:
        if root in disc:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack: list[tuple[int, int, int]] = [(root, -1, 0)]
        while stack:
            u, pe, i = stack[-1]
            if i < len(adj[u]):
                stack[-1] = (u, pe, i + 1)
                v, l = adj[u][i]
                if l == pe:
                    continue
                if v not in disc:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, l, 0))
                else:
                    low[u] = min(low[u], disc[v])
            else:
                stack.pop()
                if stack:
                    pu = stack[-1][0]
                    low[pu] = min(low[pu], low[u])
                    if low[u] > disc[pu]:
                        out.add(pe)
    return out


def enumerate_cuts(h: GridTopology) -> CutCatalog:
    """Bridges of H plus all non-bridge pairs that jointly disconnect it.

    Pairs are found by re-running bridge detection on H minus each
    non-bridge link: any surviving link that becomes a bridge forms a
    2-edge cut with the removed one.
    """
    bridges = _bridge_ids(h)
    non_bridge = [l for l in h.link_ids if l not in bridges]
    pairs: set[tuple[int, int]] = set()
    for e1 in non_bridge:
        for e2 in _bridge_ids(h, skip=e1):
            if e2 in bridges:
                continue  # pairing with a bridge is not a *joint* cut
            pairs.add((min(e1, e2), max(e1, e2)))
    return CutCatalog(bridges=frozenset(bridges), two_edge_cuts=frozenset(pairs))


def _boundary(topology: GridTopology, side: set[int]) -> set[int]:
    """Links of `topology` with exactly one endpoint inside `side`."""
    return {
        l for l, (s, t) in zip(topology.link_ids, topology.endpoints)
        if (s in side) != (t in side)
    }


def hyper_nodes_for_cut(h: GridTopology, cut: set[int]) -> tuple[set[int], set[int]]:
    """The two node sets a 1- or 2-link cut separates H's component into.

    Both returned sides have the cut as their exact link boundary in H;
    NotACut is raised when removal does not split the component (or, for a
    pair, when the two links do not straddle the same split).
    """
    cut = set(cut)
    if not cut or len(cut) > 2 or not cut <= set(h.link_ids):
        raise ValueError(f"cut must be 1 or 2 links of H, got {sorted(cut)}")
    first = min(cut)
    s, t = h.endpoints[h.link_pos(first)]

    comps = _components(h, frozenset(cut))
    by_node = {n: i for i, comp in enumerate(comps) for n in comp}
    if by_node[s] == by_node[t]:
        raise NotACut(f"removing {sorted(cut)} leaves {s} and {t} connected")
    u1 = set(comps[by_node[s]])
    u2 = set(comps[by_node[t]])
    if _boundary(h, u1) != cut or _boundary(h, u2) != cut:
        raise NotACut(
            f"links {sorted(cut)} do not form the exact boundary of a split"
        )
    return u1, u2
