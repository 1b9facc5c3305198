#!/usr/bin/env python3
"""Generate ``bench300.m``, the bundled synthetic 300-bus test case.

The repository needs a desk-scale transmission-grid case that is freely
redistributable.  The classic 300-bus benchmark itself is not vendored here,
so this script builds a *synthetic* stand-in with the same global shape:

* 300 buses, 411 distinct transmission links (413 in-service branch rows —
  two parallel pairs — plus 2 out-of-service rows, exercising the parser);
* a meshed near-cubic fabric (thinned planar triangulation) decorated with
  pendant spurs piled into one district plus a scatter of bridgeless loop
  taps — the heavy / lightly-tapped / clean area mix of real grids;
* ~23.5 GW of load spread heavy-tailed over ~200 buses, 69 generators,
  lossless-DC imbalance left for slack absorption at ingestion;
* non-consecutive bus numbering (1..250, 9001..9050).

The structural knobs (spur counts and placement, district sparsity, fabric
through-nodes) are calibrated so that the probability that the grid stays
connected after k random link failures inside a random 20-node breadth-first
area is close to the behavior reported for the real 300-bus benchmark under
the same protocol: approximately 74 / 51 / 33 / 19 % for k = 2 / 4 / 6 / 8.
The frozen build measures 75.2 / 53.3 / 33.4 / 16.5 % over 10000 trials.

Usage:
    python tools/make_bench300.py --measure 4000      # print calibration stats
    python tools/make_bench300.py --out src/gridverify/data/bench300.m

Deterministic: a fixed seed is baked in; rerunning reproduces the file
byte-for-byte.  Knobs are overridable via BENCH_<NAME> env vars for
calibration sweeps; the defaults are the frozen calibration.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

N_NODES = 300
N_LINKS = 411
# Calibrated knobs (see --measure).  The grid is a meshed near-cubic fabric
# (thinned Delaunay triangulation, sparser inside the spur district) decorated
# with pendant spurs: most piled deep into one district, a few scattered over
# a mid band — the heavy/light/clean area mix of a real transmission grid.
# Overridable via BENCH_<NAME> env vars for calibration sweeps.
import os as _os


def _knob(name: str, default):
    raw = _os.environ.get(f"BENCH_{name}")
    return type(default)(raw) if raw is not None else default


SEED = _knob("SEED", 12)
PENDANT_SINGLE = _knob("PENDANT_SINGLE", 30)
PENDANT_CHAIN2 = _knob("PENDANT_CHAIN2", 0)
# Loop taps: two nodes tied to one host as a triangle (host-a, host-b, a-b).
# Bridgeless — they survive any single failure — but the two host links form
# a 2-cut, which is what keeps the connectivity curve falling gently at the
# larger failure counts.
PENDANT_TAP = _knob("PENDANT_TAP", 12)
FABRIC_N = N_NODES - PENDANT_SINGLE - 2 * PENDANT_CHAIN2 - 2 * PENDANT_TAP
FABRIC_LINKS = N_LINKS - PENDANT_SINGLE - 2 * PENDANT_CHAIN2 - 3 * PENDANT_TAP
DEG2_TARGET = _knob("DEG2_TARGET", 8)
SPUR_X = _knob("SPUR_X", 0.30)
DISTRICT_EDGE_FLOOR = _knob("DISTRICT_EDGE_FLOOR", 85)
HOST_X = _knob("HOST_X", 0.18)
LIGHT_X = _knob("LIGHT_X", 0.60)
PENDANT_LIGHT = _knob("PENDANT_LIGHT", 0)

GEN_TOTAL_MW = 23935.4
LOAD_TOTAL_MW = 23525.85
N_GENS = 69
N_LOAD_BUSES = 205


def _bridges(n: int, edges: list[tuple[int, int]]) -> set[int]:
    """Bridge edge indices, iterative lowpoint DFS (tool-local copy)."""
    adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for i, (u, v) in enumerate(edges):
        adj[u].append((v, i))
        adj[v].append((u, i))
    disc = [-1] * n
    low = [0] * n
    out: set[int] = set()
    timer = 0
    for root in range(n):
        if disc[root] >= 0:
            continue
        stack = [(root, -1, iter(adj[root]))]
        disc[root] = low[root] = timer
        timer += 1
        while stack:
            u, pe, it = stack[-1]
            adv = False
            for v, ei in it:
                if ei == pe:
                    continue
                if disc[v] < 0:
                    disc[v] = low[v] = timer
                    timer += 1
                    stack.append((v, ei, iter(adj[v])))
                    adv = True
                    break
                low[u] = min(low[u], disc[v])
            if not adv:
                stack.pop()
                if stack:
                    pu = stack[-1][0]
                    low[pu] = min(low[pu], low[u])
                    if low[u] > disc[pu]:
                        out.add(pe)
        # (lowpoint update for the parent edge happens on pop above)
    return out


def build_graph(rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Return (points, edges) — edges as an array of index pairs (u < v)."""
    from scipy.spatial import Delaunay

    pts = rng.random((N_NODES, 2))

    # --- Meshed fabric: Delaunay triangulation thinned down to FABRIC_LINKS
    # edges (longest removable edge first, degree floor 2, fabric stays
    # connected and bridge-free), then repaired toward near-cubic.
    tri = Delaunay(pts[:FABRIC_N])
    fabric_edges: set[tuple[int, int]] = set()
    for simplex in tri.simplices:
        for a in range(3):
            u, v = int(simplex[a]), int(simplex[(a + 1) % 3])
            fabric_edges.add((min(u, v), max(u, v)))
    deg = np.zeros(FABRIC_N, int)
    for u, v in fabric_edges:
        deg[u] += 1
        deg[v] += 1
    in_district = pts[:FABRIC_N, 0] < SPUR_X

    def dist2(u: int, v: int) -> float:
        return float(((pts[u] - pts[v]) ** 2).sum())

    def removable() -> list[tuple[int, int]]:
        """Non-bridge edges droppable without pushing a node below degree 2.
        District-internal edges come first until the district is down to
        DISTRICT_EDGE_FLOOR of them (the spur district stays sparser than the
        clean mesh, like real subtransmission), then longest first."""
        edges_sorted = sorted(fabric_edges)
        bridge_ids = _bridges(FABRIC_N, edges_sorted)
        bridges = {edges_sorted[i] for i in bridge_ids}
        n_district = sum(
            1 for u, v in fabric_edges if in_district[u] and in_district[v]
        )
        first = n_district > DISTRICT_EDGE_FLOOR
        cand = [
            e for e in fabric_edges
            if deg[e[0]] > 2 and deg[e[1]] > 2 and e not in bridges
        ]
        cand.sort(
            key=lambda e: (
                not (first and in_district[e[0]] and in_district[e[1]]),
                -dist2(*e),
            )
        )
        return cand

    def drop(e: tuple[int, int]) -> None:
        fabric_edges.remove(e)
        deg[e[0]] -= 1
        deg[e[1]] -= 1

    while len(fabric_edges) > FABRIC_LINKS:
        cand = removable()
        if not cand:
            raise RuntimeError(f"thinning stalled at {len(fabric_edges)} edges")
        drop(cand[0])

    # At this link count the triangulation's surviving high-degree hubs are
    # balanced by an equal surplus of degree-2 nodes.  Each repair round ties
    # the two closest degree-2 nodes *outside the district* together and drops
    # a removable hub edge, until at most DEG2_TARGET through-nodes remain in
    # the clean region.  District through-nodes are left alone — that region
    # is meant to be weak.
    for _ in range(10 * FABRIC_N):
        two = [int(n) for n in np.flatnonzero(deg == 2) if not in_district[n]]
        if len(two) <= DEG2_TARGET:
            break
        best = None
        for a in range(len(two)):
            for b in range(a + 1, len(two)):
                u, v = min(two[a], two[b]), max(two[a], two[b])
                if (u, v) in fabric_edges:
                    continue
                if best is None or dist2(u, v) < dist2(*best):
                    best = (u, v)
        if best is None:
            break
        hub_cand = [
            e for e in removable()
            if max(deg[e[0]], deg[e[1]]) >= 4 and min(deg[e[0]], deg[e[1]]) >= 3
        ]
        if not hub_cand:
            break
        fabric_edges.add(best)
        deg[best[0]] += 1
        deg[best[1]] += 1
        drop(hub_cand[0])
    if len(fabric_edges) != FABRIC_LINKS:
        raise RuntimeError(f"repair drifted to {len(fabric_edges)} edges")
    n2 = sum(1 for n in np.flatnonzero(deg == 2) if not in_district[n])
    if n2 > DEG2_TARGET + 8:
        raise RuntimeError(f"repair stalled with {n2} clean degree-2 nodes")

    # --- Pendant spurs: single nodes and 2-node chains hung off fabric nodes
    # in one geographic district (x < SPUR_X).  Clustering the spurs makes the
    # grid heterogeneous the way real ones are: blackout areas grown inside the
    # clean mesh see no bridges at all, areas grown in the spur district see
    # several — which is what spreads the connectivity curve out over |F|.
    edges = sorted(fabric_edges)
    # Most spurs pile into the deep district (x < HOST_X); a light scatter of
    # singles covers the mid band, so areas come in three robustness classes:
    # spur-heavy, lightly tapped, and untouched mesh.
    n_heavy = PENDANT_SINGLE - PENDANT_LIGHT
    hosts_heavy = [n for n in range(FABRIC_N) if pts[n, 0] < HOST_X]
    hosts_light = [n for n in range(FABRIC_N) if HOST_X <= pts[n, 0] < LIGHT_X]
    # Up to two spurs may share a host (substations often carry several taps).
    heavy = rng.choice(hosts_heavy * 2, size=n_heavy + PENDANT_CHAIN2, replace=False)
    light = rng.choice(hosts_light, size=PENDANT_LIGHT + PENDANT_TAP, replace=False)
    nxt = FABRIC_N
    for j in range(n_heavy):
        edges.append((int(heavy[j]), nxt))
        nxt += 1
    for j in range(PENDANT_LIGHT):
        edges.append((int(light[j]), nxt))
        nxt += 1
    for j in range(PENDANT_CHAIN2):
        root = int(heavy[n_heavy + j])
        edges.append((root, nxt))
        edges.append((nxt, nxt + 1))
        nxt += 2
    for j in range(PENDANT_TAP):
        root = int(light[PENDANT_LIGHT + j])
        edges.append((root, nxt))
        edges.append((root, nxt + 1))
        edges.append((nxt, nxt + 1))
        nxt += 2
    if len(edges) != N_LINKS or nxt != N_NODES:
        raise RuntimeError(f"got {len(edges)} links / {nxt} nodes")
    return pts, np.array(edges)


def bfs_area(adj: list[list[int]], start: int, size: int) -> list[int]:
    """First `size` nodes in BFS order from `start`, neighbors by ascending id."""
    seen = {start}
    out = [start]
    queue = [start]
    while queue and len(out) < size:
        u = queue.pop(0)
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                out.append(v)
                queue.append(v)
                if len(out) == size:
                    break
    return out


def measure(edges: np.ndarray, trials: int, rng: np.random.Generator) -> None:
    """Print the connectivity profile of the area/failure protocol."""
    adj: list[list[int]] = [[] for _ in range(N_NODES)]
    for i, (u, v) in enumerate(edges):
        adj[u].append(v)
        adj[v].append(u)
    for a in adj:
        a.sort()
    eidx = {}
    for i, (u, v) in enumerate(edges):
        eidx[(u, v)] = i

    import collections

    def connected_after(removed: set[int]) -> bool:
        seen = [False] * N_NODES
        seen[0] = True
        dq = collections.deque([0])
        n = 1
        while dq:
            u = dq.popleft()
            for v in adj[u]:
                if not seen[v] and eidx[(min(u, v), max(u, v))] not in removed:
                    seen[v] = True
                    n += 1
                    dq.append(v)
        return n == N_NODES

    # Per-area bridge count (bridges of the full graph inside E_H) drives the
    # split diagnostics: "clean" areas contain none.
    all_edges = [tuple(e) for e in edges]
    gbridges = {all_edges[i] for i in _bridges(N_NODES, all_edges)}

    sizes, nbridge = [], []
    for k in (2, 4, 6, 8):
        ok = okc = oks = nc = ns = 0
        for _ in range(trials):
            start = int(rng.integers(N_NODES))
            area = set(bfs_area(adj, start, 20))
            e_h = [eidx[(u, v)] for (u, v) in eidx if u in area and v in area]
            sizes.append(len(e_h))
            b_in = sum(1 for (u, v) in eidx if u in area and v in area
                       and (u, v) in gbridges)
            nbridge.append(b_in)
            f = rng.choice(len(e_h), size=k, replace=False)
            good = connected_after({e_h[i] for i in f})
            ok += good
            if b_in == 0:
                nc += 1
                okc += good
            else:
                ns += 1
                oks += good
        pc = 100.0 * okc / max(nc, 1)
        ps = 100.0 * oks / max(ns, 1)
        print(
            f"k={k}: connected {100.0 * ok / trials:.2f}%"
            f"   [clean {pc:.1f}% x{nc}  spur {ps:.1f}% x{ns}]"
        )
    print(f"mean |E_H| = {np.mean(sizes):.2f}, mean bridges-in-area = "
          f"{np.mean(nbridge):.2f}")


def emit(edges: np.ndarray, rng: np.random.Generator, path: str) -> None:
    ids = np.concatenate([np.arange(1, 251), np.arange(9001, 9051)])

    deg = np.zeros(N_NODES, int)
    for u, v in edges:
        deg[u] += 1
        deg[v] += 1

    # Generators prefer well-connected buses; sizes heavy-tailed.
    w = (deg.astype(float)) ** 1.5
    gen_buses = rng.choice(N_NODES, size=N_GENS, replace=False, p=w / w.sum())
    pg = rng.lognormal(0.0, 0.9, N_GENS)
    pg *= GEN_TOTAL_MW / pg.sum()

    load_buses = rng.choice(N_NODES, size=N_LOAD_BUSES, replace=False)
    pd = rng.lognormal(0.0, 1.0, N_LOAD_BUSES)
    pd *= LOAD_TOTAL_MW / pd.sum()

    pd_at = np.zeros(N_NODES)
    pd_at[load_buses] = pd
    pg_at = np.zeros(N_NODES)
    pg_at[gen_buses] = pg
    slack = int(gen_buses[np.argmax(pg)])

    x = np.exp(rng.uniform(np.log(0.002), np.log(0.12), len(edges)))

    rows = []
    for i, (u, v) in enumerate(edges):
        rows.append((ids[u], ids[v], x[i], 1))
    # Two parallel pairs and two dead rows: ingestion must merge/drop these.
    rows.append((rows[50][0], rows[50][1], rows[50][2] * 1.8, 1))
    rows.append((rows[200][0], rows[200][1], rows[200][2] * 2.5, 1))
    rows.append((rows[10][0], rows[10][1], rows[10][2] * 3.0, 0))
    rows.append((ids[5], ids[250], 0.0444, 0))

    lines = [
        "function mpc = bench300",
        "% BENCH300  Synthetic 300-bus transmission test system.",
        "%",
        "%   Generated by tools/make_bench300.py (deterministic, seed baked in).",
        "%   Not the classic 300-bus benchmark: topology and injections are",
        "%   synthetic, statistically shaped to behave like a real grid of that",
        "%   size (meshed core, radial spurs, heavy-tailed injections).",
        "",
        "mpc.version = '2';",
        "mpc.baseMVA = 100;",
        "",
        "%% bus data",
        "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin",
        "mpc.bus = [",
    ]
    for n in range(N_NODES):
        btype = 3 if n == slack else (2 if pg_at[n] > 0 else 1)
        lines.append(
            f"\t{ids[n]}\t{btype}\t{pd_at[n]:.2f}\t0\t0\t0\t1\t1\t0\t230\t1\t1.1\t0.9;"
        )
    lines.append("];")
    lines.append("")
    lines.append("%% generator data")
    lines.append("%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin" + "\t0" * 11)
    lines.append("mpc.gen = [")
    for j in np.argsort(ids[gen_buses]):
        n = gen_buses[j]
        lines.append(
            f"\t{ids[n]}\t{pg_at[n]:.2f}\t0\t300\t-300\t1\t100\t1\t{pg_at[n] * 1.2:.2f}\t0"
            + "\t0" * 11
            + ";"
        )
    lines.append("];")
    lines.append("")
    lines.append("%% branch data")
    lines.append("%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax")
    lines.append("mpc.branch = [")
    for f, t, xv, st in rows:
        lines.append(
            f"\t{f}\t{t}\t{xv / 10.0:.6f}\t{xv:.6f}\t0\t0\t0\t0\t0\t0\t{st}\t-360\t360;"
        )
    lines.append("];")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"wrote {path}: {N_NODES} buses, {len(rows)} branch rows "
          f"({sum(1 for r in rows if r[3])} in service)")


def main() -> None:
    ap = argparse.ArgumentParser()
    ap.add_argument("--measure", type=int, metavar="TRIALS", help="print calibration stats")
    ap.add_argument("--out", help="write the case file here")
    args = ap.parse_args()

    rng = np.random.default_rng(SEED)
    _, edges = build_graph(rng)
    if args.measure:
        measure(edges, args.measure, np.random.default_rng(SEED + 1))
    if args.out:
        emit(edges, np.random.default_rng(SEED + 2), args.out)
    if not args.measure and not args.out:
        ap.error("nothing to do")


if __name__ == "__main__":
    sys.exit(main())
