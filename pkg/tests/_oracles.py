"""Small reference implementations used to cross-check the fast paths."""

import itertools

import numpy as np


def binary_support_minimizers(obs, connected=False, tol=1e-9):
    """Minimum-support binary link-state vectors feasible for the recovery
    constraints, by exhaustive enumeration (the in-area delta is fully
    determined by the binary choice, so feasibility is a box check)."""
    from gridverify.fld import _area_blocks

    top = obs.topology
    nodes, links, c0, d_tilde_h = _area_blocks(obs)
    boxes = []
    for node in nodes:
        p_v = top.injection(node)
        if connected:
            boxes.append((0.0, 0.0))
        elif p_v > 0:
            boxes.append((0.0, p_v))
        else:
            boxes.append((p_v, 0.0))

    best_k = None
    minimizers = []
    for bits in itertools.product((0, 1), repeat=len(links)):
        x = np.array(bits, dtype=float)
        delta = c0 + d_tilde_h @ x if len(links) else c0
        if any(
            d < lo - tol or d > hi + tol for d, (lo, hi) in zip(delta, boxes)
        ):
            continue
        k = int(sum(bits))
        if best_k is None or k < best_k:
            best_k = k
            minimizers = []
        if k == best_k:
            minimizers.append(frozenset(l for l, b in zip(links, bits) if b))
    return best_k, minimizers


def strict_feasible_by_vertices(m, g, tol=1e-9):
    """Reference decision for: exists z >= 0 with Mz = 0 and g.z < 0.

    The normalized polytope {z >= 0, Mz = 0, sum z = 1} is compact, so the
    minimum of g.z is attained at a vertex, and every vertex is the basic
    solution on some column support.  Enumerate supports, keep exactly
    solved nonnegative candidates, and compare the best value against 0.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    g = np.asarray(g, dtype=float)
    n = len(g)
    a_full = np.vstack([m, np.ones((1, n))])
    b_full = np.concatenate([np.zeros(m.shape[0]), [1.0]])
    best = None
    for k in range(1, n + 1):
        for support in itertools.combinations(range(n), k):
            cols = list(support)
            z_s, *_ = np.linalg.lstsq(a_full[:, cols], b_full, rcond=None)
            if np.abs(a_full[:, cols] @ z_s - b_full).max() > 1e-8:
                continue
            if z_s.min() < -1e-9:
                continue
            z = np.zeros(n)
            z[cols] = np.clip(z_s, 0.0, None)
            val = float(g @ z)
            best = val if best is None else min(best, val)
    return best is not None and best < -tol


def directional_shed(hyper, topology, failed, delta_true):
    """Exact shed power of one cut side under the true failure set.

    Recomputes the per-node coefficients straight from the definitions and
    picks the direction the boundary's true states select: with a failed
    boundary link, outflow coefficients apply iff some failed link's
    aggregated flow is negative; with none, iff some surviving boundary
    link's aggregated flow is positive.
    """
    plus = minus = 0.0
    for u in sorted(hyper.nodes):
        p = topology.injection(u)
        d = delta_true[u]
        post = p - d
        if p > 0:
            g_plus, g_minus = post, d
        else:
            g_plus, g_minus = -d, -post
        cap = abs(p)
        plus += min(max(g_plus, 0.0), cap)
        minus += min(max(g_minus, 0.0), cap)
    failed_boundary = [e for e in hyper.boundary if e in failed]
    if failed_boundary:
        if any(hyper.d_u[e] < 0 for e in failed_boundary):
            return plus
        return minus
    if any(hyper.d_u[e] > 0 for e in hyper.boundary):
        return plus
    return minus
