"""8-connected geodesic distance fields over raster lumens.

The relaxation state is an exact integer pair (n axis steps, m diagonal
steps); the float distance is always rendered fresh as n + m*sqrt(2), never
accumulated. Rendering is monotone in the true cost, so heap order stays
correct, and the field is a pure function of the pair field: any two correct
implementations agree bit-for-bit, and per-step reward differences telescope
exactly over an episode.
"""

import heapq

import numpy as np

from vascnav.errors import require

SQRT2 = float(np.sqrt(2.0))

# 8-neighborhood: (dr, dc, axis_step, diag_step)
_NEIGHBORS = [
    (-1, 0, 1, 0), (1, 0, 1, 0), (0, -1, 1, 0), (0, 1, 1, 0),
    (-1, -1, 0, 1), (-1, 1, 0, 1), (1, -1, 0, 1), (1, 1, 0, 1),
]


def build_distance_field(vessel, target):
    """Dijkstra from the target across the lumen.

    Args:
        vessel: bool [H,W], true = lumen.
        target: (row, col), must be in lumen.
    Returns (dist, pairs): dist float64 [H,W] (+inf off-lumen or unreachable),
    pairs int32 [H,W,2] holding (axis steps, diagonal steps), -1 where dist
    is not finite. Ties in the float are broken by the lexicographically
    smallest pair, so the field is deterministic.
    """
    vessel = np.asarray(vessel, dtype=bool)
    H, W = vessel.shape
    tr, tc = int(target[0]), int(target[1])
    require(0 <= tr < H and 0 <= tc < W, f"target {target} outside {H}x{W} raster")
    require(vessel[tr, tc], f"target {target} is not in the lumen")

    dist = np.full((H, W), np.inf, dtype=np.float64)
    pairs = np.full((H, W, 2), -1, dtype=np.int32)
    dist[tr, tc] = 0.0
    pairs[tr, tc] = (0, 0)
    heap = [(0.0, 0, 0, tr, tc)]
    while heap:
        d, n, m, r, c = heapq.heappop(heap)
        if (d, n, m) != (dist[r, c], pairs[r, c, 0], pairs[r, c, 1]):
            continue  # stale entry
        for dr, dc, an, am in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < H and 0 <= cc < W) or not vessel[rr, cc]:
                continue
            nn, nm = n + an, m + am
            nd = nn + nm * SQRT2  # render, never accumulate
            if (nd, nn, nm) < (dist[rr, cc], pairs[rr, cc, 0], pairs[rr, cc, 1]):
                dist[rr, cc] = nd
                pairs[rr, cc] = (nn, nm)
                heapq.heappush(heap, (nd, nn, nm, rr, cc))
    return dist, pairs


def backtrack_path(dist, pairs, vessel, outset):
    """Greedy steepest-descent walk from the outset to the target.

    Returns the ordered list of (row, col) cells. Each step moves to the
    8-neighbor with the smallest (dist, pair) key, so dist strictly decreases
    along the result.
    """
    H, W = dist.shape
    r, c = int(outset[0]), int(outset[1])
    require(np.isfinite(dist[r, c]), f"outset {outset} cannot reach the target")
    path = [(r, c)]
    while dist[r, c] > 0.0:
        best = None
        for dr, dc, _, _ in _NEIGHBORS:
            rr, cc = r + dr, c + dc
            if not (0 <= rr < H and 0 <= cc < W) or not vessel[rr, cc]:
                continue
            key = (dist[rr, cc], pairs[rr, cc, 0], pairs[rr, cc, 1], rr, cc)
            if best is None or key < best:
                best = key
        r, c = best[3], best[4]
        path.append((r, c))
    return path
