"""Procedural raster vascular maps shaped like the reference phantom.

A jittered waypoint template (trunk rising from a bottom opening, one binary
bifurcation, one triple bifurcation on the route, target upper right) is swept
with Catmull-Rom splines and stamped with ~2 px disks, giving 4-5 px lumens.
Each candidate is validated (connectivity, branch structure, cross-section
width, insertion geometry) and regenerated from a derived sub-seed on failure.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from vascnav.errors import ContractViolation, require
from vascnav.sim.geodesics import build_distance_field, backtrack_path


class _Invalid(Exception):
    """Internal: candidate map failed validation, try the next sub-seed."""


@dataclass
class VascularMap:
    """Lumen raster plus everything derived from it for navigation and reward."""

    vessel: np.ndarray          # bool [H,W]
    outset: tuple               # (row, col)
    target: tuple               # (row, col)
    dist: np.ndarray            # float64 geodesic px to target, +inf off-lumen
    dist_pairs: np.ndarray      # int32 [H,W,2] (axis, diagonal) step counts
    correct_path: np.ndarray    # bool corridor (path dilated to lumen width)
    branch_id: np.ndarray       # int32, 0 = corridor / off-lumen, 1..K wrong branches
    path_cells: list            # ordered (row, col) outset -> target
    junctions: list = field(default_factory=list)   # deduped branch attachment points
    branch_paths: dict = field(default_factory=dict)  # branch_id -> cells junction -> deep end

    @classmethod
    def build(cls, vessel, outset, target, min_branch_px=12, corridor_px=4):
        """Derive distances, corridor, branch labels, junctions from raw rasters."""
        vessel = np.asarray(vessel, dtype=bool)
        outset = (int(outset[0]), int(outset[1]))
        target = (int(target[0]), int(target[1]))
        require(vessel[outset], f"outset {outset} not in lumen")
        require(vessel[target], f"target {target} not in lumen")
        dist, pairs = build_distance_field(vessel, target)
        require(np.isfinite(dist[outset]), f"no lumen route from outset {outset} to target {target}")
        path = backtrack_path(dist, pairs, vessel, outset)

        # Corridor: the path grown to the full tube width. Geodesic dilation
        # (masked by the lumen) so the cover does not depend on which wall the
        # shortest path hugs; corridor_px must be >= the widest half-section.
        path_mask = np.zeros_like(vessel)
        path_mask[tuple(np.array(path).T)] = True
        eight = np.ones((3, 3), dtype=bool)
        corridor = ndimage.binary_dilation(path_mask, structure=eight,
                                           iterations=corridor_px, mask=vessel)


        labels, n = ndimage.label(vessel & ~corridor, structure=eight)
        branch_id = np.zeros(vessel.shape, dtype=np.int32)
        next_id = 1
        comps = []
        for k in range(1, n + 1):
            comp = labels == k
            if comp.sum() < min_branch_px:
                corridor |= comp  # dilation slivers, not real branches
            else:
                branch_id[comp] = next_id
                comps.append(comp)
                next_id += 1

        junctions, attachments = _attachment_points(comps, path)
        branch_paths = {}
        for k, (comp, attach) in enumerate(zip(comps, attachments), start=1):
            cells = np.argwhere(comp)
            deep = cells[np.argmax(np.linalg.norm(cells - np.asarray(attach), axis=1))]
            bdist, bpairs = build_distance_field(vessel, tuple(deep))
            branch_paths[k] = backtrack_path(bdist, bpairs, vessel, attach)
        return cls(vessel, outset, target, dist, pairs, corridor, branch_id, path,
                   junctions, branch_paths)

    @property
    def shape(self):
        return self.vessel.shape

    def path_arc_lengths(self):
        """Cumulative arc length (px) along path_cells, starting at 0."""
        pts = np.asarray(self.path_cells, dtype=np.float64)
        seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        return np.concatenate([[0.0], np.cumsum(seg)])


def _attachment_points(comps, path):
    """Per-branch attachment cells plus junctions (merged within 3 px)."""
    pts = []
    parr = np.asarray(path, dtype=np.float64)
    for comp in comps:
        cells = np.argwhere(comp).astype(np.float64)
        d = np.linalg.norm(parr[:, None, :] - cells[None, :, :], axis=2).min(axis=1)
        i = int(np.argmin(d))
        pts.append(path[i])
    merged = []
    for p in pts:
        for q in merged:
            if (p[0] - q[0]) ** 2 + (p[1] - q[1]) ** 2 <= 9.0:
                break
        else:
            merged.append(p)
    return merged, pts


def _catmull_rom(points, step=0.3):
    """Sample a Catmull-Rom spline through the waypoints at ~step px spacing."""
    pts = np.asarray(points, dtype=np.float64)
    ext = np.vstack([pts[0], pts, pts[-1]])
    out = []
    for i in range(len(pts) - 1):
        p0, p1, p2, p3 = ext[i], ext[i + 1], ext[i + 2], ext[i + 3]
        n = max(2, int(np.ceil(np.linalg.norm(p2 - p1) / step)) + 1)
        t = np.linspace(0.0, 1.0, n, endpoint=False)[:, None]
        out.append(
            0.5
            * (
                2 * p1
                + (-p0 + p2) * t
                + (2 * p0 - 5 * p1 + 4 * p2 - p3) * t**2
                + (-p0 + 3 * p1 - 3 * p2 + p3) * t**3
            )
        )
    out.append(pts[-1][None])
    return np.vstack(out)


def _stamp(vessel, samples, radius):
    H, W = vessel.shape
    r = int(np.ceil(radius))
    offs = np.mgrid[-r : r + 1, -r : r + 1].reshape(2, -1).T
    for p in samples:
        cells = np.round(p).astype(int) + offs
        ok = (
            (cells[:, 0] >= 0) & (cells[:, 0] < H) & (cells[:, 1] >= 0) & (cells[:, 1] < W)
        )
        cells = cells[ok]
        d = np.linalg.norm(cells - p, axis=1)
        sel = cells[d <= radius]
        vessel[sel[:, 0], sel[:, 1]] = True


def _draw_template(rng, H, W, radius):
    """Jittered phantom-like tree in unit coordinates, scaled to the raster."""

    def u(s):
        return rng.uniform(-s, s)

    oc = 0.34 + u(0.03)
    b1 = np.array([0.46 + u(0.02), 0.41 + u(0.03)])
    b2 = np.array([0.27 + u(0.015), 0.56 + u(0.015)])
    trunk = [
        (1.08, oc),
        (0.86, oc + u(0.01)),
        (0.70, oc + u(0.025)),
        (0.57, oc + 0.02 + u(0.025)),
        tuple(b1),
    ]
    wrong1 = [tuple(b1), (0.36 + u(0.02), 0.25 + u(0.025)), (0.26 + u(0.025), 0.12 + u(0.02))]
    main2 = [tuple(b1), (0.37 + u(0.015), 0.48 + u(0.015)), tuple(b2)]
    wrong2 = [tuple(b2), (0.15 + u(0.015), 0.41 + u(0.02)), (0.05 + u(0.015), 0.27 + u(0.02))]
    wrong3 = [tuple(b2), (0.13 + u(0.015), 0.63 + u(0.015)), (0.03 + u(0.015), 0.67 + u(0.02))]
    correct = [tuple(b2), (0.25 + u(0.01), 0.71 + u(0.015)), (0.31 + u(0.015), 0.87 + u(0.015))]

    scale = np.array([H - 1, W - 1], dtype=np.float64)
    vessel = np.zeros((H, W), dtype=bool)
    for wp in (trunk, wrong1, main2, wrong2, wrong3, correct):
        samples = _catmull_rom(np.asarray(wp) * scale)
        _stamp(vessel, samples, radius)

    # Keep margins clear; the only border contact is the bottom opening.
    vessel[:2, :] = False
    vessel[:, :2] = False
    vessel[:, -2:] = False
    opening = int(round(oc * (W - 1)))
    keep = np.zeros(W, dtype=bool)
    keep[max(0, opening - 4) : min(W, opening + 5)] = True
    vessel[-1, ~keep] = False

    trunk_px = _catmull_rom(np.asarray(trunk) * scale)
    near = trunk_px[np.abs(trunk_px[:, 0] - (H - 2)) < 1.5]
    outset_pt = near[0] if len(near) else trunk_px[np.argmax(trunk_px[:, 0] <= H - 2)]
    outset = (int(np.clip(round(outset_pt[0]), 0, H - 2)), int(np.clip(round(outset_pt[1]), 0, W - 1)))
    tgt_pt = np.asarray(correct[-1]) * scale
    target = (int(round(tgt_pt[0])), int(round(tgt_pt[1])))
    return vessel, outset, target


def _ray_width(vessel, point, tangent):
    """Contiguous lumen run through `point` perpendicular to `tangent`, in px."""
    H, W = vessel.shape
    n = np.array([-tangent[1], tangent[0]], dtype=np.float64)
    n /= max(np.linalg.norm(n), 1e-12)

    def inside(p):
        r, c = int(round(p[0])), int(round(p[1]))
        return 0 <= r < H and 0 <= c < W and vessel[r, c]

    width = 0.0
    for sign in (1.0, -1.0):
        s = 0.0
        while s < 8.0 and inside(np.asarray(point) + (s + 0.1) * sign * n):
            s += 0.1
        width += s
    return width + 0.1  # the center cell itself


JUNCTION_CLEARANCE = 6.0  # px; nearer path cells cross merged tubes, not one vessel


def _validate(vmap, config):
    path = vmap.path_cells
    if len(vmap.junctions) < 2:
        raise _Invalid("missing bifurcations")
    n_branches = vmap.branch_id.max()
    if n_branches != 3:
        raise _Invalid(f"expected 3 wrong branches, got {n_branches}")
    # The triple bifurcation: two wrong branches rooted at the same junction,
    # so their components nearly touch even after the corridor eats the roots.
    cells = [np.argwhere(vmap.branch_id == k).astype(np.float64) for k in range(1, n_branches + 1)]
    shared = False
    for i in range(len(cells)):
        for j in range(i + 1, len(cells)):
            gap = np.linalg.norm(cells[i][:, None, :] - cells[j][None, :, :], axis=2).min()
            if gap <= 5.5:
                shared = True
    if not shared:
        raise _Invalid("no triple bifurcation on the route")

    arcs = vmap.path_arc_lengths()
    if arcs[-1] < 3.0 * config.init_max:
        raise _Invalid(f"route too short: {arcs[-1]:.1f} px")

    # Insertion geometry: the rendered wire at reset must cover 10..16 cells.
    if int(np.searchsorted(arcs, 10.0)) + 1 < 10:
        raise _Invalid("trunk too diagonal near the outset")
    if int(np.searchsorted(arcs, 15.0)) + 1 > 16:
        raise _Invalid("insertion covers too many cells")

    # Cross-section width, away from junctions where tubes legitimately merge.
    # Tangent from a 7-cell window; single-cell differences are too jagged and
    # oblique rays overestimate the run.
    jarr = np.asarray(vmap.junctions, dtype=np.float64)
    for i in range(1, len(path) - 1):
        p = np.asarray(path[i], dtype=np.float64)
        if np.min(np.linalg.norm(jarr - p, axis=1)) < JUNCTION_CLEARANCE:
            continue
        lo, hi = max(0, i - 3), min(len(path) - 1, i + 3)
        t = np.asarray(path[hi], dtype=np.float64) - np.asarray(path[lo], dtype=np.float64)
        wd = _ray_width(vmap.vessel, p, t)
        if not 3.0 <= wd <= 5.0:
            raise _Invalid(f"width {wd:.2f} px at {path[i]}")


def generate_map(seed, config):
    """Deterministic valid map for the seed; bounded retries over sub-seeds."""
    H, W = config.h, config.w
    for attempt in range(64):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(attempt,)))
        vessel, outset, target = _draw_template(rng, H, W, config.lumen_radius)
        try:
            vmap = VascularMap.build(vessel, outset, target,
                                     min_branch_px=config.min_branch_px,
                                     corridor_px=int(np.ceil(2.0 * config.lumen_radius)))
        except ContractViolation:
            continue
        try:
            _validate(vmap, config)
        except _Invalid:
            continue
        return vmap
    raise ContractViolation(f"map generation failed after 64 attempts for seed {seed}")
