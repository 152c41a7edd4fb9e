"""Waypoint-chasing demonstrator used to collect offline episodes.

Steers toward a point a few px ahead on the correct path, backing out of
wrong branches when it wanders in. `noise_level` replaces the chosen action
with a uniform random one at that rate, which is how the mixed-quality
offline corpus is produced.
"""

import math

import numpy as np

from vascnav.sim.env import N_ACTIONS, _cell

_LOOKAHEAD = 4.0
_FAST_ERR = 0.26    # ~15 deg; beyond this use the fast rotation
_RETREAT_ERR = 1.2  # badly misaligned: back off while turning instead of
                    # pushing into the wall


def _wrap(a):
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def _point_at_arc(path, arcs, u):
    u = min(max(u, 0.0), arcs[-1])
    k = int(np.searchsorted(arcs, u))
    if k == 0:
        return path[0]
    a0, a1 = arcs[k - 1], arcs[k]
    frac = 0.0 if a1 <= a0 else (u - a0) / (a1 - a0)
    return path[k - 1] + frac * (path[k] - path[k - 1])


def _rotation_id(err, rot_slow):
    if abs(err) < rot_slow / 2.0:
        return 0
    fast = abs(err) > _FAST_ERR
    if err > 0:
        return 4 if fast else 3  # cw
    return 2 if fast else 1      # ccw


def _decoy_waypoint(env, branch_k):
    """Lookahead point steering into wrong branch `branch_k`.

    Far from the junction this follows the main path (capped so it does not
    overshoot the attachment); near or inside the branch it follows the
    precomputed route into it.
    """
    bpath = np.asarray(env.vmap.branch_paths[branch_k], dtype=np.float64)
    attach = bpath[0]
    if np.linalg.norm(env.tip - attach) > 6.0 and env.vmap.branch_id[_cell(env.tip)] != branch_k:
        path, arcs = env._path, env._arcs
        i = int(np.argmin(np.linalg.norm(path - env.tip, axis=1)))
        ia = int(np.argmin(np.linalg.norm(path - attach, axis=1)))
        return _point_at_arc(path, arcs, min(arcs[i] + _LOOKAHEAD, arcs[ia]))
    seg = np.linalg.norm(np.diff(bpath, axis=0), axis=1)
    arcs = np.concatenate([[0.0], np.cumsum(seg)])
    i = int(np.argmin(np.linalg.norm(bpath - env.tip, axis=1)))
    return _point_at_arc(bpath, arcs, arcs[i] + _LOOKAHEAD)


def scripted_policy_action(env, noise_level, rng, decoy=None):
    """Action id for the current env state; uniform random at `noise_level`.

    `decoy`, when set to a branch id, steers into that wrong branch instead of
    along the path; used to seed the offline corpus with excursions.
    """
    if noise_level > 0.0 and rng.uniform() < noise_level:
        return int(rng.integers(0, N_ACTIONS))

    vmap = env.vmap
    path = env._path
    arcs = env._arcs
    tip = env.tip
    i = int(np.argmin(np.linalg.norm(path - tip, axis=1)))

    if decoy is not None:
        waypoint = _decoy_waypoint(env, decoy)
    elif vmap.branch_id[_cell(tip)] > 0:
        # In a wrong branch: retract while turning back toward the path.
        onward = _point_at_arc(path, arcs, arcs[i] + _LOOKAHEAD)
        desired = math.atan2(onward[0] - tip[0], onward[1] - tip[1])
        err = _wrap(desired - env.heading)
        return 5 + _rotation_id(err, env.config.rot_slow)
    else:
        waypoint = _point_at_arc(path, arcs, arcs[i] + _LOOKAHEAD)
    desired = math.atan2(waypoint[0] - tip[0], waypoint[1] - tip[1])
    err = _wrap(desired - env.heading)
    rot = _rotation_id(err, env.config.rot_slow)
    if abs(err) > _RETREAT_ERR:
        return 5 + rot
    return rot


def run_scripted_episode(env, noise_level, rng, decoy_prob=0.0, reset_seed=None):
    """Collect one full episode; returns (transitions, last_info).

    Each transition is (obs, action, reward, done, next_obs). With
    `decoy_prob`, some episodes first chase a wrong branch for a bounded
    number of steps (or until a few px deep), then recover, so the corpus
    contains excursion and retreat segments rather than only clean runs.
    last_info additionally carries "tips": the pre-action tip (row, col) of
    every step, which recorders persist alongside the frames.
    """
    obs = env.reset(seed=reset_seed)
    decoy_k, budget = None, 0
    if decoy_prob > 0.0 and rng.uniform() < decoy_prob:
        decoy_k = int(rng.integers(1, env.vmap.branch_id.max() + 1))
        budget = int(rng.integers(8, 20))  # steps allowed once near the junction
    transitions = []
    tips = []
    t, done, info = 0, False, {}
    while not done:
        active = None
        if decoy_k is not None:
            attach = np.asarray(env.vmap.branch_paths[decoy_k][0], dtype=np.float64)
            near = np.linalg.norm(env.tip - attach) < 8.0
            in_k = env.vmap.branch_id[_cell(env.tip)] == decoy_k
            depth = np.min(np.linalg.norm(env._path - env.tip, axis=1))
            if near or in_k:
                budget -= 1
            if budget <= 0 or (in_k and depth > 7.0) or t > env.config.max_steps // 2:
                decoy_k = None
            else:
                active = decoy_k
        tips.append((float(env.tip[0]), float(env.tip[1])))
        a = scripted_policy_action(env, noise_level, rng, decoy=active)
        res = env.step(a)
        transitions.append((obs, a, res.reward, res.done, res.obs))
        obs, done, info = res.obs, res.done, res.info
        t += 1
    info = dict(info)
    info["tips"] = tips
    return transitions, info
