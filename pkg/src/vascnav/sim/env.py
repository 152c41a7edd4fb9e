"""Guidewire navigation environment on raster vascular maps.

The wire is a polyline from the insertion point to the tip. Ten discrete
actions combine translation (forward/backward) with tip rotation (static,
ccw-slow, ccw-fast, cw-slow, cw-fast); action id = 5 * translation + rotation.
Forward motion collides with the lumen wall and slides along it; the blocked
component accumulates into a force scalar that decays while unobstructed and
terminates the episode with a penalty past a threshold. Reward is the dense
geodesic progress toward the target plus sparse event penalties.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from vascnav.errors import UsageError, require
from vascnav.sim.geodesics import SQRT2

N_ACTIONS = 10
START_ACTION = 10  # pseudo previous-action id used at reset, one-hot size 11


@dataclass
class EnvConfig:
    h: int = 64
    w: int = 64
    translation_speed: float = 2.0
    rot_slow: float = math.pi / 24
    rot_fast: float = math.pi / 8
    success_radius: float = 5.0
    init_min: float = 10.0
    init_max: float = 15.0
    max_steps: int = 200
    force_threshold: float = 9.0
    force_decay: float = 0.95
    branch_penalty: float = 20.0
    exit_penalty: float = 50.0
    force_penalty: float = 100.0
    lumen_radius: float = 2.0
    min_branch_px: int = 12

    def __post_init__(self):
        require(self.translation_speed > 0, "translation_speed must be positive")
        require(0 < self.rot_slow < self.rot_fast, "need 0 < rot_slow < rot_fast")
        require(self.success_radius < self.init_min, "success radius must not cover the insertion segment")
        require(0 < self.force_decay < 1, "force_decay must be in (0,1)")


def desk_config():
    """Small raster tuned for CPU-budget training runs."""
    return EnvConfig()


def paper_config():
    """Full-size raster matching the reference phantom scale."""
    return EnvConfig(h=140, w=140, translation_speed=3.0, force_threshold=13.5)


@dataclass
class Observation:
    """Stacked float32 channels: lumen, wire now, wire one step back."""

    channels: np.ndarray  # [3, H, W] float32
    prev_action: int      # id fed to the policy alongside the image

    @property
    def shape(self):
        return self.channels.shape


@dataclass
class StepResult:
    obs: Observation
    reward: float
    done: bool
    info: dict = field(default_factory=dict)


def _cell(p):
    return (int(p[0] + 0.5), int(p[1] + 0.5))


class GuidewireEnv:
    """Stateful episode simulator bound to one map."""

    def __init__(self, vmap, config, seed=0):
        self.vmap = vmap
        self.config = config
        require(vmap.vessel.shape == (config.h, config.w),
                f"map {vmap.vessel.shape} does not match config raster {(config.h, config.w)}")
        self._rng = np.random.default_rng(seed)
        self._arcs = vmap.path_arc_lengths()
        self._path = np.asarray(vmap.path_cells, dtype=np.float64)
        self._done = True
        self._t = 0

    # -- episode control ----------------------------------------------------

    def reset(self, seed=None):
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        u = self._rng.uniform(self.config.init_min, self.config.init_max)
        heading = self._rng.uniform(0.0, 2.0 * math.pi)
        self.body = [self._path[0].copy()]
        k = int(np.searchsorted(self._arcs, u))
        for i in range(1, k):
            self.body.append(self._path[i].copy())
        # fractional last segment so the tip sits exactly at arc length u
        a0, a1 = self._arcs[k - 1], self._arcs[min(k, len(self._arcs) - 1)]
        if a1 > a0:
            frac = (u - a0) / (a1 - a0)
            tip = self._path[k - 1] + frac * (self._path[min(k, len(self._path) - 1)] - self._path[k - 1])
        else:
            tip = self._path[k - 1].copy()
        self.body.append(tip.copy())
        self.tip = tip
        self.heading = heading
        self.force = 0.0
        self._t = 0
        self._done = False
        self._excursion = self.vmap.branch_id[_cell(tip)] > 0
        gw = self._render_wire()
        self._prev_gw = gw
        obs = Observation(self._stack(gw, gw), START_ACTION)
        return obs

    def step(self, action):
        if self._done:
            raise UsageError("step() after episode end; call reset()")
        action = int(action)
        require(0 <= action < N_ACTIONS, f"action {action} outside 0..{N_ACTIONS - 1}")
        trans, rot = divmod(action, 5)

        rot_table = (0.0, -self.config.rot_slow, -self.config.rot_fast,
                     self.config.rot_slow, self.config.rot_fast)
        self.heading = (self.heading + rot_table[rot]) % (2.0 * math.pi)

        prev_cell = _cell(self.tip)
        blocked = 0.0
        exit_attempt = False
        if trans == 0:
            blocked, exit_attempt = self._advance()
        else:
            exit_attempt = self._retreat()

        if blocked > 0.0:
            self.force += blocked
        else:
            self.force *= self.config.force_decay

        events = []
        reward = self._transition_reward(prev_cell, _cell(self.tip), events)
        if exit_attempt:
            reward -= self.config.exit_penalty
            events.append("exit_attempt")

        self._t += 1
        success = False
        if self.force > self.config.force_threshold:
            reward -= self.config.force_penalty
            self._done = True
            events.append("force_termination")
        else:
            d = math.hypot(self.tip[0] - self.vmap.target[0], self.tip[1] - self.vmap.target[1])
            if d <= self.config.success_radius:
                self._done = True
                success = True
                events.append("success")
            elif self._t >= self.config.max_steps:
                self._done = True
                events.append("truncated")

        gw = self._render_wire()
        obs = Observation(self._stack(gw, self._prev_gw), action)
        self._prev_gw = gw
        info = {"tip": (float(self.tip[0]), float(self.tip[1])),
                "force": float(self.force), "success": success, "events": events}
        return StepResult(obs, float(reward), self._done, info)

    # -- mechanics ----------------------------------------------------------

    def _inside(self, p):
        H, W = self.vmap.vessel.shape
        if not (0.0 <= p[0] <= H - 1 and 0.0 <= p[1] <= W - 1):
            return None  # outside the raster entirely
        return bool(self.vmap.vessel[_cell(p)])

    def _advance(self):
        d = np.array([math.sin(self.heading), math.cos(self.heading)])
        total = self.config.translation_speed
        n_sub = max(1, int(math.ceil(total / 0.5)))
        ds = total / n_sub
        blocked = 0.0
        exit_attempt = False
        for _ in range(n_sub):
            cand = self.tip + ds * d
            ok = self._inside(cand)
            if ok is None:
                exit_attempt = True
                break
            if ok:
                self.tip = cand
            else:
                # Wall hit: slide axis-resolved, keeping whichever single-axis
                # component stays in the lumen. The component pressed into the
                # wall counts as force whether or not the slide succeeds.
                pressed = ds
                for keep, drop in ((0, 1), (1, 0)):
                    axis_d = np.zeros(2)
                    axis_d[keep] = d[keep]
                    if ds * abs(d[keep]) <= 1e-9:
                        continue
                    cand2 = self.tip + ds * axis_d
                    ok2 = self._inside(cand2)
                    if ok2 is None:
                        exit_attempt = True
                        break
                    if ok2:
                        self.tip = cand2
                        pressed = ds * abs(d[drop])
                        break
                if exit_attempt:
                    break
                blocked += pressed
            # Vertex per substep so the body polyline follows the slid path
            # instead of chording across wall corners.
            if np.linalg.norm(self.tip - self.body[-1]) > 1e-9:
                self.body.append(self.tip.copy())
        return blocked, exit_attempt

    def _retreat(self):
        remaining = self.config.translation_speed
        while remaining > 0.0 and len(self.body) > 1:
            last, prev = self.body[-1], self.body[-2]
            seg = np.linalg.norm(last - prev)
            if seg <= remaining:
                self.body.pop()
                self.tip = self.body[-1].copy()
                remaining -= seg
            else:
                self.tip = last + (remaining / seg) * (prev - last)
                self.body[-1] = self.tip.copy()
                remaining = 0.0
        if remaining > 0.0:
            # Pulled past the insertion point: clamp there, flag the exit.
            self.tip = self.body[0].copy()
            return True
        return False

    def _transition_reward(self, prev_cell, new_cell, events):
        reward = 0.0
        vm = self.vmap
        if vm.correct_path[prev_cell] and vm.correct_path[new_cell]:
            dn = int(vm.dist_pairs[prev_cell][0]) - int(vm.dist_pairs[new_cell][0])
            dm = int(vm.dist_pairs[prev_cell][1]) - int(vm.dist_pairs[new_cell][1])
            reward += dn + dm * SQRT2
        prev_branch = vm.branch_id[prev_cell] > 0
        new_branch = vm.branch_id[new_cell] > 0
        if not prev_branch and new_branch:
            reward -= self.config.branch_penalty
            events.append("branch_entry")
            self._excursion = True
        elif prev_branch and not new_branch:
            reward += self.config.branch_penalty
            events.append("branch_return")
            self._excursion = False
        return reward

    # -- rendering ----------------------------------------------------------

    def _render_wire(self):
        H, W = self.vmap.vessel.shape
        gw = np.zeros((H, W), dtype=bool)
        pts = np.asarray(self.body)
        for i in range(len(pts) - 1):
            a, b = pts[i], pts[i + 1]
            seg = np.linalg.norm(b - a)
            n = max(1, int(math.ceil(seg / 0.25)))
            for t in np.linspace(0.0, 1.0, n + 1):
                r, c = _cell(a + t * (b - a))
                gw[r, c] = True
        if len(pts) == 1:
            r, c = _cell(pts[0])
            gw[r, c] = True
        gw &= self.vmap.vessel  # rounding at corners must not paint wall cells
        return gw

    def _stack(self, gw_now, gw_prev):
        return np.stack([
            self.vmap.vessel.astype(np.float32),
            gw_now.astype(np.float32),
            gw_prev.astype(np.float32),
        ])
