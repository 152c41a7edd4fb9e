"""Turns transition views into dense network inputs.

The image input for a step is (vessel, guidewire_now, guidewire_previous) as
{0,1} reals; the conditioning vector is the one-hot of the previous action
over 11 slots (10 selectable plus the start marker). The next-state input of
transition t is by construction the current-state input of transition t+1.
"""

from dataclasses import dataclass

import numpy as np

from vascnav.errors import require
from vascnav.sim.env import START_ACTION


def one_hot(action, dtype=np.float64):
    require(0 <= action <= START_ACTION, f"action id {action} out of range")
    v = np.zeros(START_ACTION + 1, dtype=dtype)
    v[action] = 1.0
    return v


@dataclass
class Batch:
    cur_images: np.ndarray   # [B, 3, H, W]
    cur_prev: np.ndarray     # [B, 11] one-hot of a_{t-1}
    actions: np.ndarray      # [B] int64, the taken a_t
    rewards: np.ndarray      # [B]
    dones: np.ndarray        # [B] in {0, 1}
    next_images: np.ndarray  # [B, 3, H, W]
    next_prev: np.ndarray    # [B, 11] one-hot of a_t

    def __len__(self):
        return len(self.actions)


def assemble_inputs(views, dtype=np.float64):
    B = len(views)
    require(B > 0, "empty batch")
    H, W = views[0].record.vessel.shape
    cur = np.empty((B, 3, H, W), dtype=dtype)
    nxt = np.empty((B, 3, H, W), dtype=dtype)
    cur_prev = np.zeros((B, START_ACTION + 1), dtype=dtype)
    nxt_prev = np.zeros((B, START_ACTION + 1), dtype=dtype)
    actions = np.empty(B, dtype=np.int64)
    rewards = np.empty(B, dtype=dtype)
    dones = np.empty(B, dtype=dtype)
    for i, v in enumerate(views):
        vessel = v.record.vessel
        cur[i, 0] = vessel
        cur[i, 1] = v.frame_cur
        cur[i, 2] = v.frame_prev
        nxt[i, 0] = vessel
        nxt[i, 1] = v.frame_next
        nxt[i, 2] = v.frame_cur
        cur_prev[i, v.a_prev] = 1.0
        nxt_prev[i, v.a_cur] = 1.0
        actions[i] = v.a_cur
        rewards[i] = v.reward
        dones[i] = v.done
    return Batch(cur, cur_prev, actions, rewards, dones, nxt, nxt_prev)
