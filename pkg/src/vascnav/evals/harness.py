"""Rollout evaluation: success rate, backward steps, episode reward.

Backward-step statistics are computed over successful episodes only; a
failed delivery says nothing useful about retreat efficiency. Reports
are pure functions of the recorded trajectories, so re-scoring a stored
trajectory reproduces its row exactly.
"""

import csv
from dataclasses import dataclass

import numpy as np

from vascnav.agent.networks import encode, head_forward
from vascnav.data.batching import one_hot
from vascnav.nn.layers import softmax
from vascnav.sim.env import N_ACTIONS, GuidewireEnv
from vascnav.sim.mapgen import generate_map


def is_backward(action):
    """Translation component of the id; ids pack 5 * translation + rotation."""
    return N_ACTIONS // 2 <= action < N_ACTIONS


def policy_probabilities(nets, obs):
    """Action distribution for one live observation, deterministic
    (smoothing layer in evaluation mode)."""
    images = np.asarray(obs.channels, dtype=np.float64)[None]
    context = one_hot(obs.prev_action)[None]
    feat, _ = encode(nets.encoder, nets.alix, images, train_shift=False)
    logits, _ = head_forward(nets.policy, feat, context)
    return softmax(logits)[0]


@dataclass
class EpisodeRow:
    map_seed: int
    reset_seed: int
    eval_seed: int
    success: bool
    backward_steps: int
    total_reward: float
    n_steps: int


def score_trajectory(steps, final_info):
    """(backward_steps, total_reward, n_steps, success) from recorded
    (action, reward) pairs and the terminal info."""
    backward = sum(1 for a, _ in steps if is_backward(a))
    total = float(sum(r for _, r in steps))
    return backward, total, len(steps), bool(final_info["success"])


def run_episode(nets, env, greedy=True, rng=None, reset_seed=None,
                map_seed=-1, eval_seed=-1):
    """Roll one episode under the policy. Returns (EpisodeRow, steps).

    Greedy mode takes the argmax of the action distribution; stochastic
    mode samples from it and needs rng.
    """
    obs = env.reset(seed=reset_seed)
    steps = []
    info = {"success": False}
    done = False
    while not done:
        pi = policy_probabilities(nets, obs)
        if greedy:
            a = int(np.argmax(pi))
        else:
            a = int(rng.choice(N_ACTIONS, p=pi))
        res = env.step(a)
        obs, done, info = res.obs, res.done, res.info
        steps.append((a, float(res.reward)))
    backward, total, n, success = score_trajectory(steps, info)
    row = EpisodeRow(map_seed=map_seed, reset_seed=reset_seed,
                     eval_seed=eval_seed, success=success,
                     backward_steps=backward, total_reward=total, n_steps=n)
    return row, steps


@dataclass
class EvalReport:
    rows: list
    seeds: tuple

    @property
    def n_episodes(self):
        return len(self.rows)

    @property
    def success_rate(self):
        return sum(r.success for r in self.rows) / len(self.rows)

    def _success_backward(self):
        return np.array([r.backward_steps for r in self.rows if r.success],
                        dtype=np.float64)

    @property
    def backward_mean(self):
        b = self._success_backward()
        return float(b.mean()) if len(b) else float("nan")

    @property
    def backward_std(self):
        b = self._success_backward()
        return float(b.std()) if len(b) else float("nan")

    @property
    def reward_mean(self):
        return float(np.mean([r.total_reward for r in self.rows]))

    @property
    def reward_std(self):
        return float(np.std([r.total_reward for r in self.rows]))

    def per_seed(self):
        """Sub-report per evaluation seed, in seed order."""
        return {s: EvalReport([r for r in self.rows if r.eval_seed == s],
                              (s,))
                for s in self.seeds}

    def aggregate(self):
        """Across-seed mean and spread of each headline metric, the
        two-number shape results tables use."""
        subs = list(self.per_seed().values())
        out = {}
        for name in ("success_rate", "backward_mean", "reward_mean"):
            vals = np.array([getattr(s, name) for s in subs])
            vals = vals[np.isfinite(vals)]
            if len(vals):
                out[name] = (float(vals.mean()), float(vals.std()))
            else:
                out[name] = (float("nan"), float("nan"))
        return out

    def to_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["map_seed", "reset_seed", "eval_seed", "success",
                        "backward_steps", "total_reward", "n_steps"])
            for r in self.rows:
                w.writerow([r.map_seed, r.reset_seed, r.eval_seed,
                            int(r.success), r.backward_steps,
                            repr(r.total_reward), r.n_steps])


def evaluate_policy(nets, map_seeds, env_config, n_episodes=50,
                    seeds=(0, 1, 2), greedy=True):
    """The 50-episode, 3-seed protocol: n_episodes rollouts per
    evaluation seed, cycling over the given maps, reset randomness
    drawn from the seed's own stream."""
    maps = {s: generate_map(s, env_config) for s in map_seeds}
    rows = []
    for eval_seed in seeds:
        rng = np.random.default_rng(eval_seed)
        for e in range(n_episodes):
            ms = map_seeds[e % len(map_seeds)]
            env = GuidewireEnv(maps[ms], env_config, seed=eval_seed)
            reset_seed = int(rng.integers(2 ** 31))
            row, _ = run_episode(nets, env, greedy=greedy, rng=rng,
                                 reset_seed=reset_seed, map_seed=ms,
                                 eval_seed=eval_seed)
            rows.append(row)
    return EvalReport(rows=rows, seeds=tuple(seeds))
