"""Session server: one live environment per connection, episodes saved
in the demonstration file format and verifiable by exact replay.

State machine per session: idle -> (start) -> live -> (terminal step)
-> finished -> (start | reset) -> live. `reset` abandons a live episode
(an unfinished episode has no terminal flag, so there is nothing legal
to save) and begins a fresh one on the same map; `start` mid-episode is
rejected to keep the one-live-episode contract sharp.

Saving happens on the terminal frame; the file name lands in that
frame's info under "saved". If the write fails the client gets an error
message, the episode stays buffered, and the save is retried before
every later message, reporting in the next frame's info once it lands.

Every simulator interaction is deterministic given (map_seed,
reset_seed, preset), all three recorded in the episode file, which is
what makes replay_episode an exact check rather than a statistical one.
"""

import json
import os
import uuid
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from vascnav.data.episodes import EpisodeRecord, load_episode, save_episode
from vascnav.errors import DataFormatError
from vascnav.sim.env import N_ACTIONS, GuidewireEnv, desk_config, paper_config
from vascnav.sim.mapgen import generate_map
from vascnav.teleop.protocol import raster_encode

_PRESETS = {"desk": desk_config, "paper": paper_config}


def _cell(p):
    return (int(p[0] + 0.5), int(p[1] + 0.5))


class Session:
    """Protocol handler, transport-agnostic: handle(text) -> (replies,
    close). Replies are JSON-ready dicts in send order."""

    def __init__(self, out_dir, preset, operator, rng=None):
        if preset not in _PRESETS:
            raise DataFormatError(f"unknown preset {preset!r}")
        self.out_dir = out_dir
        self.preset = preset
        self.operator = operator
        self.rng = rng if rng is not None else np.random.default_rng()
        self.config = _PRESETS[preset]()
        self.env = None
        self.map_seed = None
        self.reset_seed = None
        self.obs = None
        self.done = False
        self.steps = None      # (frame, tip, action, reward, done) per step
        self.pending = []      # finished records whose save failed

    # -- message handling ------------------------------------------------

    def handle(self, text):
        saved_now = self._flush_pending()
        try:
            msg = json.loads(text)
        except (ValueError, TypeError):
            return [self._error("malformed JSON message")], False
        if not isinstance(msg, dict) or "type" not in msg:
            return ([self._error("message must be an object with a type")],
                    False)
        kind = msg["type"]
        if kind == "start":
            return self._on_start(msg, saved_now), False
        if kind == "step":
            return self._on_step(msg, saved_now), False
        if kind == "reset":
            return self._on_reset(saved_now), False
        if kind == "end":
            return self._on_end(), True
        return [self._error(f"unknown message type {kind!r}")], False

    def _on_start(self, msg, saved_now):
        if self.env is not None and not self.done:
            return [self._error("episode in progress; reset or end first")]
        seed = msg.get("map_seed")
        if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
            return [self._error("start needs a non-negative integer "
                                "map_seed")]
        vmap = generate_map(seed, self.config)
        self.env = GuidewireEnv(vmap, self.config, seed=0)
        self.map_seed = seed
        return [self._begin_episode(saved_now)]

    def _on_reset(self, saved_now):
        if self.env is None:
            return [self._error("no episode started; send start first")]
        return [self._begin_episode(saved_now)]

    def _on_step(self, msg, saved_now):
        if self.env is None or self.obs is None:
            return [self._error("no active episode; send start first")]
        if self.done:
            return [self._error("episode finished; start or reset")]
        a = msg.get("action_id")
        if not isinstance(a, int) or isinstance(a, bool) \
                or not 0 <= a < N_ACTIONS:
            return [self._error(
                f"action_id must be an integer in 0..{N_ACTIONS - 1}")]
        frame = self.obs.channels[1] > 0.5
        tip = (float(self.env.tip[0]), float(self.env.tip[1]))
        res = self.env.step(a)
        self.steps.append((frame, tip, a, float(res.reward),
                           bool(res.done)))
        self.obs, self.done = res.obs, bool(res.done)
        info = dict(res.info)
        if self.done:
            path = self._save(self._to_record(bool(res.info["success"])))
            if path is None:
                reply = self._frame(len(self.steps), res.reward, True, info,
                                    saved_now)
                return [reply, self._error("episode save failed; will "
                                           "retry, keep the session open")]
            saved_now = saved_now + [path]
        return [self._frame(len(self.steps), res.reward, self.done, info,
                            saved_now)]

    def _on_end(self):
        self._flush_pending()
        if self.pending:
            return [self._error(f"{len(self.pending)} episodes still "
                                "unsaved")]
        return []

    # -- episode bookkeeping ---------------------------------------------

    def _begin_episode(self, saved_now):
        self.reset_seed = int(self.rng.integers(2 ** 31))
        self.obs = self.env.reset(seed=self.reset_seed)
        self.done = False
        self.steps = []
        hud = self._hud()
        return {
            "type": "frame", "step": 0, "reward": 0.0, "done": False,
            "info": ({"saved": saved_now} if saved_now else {}),
            "vessel": raster_encode(self.env.vmap.vessel),
            "guidewire": raster_encode(self.obs.channels[1] > 0.5),
            "hud": hud,
        }

    def _frame(self, step, reward, done, info, saved_now):
        if saved_now:
            info = {**info, "saved": saved_now}
        return {
            "type": "frame", "step": step, "reward": float(reward),
            "done": bool(done), "info": _jsonable(info),
            "guidewire": raster_encode(self.obs.channels[1] > 0.5),
            "hud": self._hud(),
        }

    def _hud(self):
        dist = float(self.env.vmap.dist[_cell(self.env.tip)])
        if not np.isfinite(dist):
            dist = -1.0
        return {"force": float(self.env.force), "dist": dist}

    def _error(self, message):
        return {"type": "error", "message": message}

    def _to_record(self, success):
        frames = np.stack([s[0] for s in self.steps])
        return EpisodeRecord(
            vessel=self.env.vmap.vessel,
            actions=[s[2] for s in self.steps],
            rewards=[s[3] for s in self.steps],
            dones=[s[4] for s in self.steps],
            frames=frames,
            tips=[s[1] for s in self.steps],
            map_seed=self.map_seed,
            reset_seed=self.reset_seed,
            preset=self.preset,
            provenance="human",
            operator=self.operator,
            success=success)

    def _save(self, record):
        name = (f"teleop_{self.operator}_{record.map_seed}_"
                f"{record.reset_seed}_{uuid.uuid4().hex[:8]}.casd")
        path = os.path.join(self.out_dir, name)
        try:
            save_episode(record, path)
        except OSError:
            self.pending.append(record)
            return None
        return name

    def _flush_pending(self):
        pending, self.pending = self.pending, []
        saved = []
        for record in pending:
            name = self._save(record)  # failure re-appends to pending
            if name is not None:
                saved.append(name)
        return saved


def _jsonable(value):
    if isinstance(value, dict):
        return {k: _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def create_app(out_dir, preset="desk"):
    """FastAPI application exposing the session protocol at /session.

    The operator id rides the query string (?operator=...), tagging the
    saved episodes. Each connection owns its environment; the shared
    output directory stays safe through unique file names."""
    if preset not in _PRESETS:
        raise DataFormatError(f"unknown preset {preset!r}")
    app = FastAPI(title="vascnav teleop")

    @app.websocket("/session")
    async def session(ws: WebSocket):
        await ws.accept()
        operator = ws.query_params.get("operator", "anonymous")
        sess = Session(out_dir, preset, operator)
        close = False
        try:
            while not close:
                text = await ws.receive_text()
                replies, close = sess.handle(text)
                for reply in replies:
                    await ws.send_text(json.dumps(reply))
        except WebSocketDisconnect:
            return
        await ws.close()

    return app


@dataclass
class ReplayReport:
    path: str
    n_steps: int
    matches: bool
    first_divergence: int = -1   # step index, -1 when matches
    detail: str = ""


def replay_episode(path):
    """Re-execute a stored episode and compare against the recording.

    The simulator is deterministic given the stored seeds, so every
    recomputed frame, reward, and flag must equal the stored value bit
    for bit; the first step that disagrees is reported."""
    rec = load_episode(path)
    if rec.preset not in _PRESETS:
        raise DataFormatError(f"{path}: unknown preset {rec.preset!r}")
    config = _PRESETS[rec.preset]()
    vmap = generate_map(rec.map_seed, config)
    env = GuidewireEnv(vmap, config, seed=0)
    obs = env.reset(seed=rec.reset_seed)

    def fail(t, detail):
        return ReplayReport(path=path, n_steps=rec.T, matches=False,
                            first_divergence=t, detail=detail)

    if not np.array_equal(vmap.vessel, rec.vessel):
        return fail(-1, "vessel raster differs for the stored map seed")
    for t in range(rec.T):
        live = obs.channels[1] > 0.5
        if not np.array_equal(live, rec.frames[t]):
            return fail(t, "guidewire frame differs")
        tip = np.asarray(env.tip, dtype=np.float32)
        if not np.array_equal(tip, rec.tips[t]):
            return fail(t, "tip position differs")
        res = env.step(int(rec.actions[t]))
        if np.float32(res.reward) != rec.rewards[t]:
            return fail(t, f"reward {np.float32(res.reward)!r} != stored "
                           f"{rec.rewards[t]!r}")
        if bool(res.done) != bool(rec.dones[t]):
            return fail(t, "done flag differs")
        obs = res.obs
        if res.done and bool(res.info["success"]) != rec.success:
            return fail(t, "success flag differs")
    return ReplayReport(path=path, n_steps=rec.T, matches=True)
