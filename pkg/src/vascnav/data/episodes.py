"""Episode storage and transition indexing.

One file per episode, magic "CASD". Layout, all little-endian:

    4s  magic "CASD"
    u8  version (1)
    u16 H, u16 W, u16 T
    u64 map_seed, u64 reset_seed
    u8-length-prefixed preset name
    u8  provenance (0 scripted, 1 human)
    u8-length-prefixed operator tag
    u8  success (episode outcome as observed live)
    packed vessel bitmap, row-major, MSB first
    T step records: u8 action, f32 reward, u8 done,
                    packed guidewire bitmap, f32 tip row, f32 tip col
    u32 CRC-32 of everything above

The stored frame of step t is the pre-action observation o_t; the terminal
frame is not stored. Round-trips are bit-exact and the checksum is verified
before any field is parsed.
"""

import os
import struct
import zlib
from dataclasses import dataclass

import numpy as np

from vascnav.errors import DataFormatError, require
from vascnav.sim.env import START_ACTION

_MAGIC = b"CASD"
_VERSION = 1
_FIXED = struct.Struct("<4sBHHH")
_SEEDS = struct.Struct("<QQ")
_STEP = struct.Struct("<BfB")
_TIP = struct.Struct("<ff")
_CRC = struct.Struct("<I")

_PROVENANCE = {"scripted": 0, "human": 1}
_PROVENANCE_INV = {v: k for k, v in _PROVENANCE.items()}


@dataclass
class EpisodeRecord:
    """One demonstration episode.

    frames[t] is the guidewire raster of o_t (pre-action), tips[t] the tip
    position in the same convention. Exactly one done flag, at the last step;
    actions are the 10 selectable ids, never the start marker.
    """

    vessel: np.ndarray    # bool [H, W]
    actions: np.ndarray   # uint8 [T]
    rewards: np.ndarray   # float32 [T]
    dones: np.ndarray     # bool [T]
    frames: np.ndarray    # bool [T, H, W]
    tips: np.ndarray      # float32 [T, 2]
    map_seed: int
    reset_seed: int
    preset: str
    provenance: str
    operator: str = ""
    success: bool = False

    def __post_init__(self):
        self.vessel = np.asarray(self.vessel, dtype=bool)
        self.actions = np.asarray(self.actions, dtype=np.uint8)
        self.rewards = np.asarray(self.rewards, dtype=np.float32)
        self.dones = np.asarray(self.dones, dtype=bool)
        self.frames = np.asarray(self.frames, dtype=bool)
        self.tips = np.asarray(self.tips, dtype=np.float32)
        T = len(self.actions)
        require(T >= 1, "episode must contain at least one step")
        require(self.frames.shape == (T,) + self.vessel.shape,
                f"frames {self.frames.shape} do not match T={T}, "
                f"vessel {self.vessel.shape}")
        require(self.rewards.shape == (T,) and self.dones.shape == (T,)
                and self.tips.shape == (T, 2), "per-step arrays must agree on T")
        require(not self.dones[:-1].any() and bool(self.dones[-1]),
                "done must be set exactly once, at the final step")
        require(int(self.actions.max()) < START_ACTION,
                "the start marker is context only, never a taken action")
        require(not (self.frames & ~self.vessel[None]).any(),
                "guidewire frames must stay inside the vessel")
        require(self.provenance in _PROVENANCE,
                f"provenance must be one of {sorted(_PROVENANCE)}")

    @property
    def T(self):
        return len(self.actions)


def episode_from_rollout(env, transitions, info, map_seed, reset_seed,
                         preset, provenance="scripted", operator=""):
    """Builds a record from a collected rollout.

    `transitions` and `info` are what the scripted runner returns; the frame
    of step t is taken from the current-observation guidewire channel, so the
    stored sequence is exactly the o_1..o_T the learner will index.
    """
    frames = np.stack([tr[0].channels[1] > 0.5 for tr in transitions])
    return EpisodeRecord(
        vessel=env.vmap.vessel,
        actions=[tr[1] for tr in transitions],
        rewards=[tr[2] for tr in transitions],
        dones=[tr[3] for tr in transitions],
        frames=frames,
        tips=info["tips"],
        map_seed=map_seed,
        reset_seed=reset_seed,
        preset=preset,
        provenance=provenance,
        operator=operator,
        success=bool(info["success"]),
    )


def _pack_str(s):
    raw = s.encode("utf-8")
    require(len(raw) <= 255, f"string field too long ({len(raw)} bytes)")
    return bytes([len(raw)]) + raw


def save_episode(record, path):
    H, W = record.vessel.shape
    out = bytearray()
    out += _FIXED.pack(_MAGIC, _VERSION, H, W, record.T)
    out += _SEEDS.pack(record.map_seed, record.reset_seed)
    out += _pack_str(record.preset)
    out += bytes([_PROVENANCE[record.provenance]])
    out += _pack_str(record.operator)
    out += bytes([int(record.success)])
    out += np.packbits(record.vessel).tobytes()
    for t in range(record.T):
        out += _STEP.pack(int(record.actions[t]), float(record.rewards[t]),
                          int(record.dones[t]))
        out += np.packbits(record.frames[t]).tobytes()
        out += _TIP.pack(float(record.tips[t, 0]), float(record.tips[t, 1]))
    out += _CRC.pack(zlib.crc32(bytes(out)))
    with open(path, "wb") as f:
        f.write(bytes(out))


class _Reader:
    def __init__(self, blob, path):
        self.blob = blob
        self.path = path
        self.off = 0

    def take(self, n, what):
        if self.off + n > len(self.blob):
            raise DataFormatError(
                f"{self.path}: truncated reading {what} at offset {self.off} "
                f"(need {n} bytes, {len(self.blob) - self.off} left)")
        out = self.blob[self.off:self.off + n]
        self.off += n
        return out

    def take_str(self, what):
        n = self.take(1, what + " length")[0]
        return self.take(n, what).decode("utf-8")


def _unpack_bitmap(reader, H, W, what):
    nbytes = (H * W + 7) // 8
    raw = np.frombuffer(reader.take(nbytes, what), dtype=np.uint8)
    return np.unpackbits(raw, count=H * W).reshape(H, W).astype(bool)


def load_episode(path):
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _FIXED.size + _CRC.size:
        raise DataFormatError(f"{path}: {len(blob)} bytes is too short for a header")
    (stored_crc,) = _CRC.unpack(blob[-_CRC.size:])
    actual_crc = zlib.crc32(blob[:-_CRC.size])
    if stored_crc != actual_crc:
        raise DataFormatError(
            f"{path}: checksum mismatch (stored {stored_crc:#010x}, "
            f"computed {actual_crc:#010x})")
    r = _Reader(blob[:-_CRC.size], path)
    magic, version, H, W, T = _FIXED.unpack(r.take(_FIXED.size, "header"))
    if magic != _MAGIC:
        raise DataFormatError(f"{path}: bad magic {magic!r} at offset 0")
    if version != _VERSION:
        raise DataFormatError(f"{path}: unsupported version {version}")
    map_seed, reset_seed = _SEEDS.unpack(r.take(_SEEDS.size, "seeds"))
    preset = r.take_str("preset")
    prov_code = r.take(1, "provenance")[0]
    if prov_code not in _PROVENANCE_INV:
        raise DataFormatError(f"{path}: unknown provenance code {prov_code}")
    operator = r.take_str("operator")
    success = bool(r.take(1, "success flag")[0])
    vessel = _unpack_bitmap(r, H, W, "vessel bitmap")
    actions, rewards, dones, frames, tips = [], [], [], [], []
    for t in range(T):
        a, rew, dn = _STEP.unpack(r.take(_STEP.size, f"step {t}"))
        frames.append(_unpack_bitmap(r, H, W, f"step {t} guidewire bitmap"))
        tips.append(_TIP.unpack(r.take(_TIP.size, f"step {t} tip")))
        actions.append(a)
        rewards.append(rew)
        dones.append(dn)
    if r.off != len(r.blob):
        raise DataFormatError(
            f"{path}: {len(r.blob) - r.off} trailing bytes at offset {r.off}")
    return EpisodeRecord(vessel, actions, rewards, dones, frames, tips,
                         map_seed, reset_seed, preset,
                         _PROVENANCE_INV[prov_code], operator, success)


@dataclass(frozen=True)
class TransitionView:
    """Index of one transition against its episode.

    Resolves the tuple (o_prev, a_prev, o_cur, a_cur, o_next, r, done). The
    first step reuses its own frame as o_prev with the start marker as
    a_prev; the last step reuses its own frame as o_next, masked by done.
    """

    record: EpisodeRecord
    t: int

    @property
    def frame_prev(self):
        return self.record.frames[max(self.t - 1, 0)]

    @property
    def a_prev(self):
        return int(self.record.actions[self.t - 1]) if self.t > 0 else START_ACTION

    @property
    def frame_cur(self):
        return self.record.frames[self.t]

    @property
    def a_cur(self):
        return int(self.record.actions[self.t])

    @property
    def frame_next(self):
        return self.record.frames[min(self.t + 1, self.record.T - 1)]

    @property
    def reward(self):
        return float(self.record.rewards[self.t])

    @property
    def done(self):
        return bool(self.record.dones[self.t])

    @property
    def tip(self):
        return self.record.tips[self.t]


class Dataset:
    """Immutable view over a set of episode records, indexed by transition."""

    def __init__(self, records):
        require(len(records) > 0, "dataset must contain at least one episode")
        shapes = {r.vessel.shape for r in records}
        require(len(shapes) == 1, f"mixed raster sizes in dataset: {shapes}")
        self.records = list(records)
        self.views = [TransitionView(r, t) for r in self.records
                      for t in range(r.T)]

    def __len__(self):
        return len(self.views)


def load_dataset(directory):
    paths = sorted(
        os.path.join(directory, name) for name in os.listdir(directory)
        if name.endswith(".casd"))
    if not paths:
        raise DataFormatError(f"no episodes (*.casd) found in {directory}")
    return Dataset([load_episode(p) for p in paths])
