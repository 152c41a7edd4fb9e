"""Checkpoint files: one npz archive holding networks, optimizer moments,
replay weights, counters, config, and the exact generator state, so a
restored run continues bit-for-bit where the saved one stopped.
"""

import json
import zipfile
from dataclasses import asdict, fields

import numpy as np

from vascnav.agent.config import TrainerConfig
from vascnav.agent.networks import Networks
from vascnav.data.replay import PerState
from vascnav.errors import DataFormatError
from vascnav.nn.adam import AdamState
from vascnav.smoothing import AlixState

FORMAT_VERSION = 1

_NET_GROUPS = ("encoder", "policy", "q1", "q2",
               "t_encoder", "t_q1", "t_q2")


def _json_array(obj):
    return np.array(json.dumps(obj))


def save_checkpoint(path, nets, state, config):
    arrays = {
        "version": np.array(FORMAT_VERSION, dtype=np.int64),
        "config": _json_array(asdict(config)),
        "h": np.array(nets.h, dtype=np.int64),
        "w": np.array(nets.w, dtype=np.int64),
        "alix/shift_range": np.array(nets.alix.shift_range),
        "alix/s_max": np.array(nets.alix.s_max),
        "log_alpha": np.array(state.log_alpha),
        "pretrain_step": np.array(state.pretrain_step, dtype=np.int64),
        "rl_step": np.array(state.rl_step, dtype=np.int64),
        "per/f": state.per.f,
        "per/frozen": np.array(state.per.frozen),
        "rng": _json_array(state.rng.bit_generator.state),
    }
    for group in _NET_GROUPS:
        for key, arr in getattr(nets, group).items():
            arrays[f"nets/{group}/{key}"] = arr
    for group, adam in state.adam.items():
        arrays[f"adam/{group}/step"] = np.array(adam.step, dtype=np.int64)
        for key, arr in adam.m.items():
            arrays[f"adam/{group}/m/{key}"] = arr
        for key, arr in adam.v.items():
            arrays[f"adam/{group}/v/{key}"] = arr
    # a file object keeps the exact name; a str path would get .npz appended
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def _load_json(z, key):
    return json.loads(str(z[key]))


def load_checkpoint(path):
    """Returns (nets, state, config). Refuses unknown format versions."""
    from vascnav.agent.trainer import TrainerState

    try:
        z = np.load(path, allow_pickle=False)
    except (zipfile.BadZipFile, ValueError, OSError, EOFError) as e:
        raise DataFormatError(f"unreadable checkpoint {path}: {e}")
    with z:
        if "version" not in z:
            raise DataFormatError(f"{path} has no version field")
        version = int(z["version"])
        if version != FORMAT_VERSION:
            raise DataFormatError(
                f"{path} is format version {version}, expected "
                f"{FORMAT_VERSION}")
        raw_cfg = _load_json(z, "config")
        known = {f.name for f in fields(TrainerConfig)}
        unknown = set(raw_cfg) - known
        if unknown:
            raise DataFormatError(
                f"{path} config has unknown keys {sorted(unknown)}")
        config = TrainerConfig(**raw_cfg)

        groups = {}
        for group in _NET_GROUPS:
            prefix = f"nets/{group}/"
            groups[group] = {k[len(prefix):]: z[k] for k in z.files
                             if k.startswith(prefix)}
            if not groups[group]:
                raise DataFormatError(f"{path} missing network group {group}")
        alix = AlixState(shift_range=float(z["alix/shift_range"]),
                         s_max=float(z["alix/s_max"]))
        nets = Networks(alix=alix, h=int(z["h"]), w=int(z["w"]), **groups)

        adam = {}
        for group in ("encoder", "policy", "q1", "q2"):
            lr = {"encoder": config.lr_encoder, "policy": config.lr_actor,
                  "q1": config.lr_critic, "q2": config.lr_critic}[group]
            st = AdamState(lr=lr, step=int(z[f"adam/{group}/step"]))
            for kind in ("m", "v"):
                prefix = f"adam/{group}/{kind}/"
                moments = {k[len(prefix):]: z[k] for k in z.files
                           if k.startswith(prefix)}
                setattr(st, kind, moments)
            adam[group] = st

        per = PerState(f=z["per/f"].copy(), tau=config.tau, k=config.k,
                       eps1=config.eps1, eps2=config.eps2,
                       frozen=bool(z["per/frozen"]))
        rng = np.random.default_rng()
        rng.bit_generator.state = _load_json(z, "rng")
        state = TrainerState(log_alpha=float(z["log_alpha"]), adam=adam,
                             per=per, rng=rng,
                             pretrain_step=int(z["pretrain_step"]),
                             rl_step=int(z["rl_step"]))
    return nets, state, config
