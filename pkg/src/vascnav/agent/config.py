"""Trainer hyperparameters and the flat key=value config file format."""

from dataclasses import dataclass, fields, replace

from vascnav.errors import DataFormatError, require


@dataclass
class TrainerConfig:
    gamma: float = 0.9
    alpha_init: float = 1.0
    target_entropy: float = 1.0
    target_ema: float = 0.05
    beta: float = 2.5
    w: float = 0.5
    nd_target: float = 0.535
    eps1: float = 1.0
    eps2: float = 20.0
    tau: float = 0.1
    k: float = 1.0
    rl_steps: int = 50_000
    pretrain_steps: int = 40_000
    batch_size: int = 128
    lr_critic: float = 2e-4
    lr_actor: float = 1e-5
    lr_encoder: float = 2e-4
    lr_alpha: float = 1e-4
    lr_shift: float = 1e-3
    shift_init: float = 0.5
    shift_max: float = 1.0
    l2_bound: float = 100.0
    literal_actor_sign: bool = False
    alix_enabled: bool = True
    seed: int = 0

    def __post_init__(self):
        require(0.0 <= self.w <= 1.0, f"w={self.w} outside [0, 1]")
        require(0.0 < self.gamma < 1.0, f"gamma={self.gamma} outside (0, 1)")
        require(0.0 < self.target_ema <= 1.0, f"bad ema rate {self.target_ema}")
        require(self.beta >= 0.0, "beta must be non-negative")
        for name in ("alpha_init", "eps1", "eps2", "tau", "batch_size",
                     "lr_critic", "lr_actor", "lr_encoder", "lr_alpha",
                     "lr_shift", "shift_max", "l2_bound", "rl_steps",
                     "pretrain_steps"):
            require(getattr(self, name) > 0, f"{name} must be positive")
        require(self.eps1 <= self.eps2, "eps1 must not exceed eps2")
        require(0.0 <= self.shift_init <= self.shift_max,
                f"shift_init {self.shift_init} outside [0, {self.shift_max}]")


def desk_trainer_config(**overrides):
    """Scaled-down run that finishes on a CPU: 5k imitation + 10k RL steps.

    The actor rate rises with the shorter schedule: under Adam the head
    moves about lr * steps, and the full-length default (1e-5 over 40k)
    shrunk to 5k steps leaves the policy near its random init.
    """
    cfg = TrainerConfig(pretrain_steps=5_000, rl_steps=10_000, batch_size=64,
                        lr_actor=1e-4)
    return replace(cfg, **overrides) if overrides else cfg


_FIELD_TYPES = {f.name: f.type for f in fields(TrainerConfig)}


def _parse_value(name, raw):
    kind = _FIELD_TYPES[name]
    if kind is bool:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise DataFormatError(f"config key {name}: not a boolean: {raw!r}")
    try:
        return int(raw) if kind is int else float(raw)
    except ValueError:
        raise DataFormatError(f"config key {name}: not a number: {raw!r}")


def load_trainer_config(path, base=None):
    """Reads `name = value` lines; '#' starts a comment. Unknown keys fail."""
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataFormatError(f"{path}:{lineno}: expected name = value")
            name, raw = (part.strip() for part in line.split("=", 1))
            if name not in _FIELD_TYPES:
                raise DataFormatError(f"{path}:{lineno}: unknown key {name!r}")
            values[name] = _parse_value(name, raw)
    return replace(base or TrainerConfig(), **values)


def dump_trainer_config(cfg, path):
    with open(path, "w") as f:
        for field in fields(TrainerConfig):
            f.write(f"{field.name} = {getattr(cfg, field.name)!r}\n")
