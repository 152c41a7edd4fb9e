"""Raster vascular POMDP: map generation, geodesics, kinematics, scripted demonstrator."""

from vascnav.sim.env import EnvConfig, GuidewireEnv, Observation, StepResult, desk_config, paper_config
from vascnav.sim.geodesics import SQRT2, build_distance_field, backtrack_path
from vascnav.sim.mapgen import VascularMap, generate_map
from vascnav.sim.mapio import load_map, save_map
from vascnav.sim.scripted import run_scripted_episode, scripted_policy_action

__all__ = [
    "SQRT2",
    "EnvConfig",
    "GuidewireEnv",
    "Observation",
    "StepResult",
    "VascularMap",
    "backtrack_path",
    "build_distance_field",
    "desk_config",
    "paper_config",
    "generate_map",
    "load_map",
    "run_scripted_episode",
    "save_map",
    "scripted_policy_action",
]
