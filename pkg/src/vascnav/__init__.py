"""Guidewire navigation in simulated vasculature: simulator, offline RL agent, teleop."""

__version__ = "0.1.0"
