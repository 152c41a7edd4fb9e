"""Interactive session server for collecting human demonstrations."""

from vascnav.teleop.protocol import raster_decode, raster_encode
from vascnav.teleop.server import ReplayReport, create_app, replay_episode

__all__ = ["ReplayReport", "create_app", "raster_decode", "raster_encode",
           "replay_episode"]
