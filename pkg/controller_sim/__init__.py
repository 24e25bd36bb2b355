from controller_sim.light_pattern import LightPattern, export_pattern, pack_frame, render_pattern, to_pgm, unpack_frame
from controller_sim.plant import PlantSpec, SpeedBump, plant_optimum, simulate_trace

__all__ = [
    "LightPattern", "export_pattern", "pack_frame", "render_pattern", "to_pgm", "unpack_frame",
    "PlantSpec", "SpeedBump", "plant_optimum", "simulate_trace",
]
