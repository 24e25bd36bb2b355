from benchgen.grid_data import GridData, default_grid, fill_missing, parse_grid_csv, read_grid_csv, smooth
from benchgen.surface_builder import (
    CostSurface,
    build_surface,
    build_surface_with_retry,
    normalized_regret,
    prepare_grid,
)

__all__ = [
    "GridData", "default_grid", "fill_missing", "parse_grid_csv", "read_grid_csv", "smooth", "CostSurface",
    "build_surface", "build_surface_with_retry", "normalized_regret", "prepare_grid",
]
