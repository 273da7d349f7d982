"""Tilings, null-boundary regions, measures and hole placement."""

from .holes import (
    FeasibilityWarning,
    HoleFamily,
    HolePlacementError,
    PerforatedDomain,
    capacity_scaled,
    check_cell_capacity,
    check_pattern,
    critical_radius,
    instantiate_holes,
)
from .measure import QuadratureBudgetError, ball_box_measure, ball_volume, integrate_over_region, region_measure
from .regions import (
    IN,
    MIXED,
    OUT,
    Ball,
    Box,
    Complement,
    Difference,
    Empty,
    Intersection,
    Region,
    Union,
    UnsupportedRegionError,
    classify_boxes,
    everything,
    region_from_dict,
)
from .tiling import (
    TilingSpec,
    lambda_minus,
    lambda_plus,
    lattice_points_in,
    summed_tile_volumes,
    tile_states,
    tile_union_measure,
)
