"""Concentration invariants of a single finite mm-space."""
from .alexandrov import AlexandrovReport, alexandrov_check, comparison_angles
from .concentration import avr_functional, concentration_function, expansion_coefficient
from .obsdiam import (
    ObsDiamResult,
    levy_radius,
    levy_radius_of,
    obsdiam_grid_oracle,
    observable_diameter,
    observable_value,
    random_lipschitz,
)
from .partial import partial_diameter, partial_diameter_space
from .separation import feasible_at, min_cross_distance, sep_by_labelings, separation_distance, uniform_cycle_step

__all__ = [
    "AlexandrovReport",
    "ObsDiamResult",
    "alexandrov_check",
    "avr_functional",
    "comparison_angles",
    "concentration_function",
    "expansion_coefficient",
    "feasible_at",
    "levy_radius",
    "levy_radius_of",
    "min_cross_distance",
    "obsdiam_grid_oracle",
    "observable_diameter",
    "observable_value",
    "partial_diameter",
    "partial_diameter_space",
    "random_lipschitz",
    "sep_by_labelings",
    "separation_distance",
    "uniform_cycle_step",
]
