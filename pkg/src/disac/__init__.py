"""Downlink distributed-MIMO simulator with phase-coherent multistatic imaging."""

__version__ = "0.1.0"

from .grid import GridConfig, make_grid, ft_to_dd, dd_to_ft, periodic_xcorr_2d
from .scenario import (
    AccessPoint,
    UserEquipment,
    RegionOfInterest,
    Target,
    Scenario,
    make_lattice_scenario,
)

__all__ = [
    "__version__",
    "GridConfig",
    "make_grid",
    "ft_to_dd",
    "dd_to_ft",
    "periodic_xcorr_2d",
    "AccessPoint",
    "UserEquipment",
    "RegionOfInterest",
    "Target",
    "Scenario",
    "make_lattice_scenario",
]
