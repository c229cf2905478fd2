"""Bifurcation analysis of a PIN1/IAA auxin-transport model on a row of cells."""
from .model import (
    CellRow,
    DynamicState,
    ParameterSet,
    count_peaks,
    dynamic_rhs,
    preset,
    steady_residual,
    trivial_concentrations,
    trivial_solution,
)
from .numerics import NumericsConfig, classify_stability, eigenvalues, fd_jacobian, newton_solve
from .integrate import analyze_orbit, perturbed_trivial, simulate, tile_pattern
from .continuation import (
    ContinuationConfig,
    ContinuationProblem,
    continue_branch,
    continue_in_omega,
    continue_switched,
    make_point,
    switch_branch,
)
from .atlas import GridSpec, boundary_type_map, stability_map

__version__ = "0.1.0"
SPEC_VERSION = "1.0"
