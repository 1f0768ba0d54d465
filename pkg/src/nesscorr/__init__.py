"""Two-point correlation solvers and simulators for boundary-driven lattice models."""

from .lattice import build_geometry, classify
from .models import (
    BEPSpec,
    GLSpec,
    PilesSpec,
    RateFamilySpec,
    bulk_rate,
    boundary_rates,
    irw,
    pile_block_rate,
    sde_coefficients,
    sep,
    sip,
    spec_from_json,
    spec_to_json,
)
from .density import (
    DensityField,
    apply_lap1d,
    evolve_density,
    stationary_density,
)
from .correlation import (
    CorrelationField,
    build_generator2d,
    diagonal_value,
    evolve_correlation,
    gl_shift,
    gl_unshift,
    source_term,
)
from .walks import (
    max_principle_compare,
    occupation_time_closed,
    occupation_time_solve,
    stationary_correlation_closed,
    stationary_correlation_solve,
)

__version__ = "0.1.0"
