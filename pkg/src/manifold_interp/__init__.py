"""Manifold-learning local linear interpolation for positioning trajectories."""

from .baselines import (
    InterpConfig,
    KnotSeries,
    MethodId,
    interpolate_with,
    kriging_interp,
    linear_interp,
    makima_interp,
    pchip_interp,
    rbf_interp,
    spline_interp,
)
from .errors import (
    ExtrapolationUnsupported,
    InsufficientHistory,
    InterpolationError,
    NonFiniteInput,
    ParseError,
    SingularSystem,
    ValidationError,
)
from .lli import (
    LliConfig,
    Neighborhood,
    extrapolate_next,
    interpolate_in_range,
    interpolate_point_2d,
    interpolate_series,
    reconstruct,
    solve_weights,
)

__version__ = "0.1.0"
