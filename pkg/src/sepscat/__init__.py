"""Forward and inverse scattering for −y″ on the half-line perturbed by a
finite-rank separable potential Σ α_k⟨·, v_k⟩v_k (Dirichlet condition at 0)."""

__version__ = "0.1.0"

from .errors import (AccuracyError, ConfigError, DataError, DegenerateDataError, DomainError,
                     GridRefinementError, InconsistentDataError, PoleError, RangeError,
                     ScatteringError, ZeroSetError)
from .transforms import (SeparablePotential, SpectralGrid, band_bump, exp_decay, make_grid,
                         sampled, transform_set)
from .forward_scattering import resolvent_T, scattering_S
from .spectral_zeros import boundstate_eigenfunction, find_bound_states, find_real_zeros
from .inverse_scattering import ScatteringData, extract_zeta, invert, invert_channels

__all__ = [
    "AccuracyError", "ConfigError", "DataError", "DegenerateDataError", "DomainError",
    "GridRefinementError", "InconsistentDataError", "PoleError", "RangeError",
    "ScatteringError", "ZeroSetError",
    "SeparablePotential", "SpectralGrid", "band_bump", "exp_decay", "make_grid", "sampled",
    "transform_set", "resolvent_T", "scattering_S",
    "boundstate_eigenfunction", "find_bound_states", "find_real_zeros",
    "ScatteringData", "extract_zeta", "invert", "invert_channels",
]
