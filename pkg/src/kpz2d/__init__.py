"""Simulation and verification lab for mesoscopic averaging of the 2D
mollified KPZ equation on the torus."""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    DegenerateDenominatorError,
    Kpz2dError,
    NumericalError,
    OracleResolutionError,
    RegimeError,
)
from .mollifier import MollifierProfile, build_profile, v_kernel
from .noise import GridSpec, MollifiedSlab, NoiseSlab, mollify_slab, sample_noise_slab, snap_dt
from .solver import FieldState, InitialCondition, evolve, heat_step, hopf_cole, init_field, noise_step
from .theory import (
    BETA_CRITICAL,
    LimitPrediction,
    ScaleSet,
    cov_prediction,
    height_shift,
    make_scale_set,
    predicted_limit_law,
    second_moment_oracle,
    sigma_gamma_sq,
    wick_moment,
)

__all__ = [
    "BETA_CRITICAL",
    "ConfigError",
    "DegenerateDenominatorError",
    "FieldState",
    "GridSpec",
    "InitialCondition",
    "Kpz2dError",
    "LimitPrediction",
    "MollifiedSlab",
    "MollifierProfile",
    "NoiseSlab",
    "NumericalError",
    "OracleResolutionError",
    "RegimeError",
    "ScaleSet",
    "build_profile",
    "cov_prediction",
    "evolve",
    "heat_step",
    "height_shift",
    "hopf_cole",
    "init_field",
    "make_scale_set",
    "mollify_slab",
    "noise_step",
    "predicted_limit_law",
    "sample_noise_slab",
    "second_moment_oracle",
    "sigma_gamma_sq",
    "snap_dt",
    "v_kernel",
    "wick_moment",
]
