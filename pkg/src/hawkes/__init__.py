"""Simulation and statistical verification toolkit for Hawkes point processes."""

from .history import (EMPTY_STATE, DivergenceError, InterArrivalState,
                      PointMeasure, excitation_sum, from_point_measure,
                      prepend_gap, sequence_distance, to_point_measure)
from .model import (Activation, AffineActivation, ExponentialKernel,
                    MemoryKernel, ModelParams, PolynomialActivation,
                    TabulatedActivation, TabulatedKernel, affine_dominator,
                    averaged_growth_rate)
from .rng import ExponentialStream, philox_generator
from .simulator import (IntegrityError, PathStatus, PointPath, SimConfig,
                        UnboundedSearchError, UnsupportedModelError,
                        UnsupportedOracleError, compensator_increments,
                        cumulative_intensity, kernel_step, next_gap_inverse,
                        next_gap_thinning, random_walk_bound_check, simulate)

__version__ = "0.1.0"

__all__ = [
    "AffineActivation", "Activation", "DivergenceError", "EMPTY_STATE",
    "ExponentialKernel", "ExponentialStream", "IntegrityError",
    "InterArrivalState", "MemoryKernel", "ModelParams", "PathStatus",
    "PointMeasure", "PointPath", "PolynomialActivation", "SimConfig",
    "TabulatedActivation", "TabulatedKernel", "UnboundedSearchError",
    "UnsupportedModelError", "UnsupportedOracleError", "affine_dominator",
    "averaged_growth_rate", "compensator_increments", "cumulative_intensity",
    "excitation_sum", "from_point_measure", "kernel_step", "next_gap_inverse",
    "next_gap_thinning", "philox_generator", "prepend_gap",
    "random_walk_bound_check", "sequence_distance", "simulate",
    "to_point_measure", "__version__",
]
