"""Preferential-sampling state-space models for relative abundance counts."""

from ._prefsamp import (
    ConfigError,
    DomainError,
    IndexError,
    IoError,
    NumericalError,
    ShapeError,
    StateError,
    ValidationError,
    convolve_backward_box,
    fit,
    growing_degree_days,
    growth_rate_median,
    inclusion_probability,
    phenometric_psi,
    rmse_abundance,
    run_cli,
    simulate,
    synthetic_temperature,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "IndexError",
    "IoError",
    "NumericalError",
    "ShapeError",
    "StateError",
    "ValidationError",
    "convolve_backward_box",
    "fit",
    "growing_degree_days",
    "growth_rate_median",
    "inclusion_probability",
    "phenometric_psi",
    "rmse_abundance",
    "run_cli",
    "simulate",
    "synthetic_temperature",
]
