"""Spectral determinants and eigenvalue tracking for PT-symmetric
anharmonic oscillators x^{2M}(ix)^eps."""

from .core_ode import IntegratorConfig
from .determinants import eval_C, eval_C_many, eval_D, eval_D_many
from .errors import DomainError, PtspecError
from .params import SpectralParams, accumulation_angles, make_params
from .sibuya import eval_f, eval_f_many
from .sweep import accumulation_check, detect_merges, sweep_eps
from .zeros import cancellation_report, find_zeros, rect_region, sector_region, winding_count

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "IntegratorConfig",
    "PtspecError",
    "SpectralParams",
    "accumulation_angles",
    "accumulation_check",
    "cancellation_report",
    "detect_merges",
    "eval_C",
    "eval_C_many",
    "eval_D",
    "eval_D_many",
    "eval_f",
    "eval_f_many",
    "find_zeros",
    "make_params",
    "rect_region",
    "sector_region",
    "sweep_eps",
    "winding_count",
    "__version__",
]
