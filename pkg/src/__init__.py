"""Charged particle coupled to quantized field modes: dipole and quadrupole dynamics,
the reduced memory equations, and ensemble diffusion diagnostics."""

from .config import SimConfig, parse_config, render_config
from .ensemble import EnsembleResult, run_ensemble, summarize
from .models import Approximation, ConvolutionMethod, Formulation, build_lattice

__all__ = [
    "SimConfig",
    "parse_config",
    "render_config",
    "EnsembleResult",
    "run_ensemble",
    "summarize",
    "Approximation",
    "ConvolutionMethod",
    "Formulation",
    "build_lattice",
]
