"""Dynamic Chebyshev pricing and credit exposure for European, Bermudan and barrier options."""

from .cheb import ChebDomain, ChebPoly
from .exposure import ExposureConfig, ExposureProfile, run_exposure, run_exposure_many
from .models import ModelSpec, ModelTag, simulate_paths
from .pricer import ProductKind, ProductSpec, backward_induction, price, solve, spot_greeks

__all__ = [
    "ChebDomain",
    "ChebPoly",
    "ExposureConfig",
    "ExposureProfile",
    "ModelSpec",
    "ModelTag",
    "ProductKind",
    "ProductSpec",
    "backward_induction",
    "price",
    "run_exposure",
    "run_exposure_many",
    "simulate_paths",
    "solve",
    "spot_greeks",
]
