"""Scalar-on-function linear regression with partially observed curves."""

from .baselines import fit_in, fit_ori, fit_sub
from .core import FunctionalDataset, GridDomain, ObservedCurve, inner_product, make_grid, masked_inner_product
from .eigen import CovarianceSurface, EigenSystem, SlopeEstimate, eigendecompose, fit_slope, select_m_fve
from .estimators import INRegressor, NMERegressor, ORIRegressor, SUBRegressor, WMERegressor
from .exceptions import (
    FragLMError,
    InsufficientDataError,
    InvalidArgumentError,
    NumericError,
)
from .nme import RidgeCompletionConfig, fit_nme, partial_moments, reconstruct_curve
from .simulation import ScenarioConfig, generate, mise, run_monte_carlo
from .wme import Bandwidths, fit_wme, smooth_moments

__version__ = "0.1.0"

__all__ = [
    "Bandwidths",
    "CovarianceSurface",
    "EigenSystem",
    "FragLMError",
    "FunctionalDataset",
    "GridDomain",
    "INRegressor",
    "InsufficientDataError",
    "InvalidArgumentError",
    "NMERegressor",
    "NumericError",
    "ORIRegressor",
    "ObservedCurve",
    "RidgeCompletionConfig",
    "SUBRegressor",
    "ScenarioConfig",
    "SlopeEstimate",
    "WMERegressor",
    "eigendecompose",
    "fit_in",
    "fit_nme",
    "fit_ori",
    "fit_slope",
    "fit_sub",
    "fit_wme",
    "generate",
    "inner_product",
    "make_grid",
    "masked_inner_product",
    "mise",
    "partial_moments",
    "reconstruct_curve",
    "run_monte_carlo",
    "select_m_fve",
    "smooth_moments",
]
