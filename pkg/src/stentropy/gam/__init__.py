"""Binomial P-spline generalized additive models."""
from .bspline import BSplineBasis, bspline_design, difference_matrix
from .io import dump_model, dumps_model, load_model, loads_model
from .model import (
    FactorTerm,
    FitControl,
    FittedGam,
    GamSpec,
    ModelLayout,
    MultiClassGam,
    SmoothTerm,
    binomial_deviance,
    confidence_interval,
    fit_gam,
    fit_multiclass,
    gcv_select,
    penalized_deviance,
    penalized_deviance_grad,
    pirls,
    pirls_fit,
    predict_proba,
)

__all__ = [
    "BSplineBasis",
    "bspline_design",
    "difference_matrix",
    "dump_model",
    "dumps_model",
    "load_model",
    "loads_model",
    "FactorTerm",
    "FitControl",
    "FittedGam",
    "GamSpec",
    "ModelLayout",
    "MultiClassGam",
    "SmoothTerm",
    "binomial_deviance",
    "confidence_interval",
    "fit_gam",
    "fit_multiclass",
    "gcv_select",
    "penalized_deviance",
    "penalized_deviance_grad",
    "pirls",
    "pirls_fit",
    "predict_proba",
]
