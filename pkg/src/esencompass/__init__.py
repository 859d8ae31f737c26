"""Forecast encompassing tests for Expected Shortfall and Value at Risk.

Two competing forecasters are compared by estimating a combination of their
forecasts under the zero-homogeneous joint (VaR, ES) loss and testing, with a
misspecification-robust Wald statistic, whether one of them receives all the
weight.

>>> from esencompass import DgpSpec, simulate, run_test
>>> fs = simulate(DgpSpec("GarchCombo", pi=0.0, n=1000, seed=1))
>>> report = run_test(fs, "StrictES", direction=1)   # doctest: +SKIP
"""

from __future__ import annotations

from .core import (
    CollinearForecasts,
    DataError,
    EncompassingError,
    ForecastSet,
    NumericError,
    make_forecast_set,
)
from .dgps import FAMILIES, DgpSpec, simulate
from .encompassing import (
    AUX,
    JOINT,
    STRICT_ES,
    VAR,
    VARIANTS,
    Decision,
    TestOptions,
    TestReport,
    decide,
    run_test,
    run_tests,
)
from .fcmodels import MODEL_KINDS, ModelSpec, pairwise_matrix
from .links import LinkSpec
from .mcharness import ExperimentPlan, run_plan
from .mestim import EstimatorOptions, Theta, estimate
from .scoring import fz0_loss, psi, tick_loss
from .vcov import VcovOptions, sandwich

__version__ = "0.1.0"

__all__ = [
    "AUX", "JOINT", "STRICT_ES", "VAR", "VARIANTS", "FAMILIES", "MODEL_KINDS",
    "CollinearForecasts", "DataError", "EncompassingError", "NumericError",
    "ForecastSet", "make_forecast_set",
    "DgpSpec", "simulate",
    "Decision", "TestOptions", "TestReport", "decide", "run_test", "run_tests",
    "ModelSpec", "pairwise_matrix",
    "LinkSpec", "ExperimentPlan", "run_plan",
    "EstimatorOptions", "Theta", "estimate",
    "fz0_loss", "psi", "tick_loss",
    "VcovOptions", "sandwich",
]
