# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""

Context-aware conformal calibration of probabilistic solar forecasts. Raw
quantile intervals are widened or narrowed by a weighted quantile of past
conformity scores, with weights reflecting how similar each past hour is to the
hour being forecast.

"""

from __future__ import annotations

from .backtest import BacktestConfig, BacktestResult, run_backtest
from .conformal import CalibrationSet, calibrate_interval
from .core import PredictionInterval, TargetCoverage, TimeSeriesRecord, weighted_quantile
from .io import DatasetSchema, ingest, interval_from_quantiles
from .synth import SynthSpec, generate

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

__all__ = [
    "BacktestConfig",
    "BacktestResult",
    "CalibrationSet",
    "DatasetSchema",
    "PredictionInterval",
    "SynthSpec",
    "TargetCoverage",
    "TimeSeriesRecord",
    "calibrate_interval",
    "generate",
    "ingest",
    "interval_from_quantiles",
    "run_backtest",
    "weighted_quantile",
]
