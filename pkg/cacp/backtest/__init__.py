# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
:py:mod:`~cacp.backtest`
====================================================

The rolling recalibration engine. For every test day the tuned methods are
re-tuned on the trailing validation days when due, then all daylight intervals of
the day are calibrated in one batch on every daylight record strictly before it.

Example::

    result = run_backtest(series, BacktestConfig(methods=["cqr", "cacp_knn"]))
    for method, report in result.reports.items():
        print(method, report.mean_winkler())

"""

from __future__ import annotations

import logging
import os
import time
from collections import abc
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date

import numpy as np
import pandas as pd

from ..conformal.adaptive import AdaptiveCalibrator
from ..conformal.weights import UniformScheme
from ..core import DEFAULT_ALPHAS, TargetCoverage
from ..features import FAMILIES
from ..io.config import (
    BoolField,
    ChoiceField,
    ConfigBase,
    DateField,
    FloatField,
    IntField,
    MappingField,
    TupleField,
)
from ..metrics import covered_mask, evaluate_frame
from .site import (
    ADAPTIVE_CP,
    CACP_KERNEL,
    CACP_KMEANS,
    CACP_KNN,
    CONTEXT_METHODS,
    CQR,
    METHODS,
    NEXCP,
    RAW,
    SCORE_LEVELS,
    TUNED_METHODS,
    WEIGHTED_METHODS,
    CalibrationOptions,
    FeatureView,
    SiteFrame,
    adjust_bounds,
    build_view,
    make_scheme,
    scheme_adjustments,
    scheme_score_quantiles,
)
from .tuning import TuningResult, feature_choices, split_for_day, tune

try:
    from typing import Any, Dict, List, Mapping, Optional, Sequence

    from ..core import TimeSeriesRecord
    from ..metrics import MetricsReport
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

DEFAULT_TUNING_GRIDS = {
    CACP_KERNEL: {"kernel": ["rbf", "laplacian"], "gamma": [0.5, 1.0, 2.0]},
    CACP_KMEANS: {"K": [3, 5, 8, 12]},
    CACP_KNN: {"K": [50, 100, 200, 500, 1000]},
    NEXCP: {"rho_decay": [0.95, 0.98, 0.995]},
    ADAPTIVE_CP: {"gamma_lr": [1e-4, 5e-4, 1e-3]},
}
"""Hyperparameter values searched per tuned method."""

GRID_PARAMETERS = {
    CACP_KERNEL: ("gamma", "kernel"),
    CACP_KMEANS: ("K",),
    CACP_KNN: ("K",),
    NEXCP: ("rho_decay",),
    ADAPTIVE_CP: ("gamma_lr",),
}

KERNELS = ("rbf", "laplacian")


def _positive(name: str, value: Any) -> None:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ValueError("{} values must be positive numbers".format(name))


def check_tuning_grids(grids: Mapping) -> Dict[str, Dict[str, list]]:
    """
    Merge ``grids`` over `DEFAULT_TUNING_GRIDS` and check every method's grid.

    Methods missing from ``grids`` keep their default grid.
    """
    merged = {method: dict(grid) for method, grid in DEFAULT_TUNING_GRIDS.items()}
    for method, grid in grids.items():
        if method not in GRID_PARAMETERS:
            raise ValueError("tuning_grids has no method {!r}".format(method))
        if not isinstance(grid, abc.Mapping):
            raise ValueError("tuning grid of {} must be a mapping".format(method))
        merged[method] = dict(merged[method], **grid)
    for method, grid in merged.items():
        expected = GRID_PARAMETERS[method]
        unknown = sorted(set(grid) - set(expected))
        if unknown:
            raise ValueError("unknown {} parameter(s): {}".format(method, ", ".join(unknown)))
        for name in expected:
            values = grid[name]
            if isinstance(values, (str, bytes)) or not isinstance(values, abc.Sequence):
                values = [values]
            values = list(values)
            if not values:
                raise ValueError("empty tuning grid for {}.{}".format(method, name))
            if name == "kernel":
                for value in values:
                    if value not in KERNELS:
                        raise ValueError("kernel must be one of {}".format(", ".join(KERNELS)))
            elif name == "K":
                for value in values:
                    if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                        raise ValueError("K values must be positive integers")
            elif name == "rho_decay":
                for value in values:
                    _positive(name, value)
                    if value > 1:
                        raise ValueError("rho_decay values must be in (0, 1]")
            else:
                for value in values:
                    _positive(name, value)
            grid[name] = values
    return merged


class BacktestConfig(ConfigBase):
    """
    Settings of a backtest run.

    ``delta_rec`` of None tunes once, on the first test day. Without
    ``initial_calibration_end`` testing starts two months after each site's first
    local date. ``workers`` processes run sites side by side; within a site,
    ``tuning_threads`` (default: one per tuned method) tune methods side by side.
    """

    delta_rec = IntField(1, min_value=1, optional=True)
    initial_calibration_end = DateField(None, optional=True)
    test_end = DateField(None, optional=True)
    validation_window = IntField(7, min_value=1)
    alpha_grid = TupleField(
        DEFAULT_ALPHAS, item=FloatField(0.1, min_value=0.0, max_value=1.0, exclusive=True)
    )
    methods = TupleField(METHODS, item=ChoiceField(CQR, METHODS))
    tuning_grids = MappingField(DEFAULT_TUNING_GRIDS, validator=check_tuning_grids)
    lag_offsets = TupleField((24, 48), item=IntField(24, min_value=24))
    lag_windows = TupleField((0, 1, 2), item=IntField(0, min_value=0))
    feature_families = TupleField(FAMILIES, item=ChoiceField("lags", FAMILIES))
    clip = BoolField(True)
    finite_sample_correction = BoolField(False)
    test_point_mass = BoolField(False)
    max_calibration_size = IntField(None, min_value=1, optional=True)
    pooled_metrics = BoolField(False)
    seed = IntField(0, min_value=0)
    workers = IntField(None, min_value=1, optional=True)
    tuning_threads = IntField(None, min_value=1, optional=True)

    @property
    def options(self) -> CalibrationOptions:
        """Calibration switches shared by every method."""
        return CalibrationOptions(
            clip=self.clip,
            finite_sample_correction=self.finite_sample_correction,
            test_point_mass=self.test_point_mass,
        )

    @property
    def alphas(self) -> tuple:
        """Distinct ``alpha_grid`` values, ascending."""
        return tuple(sorted(set(self.alpha_grid)))

    def method_order(self) -> tuple:
        """Configured methods without repeats, in their configured order."""
        return tuple(dict.fromkeys(self.methods))


@dataclass(frozen=True)
class DayTiming:
    """Wall clock spent on one site's test day."""

    site_id: str
    day: date
    tuned: bool
    seconds: float
    calibration_size: int


@dataclass
class SiteResult:
    """Output of one site."""

    site_id: str
    intervals: pd.DataFrame
    tuning_history: List[Dict[str, Any]] = field(default_factory=list)
    timings: List[DayTiming] = field(default_factory=list)
    skipped: int = 0
    scores: pd.DataFrame = field(default_factory=pd.DataFrame)
    score_quantiles: pd.DataFrame = field(default_factory=pd.DataFrame)


@dataclass
class BacktestResult:
    """
    Calibrated intervals of every method and their metrics.

    ``skipped`` counts, per site, daylight test records no method was evaluated on
    because a tuned feature was unavailable. ``scores`` holds the calibration scores
    of each site's last test day, and ``score_quantiles`` the weighted quantiles of
    those scores each method used for every record of that day.
    """

    intervals: pd.DataFrame
    reports: Dict[str, MetricsReport]
    tuning_history: List[Dict[str, Any]]
    timings: List[DayTiming]
    skipped: Dict[str, int]
    config: BacktestConfig
    scores: pd.DataFrame = field(default_factory=pd.DataFrame)
    score_quantiles: pd.DataFrame = field(default_factory=pd.DataFrame)

    @property
    def n_evaluated(self) -> int:
        """Distinct (site, timestamp) pairs with intervals."""
        if self.intervals.empty:
            return 0
        return int(self.intervals[["site_id", "timestamp"]].drop_duplicates().shape[0])


INTERVAL_FRAME_COLUMNS = (
    "site_id",
    "timestamp",
    "hour",
    "method",
    "alpha",
    "lower",
    "upper",
    "actual",
    "covered",
    "adjustment",
    "raw_width",
)


SCORE_COLUMNS = ("site_id", "day", "alpha", "timestamp", "score")

SCORE_QUANTILE_COLUMNS = ("site_id", "timestamp", "hour", "method", "alpha", "level", "score")


def _empty_frame() -> pd.DataFrame:
    return pd.DataFrame({column: [] for column in INTERVAL_FRAME_COLUMNS})


def _concat(blocks: Sequence[pd.DataFrame], columns: Sequence[str]) -> pd.DataFrame:
    blocks = [block for block in blocks if not block.empty]
    if not blocks:
        return pd.DataFrame({column: [] for column in columns})
    return pd.concat(blocks, ignore_index=True)


def first_test_day(site: SiteFrame, config: BacktestConfig) -> int:
    """Ordinal of the first test day of ``site``."""
    if config.initial_calibration_end is not None:
        return config.initial_calibration_end.toordinal()
    first = date.fromordinal(int(site.days[0]))
    return (pd.Timestamp(first) + pd.DateOffset(months=2)).date().toordinal()


class _SiteEngine:
    def __init__(self, site: SiteFrame, config: BacktestConfig) -> None:
        self.site = site
        self.config = config
        self.options = config.options
        self.alphas = config.alphas
        self.methods = config.method_order()
        self.choices = feature_choices(
            config.feature_families, config.lag_offsets, config.lag_windows
        )
        self.tuned: Dict[str, TuningResult] = {}
        self.adaptive: Dict[float, AdaptiveCalibrator] = {}
        self.history: List[Dict[str, Any]] = []
        self.blocks: List[pd.DataFrame] = []
        self.score_blocks: List[pd.DataFrame] = []
        self.quantile_blocks: List[pd.DataFrame] = []
        self.timings: List[DayTiming] = []
        self.skipped = 0

    def test_days(self) -> np.ndarray:
        days = self.site.local_days()
        selected = days[days >= first_test_day(self.site, self.config)]
        if self.config.test_end is not None:
            selected = selected[selected <= self.config.test_end.toordinal()]
        return selected

    def _set_learning_rate(self, gamma_lr: float) -> None:
        # alpha_effective carries over a re-tune
        for alpha in self.alphas:
            if alpha in self.adaptive:
                self.adaptive[alpha].set_learning_rate(gamma_lr)
            else:
                self.adaptive[alpha] = AdaptiveCalibrator(alpha, gamma_lr, clip=self.config.clip)

    def retune(self, day: int) -> None:
        config = self.config
        split = split_for_day(
            self.site, day, config.validation_window, config.max_calibration_size
        )
        if split.val_rows.size == 0:
            logger.warning(
                "%s has no validation records before %s",
                self.site.site_id,
                date.fromordinal(day).isoformat(),
            )
        methods = [method for method in self.methods if method in TUNED_METHODS]
        # Views are shared between methods; building them first keeps the threads
        # from racing on the same feature choice.
        split.view()
        if any(method in CONTEXT_METHODS for method in methods):
            for choice in self.choices:
                split.view(choice)

        def tune_method(method: str) -> TuningResult:
            return tune(
                method,
                split,
                self.alphas,
                config.tuning_grids[method],
                self.choices,
                options=self.options,
                seed=config.seed,
            )

        threads = min(config.tuning_threads or len(methods) or 1, max(len(methods), 1))
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as executor:
                results = list(executor.map(tune_method, methods))
        else:
            results = [tune_method(method) for method in methods]
        for method, result in zip(methods, results):
            self.tuned[method] = result
            if method == ADAPTIVE_CP:
                self._set_learning_rate(float(result.chosen_params["gamma_lr"]))
            entry = {"site_id": self.site.site_id, "day": date.fromordinal(day).isoformat()}
            entry.update(result.as_dict())
            self.history.append(entry)

    def _views(self, cal_rows: np.ndarray, day_rows: np.ndarray):
        site = self.site
        views = {}
        dropped = np.zeros(0, dtype=int)
        for method in self.methods:
            if method not in CONTEXT_METHODS:
                continue
            result = self.tuned[method]
            view = build_view(
                site,
                cal_rows,
                day_rows,
                result.chosen_feature_mask,
                result.lag_offset,
                result.lag_window,
            )
            views[method] = view
            if view is None:
                dropped = day_rows
            else:
                dropped = np.union1d(dropped, view.dropped_targets)
        keep = np.setdiff1d(day_rows, dropped)
        plain = build_view(site, cal_rows, keep)
        return views, plain, keep

    def _scheme(self, method: str):
        params = self.tuned[method].chosen_params if method in self.tuned else {}
        return make_scheme(method, params, self.config.seed)

    def _adjustments(self, method: str, view, keep: np.ndarray) -> Dict[float, np.ndarray]:
        if method == RAW:
            return {alpha: np.zeros(keep.size) for alpha in self.alphas}
        positions = np.flatnonzero(np.isin(view.target_rows, keep))
        scheme = self._scheme(method)
        try:
            adjustments = scheme_adjustments(scheme, view, self.alphas, self.options)
        except ValueError as error:
            logger.warning(
                "%s on %s fell back to uniform weights: %s", method, self.site.site_id, error
            )
            adjustments = scheme_adjustments(UniformScheme(), view, self.alphas, self.options)
        return {alpha: values[positions] for alpha, values in adjustments.items()}

    def _emit(
        self, method: str, alpha: float, rows: np.ndarray, adjustment: np.ndarray
    ) -> np.ndarray:
        site = self.site
        lower = site.lower[alpha][rows]
        upper = site.upper[alpha][rows]
        if method != RAW:
            lower, upper = adjust_bounds(lower, upper, adjustment, self.options.clip)
        covered = covered_mask(lower, upper, site.actual[rows])
        self.blocks.append(
            pd.DataFrame(
                {
                    "site_id": site.site_id,
                    "timestamp": [site.instants[i].isoformat() for i in rows],
                    "hour": site.hours[rows],
                    "method": method,
                    "alpha": alpha,
                    "lower": lower,
                    "upper": upper,
                    "actual": site.actual[rows],
                    "covered": covered,
                    "adjustment": adjustment,
                    "raw_width": site.upper[alpha][rows] - site.lower[alpha][rows],
                    "_row": rows,
                }
            )
        )
        return covered

    def _snapshot(
        self,
        day: int,
        views: Dict[str, Optional[FeatureView]],
        plain: FeatureView,
        keep: np.ndarray,
    ) -> None:
        site = self.site
        stamp = date.fromordinal(day).isoformat()
        for alpha in self.alphas:
            records = plain.cal.score_records(alpha)
            self.score_blocks.append(
                pd.DataFrame(
                    {
                        "site_id": site.site_id,
                        "day": stamp,
                        "alpha": alpha,
                        "timestamp": [record.t.isoformat() for record in records],
                        "score": [record.value for record in records],
                    }
                )
            )
        n_levels = len(SCORE_LEVELS)
        for method in self.methods:
            if method not in WEIGHTED_METHODS:
                continue
            view = views.get(method) or plain
            positions = np.flatnonzero(np.isin(view.target_rows, keep))
            try:
                quantiles = scheme_score_quantiles(self._scheme(method), view, self.alphas)
            except ValueError:
                quantiles = scheme_score_quantiles(UniformScheme(), view, self.alphas)
            for alpha, values in quantiles.items():
                self.quantile_blocks.append(
                    pd.DataFrame(
                        {
                            "site_id": site.site_id,
                            "timestamp": np.repeat(
                                [site.instants[i].isoformat() for i in keep], n_levels
                            ),
                            "hour": np.repeat(site.hours[keep], n_levels),
                            "method": method,
                            "alpha": alpha,
                            "level": np.tile(SCORE_LEVELS, keep.size),
                            "score": values[positions].ravel(),
                        }
                    )
                )

    def run_day(self, index: int, day: int, snapshot: bool = False) -> None:
        config = self.config
        site = self.site
        started = time.perf_counter()
        cal_rows = site.daylight_before(day, config.max_calibration_size)
        if cal_rows.size == 0:
            raise ValueError(
                "initial calibration window of {} is empty".format(site.site_id)
            )
        due = index == 0 if config.delta_rec is None else index % config.delta_rec == 0
        if due:
            self.retune(day)
        day_rows = site.daylight_between(day, day)
        views, plain, keep = self._views(cal_rows, day_rows)
        skipped = day_rows.size - keep.size
        if skipped:
            logger.warning(
                "%s %s: %d record(s) skipped for missing features",
                site.site_id,
                date.fromordinal(day).isoformat(),
                skipped,
            )
            self.skipped += skipped
        if keep.size:
            for method in self.methods:
                if method == ADAPTIVE_CP:
                    for alpha, calibrator in self.adaptive.items():
                        adjustment = np.full(keep.size, calibrator.adjustment(plain.cal))
                        for hit in self._emit(method, alpha, keep, adjustment):
                            calibrator.update(bool(hit))
                    continue
                view = views.get(method, plain)
                for alpha, adjustment in self._adjustments(method, view, keep).items():
                    self._emit(method, alpha, keep, adjustment)
            if snapshot:
                self._snapshot(day, views, plain, keep)
        elapsed = time.perf_counter() - started
        self.timings.append(
            DayTiming(site.site_id, date.fromordinal(day), due, elapsed, int(cal_rows.size))
        )
        logger.debug(
            "%s %s: %d intervals per method in %.3f s (calibration size %d)",
            site.site_id,
            date.fromordinal(day).isoformat(),
            keep.size,
            elapsed,
            cal_rows.size,
        )

    def run(self) -> SiteResult:
        days = self.test_days()
        if days.size == 0:
            raise ValueError("{} has no test days".format(self.site.site_id))
        for index, day in enumerate(days):
            self.run_day(index, int(day), snapshot=index == days.size - 1)
        if self.blocks:
            frame = pd.concat(self.blocks, ignore_index=True)
            frame = frame.sort_values("_row", kind="mergesort").drop(columns="_row")
            frame = frame.reset_index(drop=True)
        else:
            frame = _empty_frame()
        return SiteResult(
            self.site.site_id,
            frame,
            self.history,
            self.timings,
            self.skipped,
            _concat(self.score_blocks, SCORE_COLUMNS),
            _concat(self.quantile_blocks, SCORE_QUANTILE_COLUMNS),
        )


def backtest_site(
    site_id: str, records: Sequence[TimeSeriesRecord], config: BacktestConfig
) -> SiteResult:
    """Run every test day of one site."""
    site = SiteFrame(site_id, records, config.alphas)
    return _SiteEngine(site, config).run()


def _check_config(config: BacktestConfig) -> None:
    for alpha in config.alpha_grid:
        TargetCoverage(alpha)
    if not config.methods:
        raise ValueError("no methods configured")


def run_backtest(
    data: Mapping[str, Sequence[TimeSeriesRecord]], config: Optional[BacktestConfig] = None
) -> BacktestResult:
    """
    Backtest every configured method on every site.

    Sites run in separate processes when ``config.workers`` (default: the number of
    CPUs) is above one. Output is ordered by site, then time, then method and
    ``alpha``, whatever the worker count.

    :param Mapping data: site id to that site's records, sorted by time
    :param BacktestConfig config: run settings
    :rtype: BacktestResult
    """
    config = config or BacktestConfig()
    _check_config(config)
    site_ids = sorted(data)
    if not site_ids:
        raise ValueError("no sites to backtest")
    workers = config.workers or os.cpu_count() or 1
    workers = min(workers, len(site_ids))
    logger.info("backtesting %d site(s) with %d worker(s)", len(site_ids), workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(backtest_site, site_id, list(data[site_id]), config)
                for site_id in site_ids
            ]
            results = [future.result() for future in futures]
    else:
        results = [backtest_site(site_id, data[site_id], config) for site_id in site_ids]
    frames = [result.intervals for result in results if not result.intervals.empty]
    intervals = (
        pd.concat(frames, ignore_index=True) if frames else _empty_frame()
    )
    reports = evaluate_frame(intervals, pooled=config.pooled_metrics)
    return BacktestResult(
        intervals=intervals,
        reports=reports,
        tuning_history=[entry for result in results for entry in result.tuning_history],
        timings=[timing for result in results for timing in result.timings],
        skipped={result.site_id: result.skipped for result in results},
        config=config,
        scores=_concat([result.scores for result in results], SCORE_COLUMNS),
        score_quantiles=_concat(
            [result.score_quantiles for result in results], SCORE_QUANTILE_COLUMNS
        ),
    )


__all__ = [
    "ADAPTIVE_CP",
    "CACP_KERNEL",
    "CACP_KMEANS",
    "CACP_KNN",
    "CONTEXT_METHODS",
    "CQR",
    "DEFAULT_TUNING_GRIDS",
    "METHODS",
    "NEXCP",
    "RAW",
    "SCORE_COLUMNS",
    "SCORE_QUANTILE_COLUMNS",
    "TUNED_METHODS",
    "BacktestConfig",
    "BacktestResult",
    "DayTiming",
    "SiteResult",
    "TuningResult",
    "backtest_site",
    "run_backtest",
    "tune",
]
