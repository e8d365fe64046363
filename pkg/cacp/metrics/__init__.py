# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
:py:mod:`~cacp.metrics`
====================================================

Interval evaluation: coverage (PICP), average interval width (AIW), the Winkler
score and coverage by hour of day. Coverage uses the closed interval.

Callers pass daylight records only; every method under comparison must be
evaluated over the same records.

"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

try:
    from typing import Dict, List, Mapping, Optional, Sequence

    from ..core import PredictionInterval
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

INTERVAL_COLUMNS = (
    "site_id",
    "timestamp",
    "hour",
    "method",
    "alpha",
    "lower",
    "upper",
    "actual",
    "covered",
)
"""Columns of an interval frame, as produced by the backtest."""


def _bounds(intervals: Sequence[PredictionInterval]):
    if not len(intervals):
        raise ValueError("no intervals to evaluate")
    lower = np.fromiter((i.lower for i in intervals), dtype=float, count=len(intervals))
    upper = np.fromiter((i.upper for i in intervals), dtype=float, count=len(intervals))
    return lower, upper


def _actuals(actuals, size: int) -> np.ndarray:
    actuals = np.asarray(actuals, dtype=float)
    if actuals.shape != (size,):
        raise ValueError("intervals and actuals must be aligned")
    return actuals


def covered_mask(lower, upper, actual) -> np.ndarray:
    """Closed-interval membership, elementwise."""
    actual = np.asarray(actual, dtype=float)
    return (np.asarray(lower, dtype=float) <= actual) & (actual <= np.asarray(upper, dtype=float))


def picp_arrays(lower, upper, actual) -> float:
    """Array form of `picp`."""
    covered = covered_mask(lower, upper, actual)
    if covered.size == 0:
        raise ValueError("no intervals to evaluate")
    return float(covered.mean())


def aiw_arrays(lower, upper) -> float:
    """Array form of `aiw`."""
    widths = np.asarray(upper, dtype=float) - np.asarray(lower, dtype=float)
    if widths.size == 0:
        raise ValueError("no intervals to evaluate")
    return float(widths.mean())


def winkler_scores(lower, upper, actual, alpha: float) -> np.ndarray:
    """Per-record Winkler scores: the width plus ``2 / alpha`` times the miss distance."""
    if not alpha > 0.0:
        raise ValueError("alpha must be positive")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    actual = np.asarray(actual, dtype=float)
    penalty = np.maximum(lower - actual, 0.0) + np.maximum(actual - upper, 0.0)
    return (upper - lower) + (2.0 / alpha) * penalty


def winkler_arrays(lower, upper, actual, alpha: float) -> float:
    """Array form of `winkler`."""
    scores = winkler_scores(lower, upper, actual, alpha)
    if scores.size == 0:
        raise ValueError("no intervals to evaluate")
    return float(scores.mean())


def picp(intervals: Sequence[PredictionInterval], actuals: Sequence[float]) -> float:
    """
    Fraction of actuals inside their interval, bounds included.

    :raises ValueError: when empty or misaligned
    """
    lower, upper = _bounds(intervals)
    return picp_arrays(lower, upper, _actuals(actuals, lower.size))


def aiw(intervals: Sequence[PredictionInterval]) -> float:
    """Mean interval width."""
    lower, upper = _bounds(intervals)
    return aiw_arrays(lower, upper)


def winkler(
    intervals: Sequence[PredictionInterval], actuals: Sequence[float], alpha: float
) -> float:
    """
    Mean Winkler score at miscoverage ``alpha``.

    Example::

        winkler([PredictionInterval(0.2, 0.8, 0.2)], [0.9], 0.2)  # 1.6
    """
    lower, upper = _bounds(intervals)
    return winkler_arrays(lower, upper, _actuals(actuals, lower.size), alpha)


def hourly_coverage(
    intervals: Sequence[PredictionInterval],
    actuals: Sequence[float],
    hours: Sequence[int],
    is_daylight: Optional[Sequence[bool]] = None,
) -> Dict[int, float]:
    """
    PICP per hour of day. Night records, when flagged, are dropped and hours with no
    records are absent from the result.
    """
    if not len(intervals):
        return {}
    lower, upper = _bounds(intervals)
    covered = covered_mask(lower, upper, _actuals(actuals, lower.size))
    hours = np.asarray(hours, dtype=int)
    if hours.shape != covered.shape:
        raise ValueError("intervals and hours must be aligned")
    if is_daylight is not None:
        keep = np.asarray(is_daylight, dtype=bool)
        covered, hours = covered[keep], hours[keep]
    return _hourly_from_covered(covered, hours)


def _hourly_from_covered(covered: np.ndarray, hours: np.ndarray) -> Dict[int, float]:
    result = {}
    for hour in np.unique(hours):
        result[int(hour)] = float(covered[hours == hour].mean())
    return result


@dataclass
class MetricsReport:
    """Metrics of one method, keyed by ``alpha``."""

    picp: Dict[float, float] = field(default_factory=dict)
    aiw: Dict[float, float] = field(default_factory=dict)
    winkler: Dict[float, float] = field(default_factory=dict)
    hourly_picp: Dict[float, Dict[int, float]] = field(default_factory=dict)
    n_evaluated: int = 0

    @property
    def alphas(self) -> List[float]:
        """Evaluated miscoverage rates, ascending."""
        return sorted(self.picp)

    def mean_winkler(self) -> float:
        """Winkler score averaged over the evaluated ``alpha`` values."""
        if not self.winkler:
            raise ValueError("no intervals to evaluate")
        return float(np.mean([self.winkler[alpha] for alpha in self.alphas]))

    def rows(self, method: str) -> List[dict]:
        """One summary row per ``alpha``."""
        return [
            {
                "method": method,
                "alpha": alpha,
                "picp": self.picp[alpha],
                "aiw": self.aiw[alpha],
                "winkler": self.winkler[alpha],
            }
            for alpha in self.alphas
        ]


def site_average(per_site: Mapping[str, float]) -> float:
    """Unweighted mean of per-site values."""
    if not per_site:
        raise ValueError("no sites to average")
    return float(np.mean([per_site[site] for site in sorted(per_site)]))


def _group_metrics(group: pd.DataFrame, alpha: float) -> Dict[str, float]:
    lower = group["lower"].to_numpy(dtype=float)
    upper = group["upper"].to_numpy(dtype=float)
    actual = group["actual"].to_numpy(dtype=float)
    return {
        "picp": picp_arrays(lower, upper, actual),
        "aiw": aiw_arrays(lower, upper),
        "winkler": winkler_arrays(lower, upper, actual, alpha),
    }


def evaluate_frame(frame: pd.DataFrame, *, pooled: bool = False) -> Dict[str, MetricsReport]:
    """
    `MetricsReport` per method from an interval frame.

    Metrics are computed per site and averaged across sites, or over all records at
    once with ``pooled``. Hourly coverage always pools sites within an hour.

    :param pandas.DataFrame frame: columns as in `INTERVAL_COLUMNS`
    :rtype: dict
    """
    reports: Dict[str, MetricsReport] = {}
    if frame.empty:
        return reports
    frame = frame.sort_values(["method", "alpha", "site_id", "timestamp"], kind="mergesort")
    for method, by_method in frame.groupby("method", sort=True):
        report = MetricsReport()
        report.n_evaluated = int(
            by_method[["site_id", "timestamp"]].drop_duplicates().shape[0]
        )
        for alpha, by_alpha in by_method.groupby("alpha", sort=True):
            alpha = float(alpha)
            if pooled:
                values = _group_metrics(by_alpha, alpha)
            else:
                per_site = {
                    site: _group_metrics(by_site, alpha)
                    for site, by_site in by_alpha.groupby("site_id", sort=True)
                }
                values = {
                    name: site_average({site: m[name] for site, m in per_site.items()})
                    for name in ("picp", "aiw", "winkler")
                }
            report.picp[alpha] = values["picp"]
            report.aiw[alpha] = values["aiw"]
            report.winkler[alpha] = values["winkler"]
            covered = covered_mask(by_alpha["lower"], by_alpha["upper"], by_alpha["actual"])
            report.hourly_picp[alpha] = _hourly_from_covered(
                covered, by_alpha["hour"].to_numpy(dtype=int)
            )
        reports[str(method)] = report
    return reports


def coverage_width_points(reports: Mapping[str, MetricsReport]) -> pd.DataFrame:
    """PICP against AIW per method and ``alpha``, for coverage/width curves."""
    rows = [
        {"method": method, "alpha": alpha, "picp": report.picp[alpha], "aiw": report.aiw[alpha]}
        for method, report in sorted(reports.items())
        for alpha in report.alphas
    ]
    return pd.DataFrame(rows, columns=["method", "alpha", "picp", "aiw"])


def hourly_table(reports: Mapping[str, MetricsReport]) -> pd.DataFrame:
    """Long table of hourly PICP per method and ``alpha``."""
    rows = [
        {"method": method, "alpha": alpha, "hour": hour, "picp": value}
        for method, report in sorted(reports.items())
        for alpha in report.alphas
        for hour, value in sorted(report.hourly_picp[alpha].items())
    ]
    return pd.DataFrame(rows, columns=["method", "alpha", "hour", "picp"])


ADJUSTMENT_COLUMNS = ("method", "alpha", "hour", "mean_adjustment", "delta_iw", "n")


def hourly_adjustment_table(frame: pd.DataFrame) -> pd.DataFrame:
    """
    Mean adjustment ``s`` and mean width change against the raw interval
    (``delta_iw``) per method, ``alpha`` and local hour.

    ``delta_iw`` differs from ``2 s`` wherever clipping or a collapsed interval
    changed the width. Needs the ``adjustment`` and ``raw_width`` columns the
    backtest writes.
    """
    if frame.empty:
        return pd.DataFrame({column: [] for column in ADJUSTMENT_COLUMNS})
    missing = sorted({"adjustment", "raw_width"} - set(frame.columns))
    if missing:
        raise ValueError("interval frame lacks {}".format(", ".join(missing)))
    work = frame.assign(
        delta_iw=frame["upper"] - frame["lower"] - frame["raw_width"],
    )
    table = (
        work.groupby(["method", "alpha", "hour"], sort=True)
        .agg(
            mean_adjustment=("adjustment", "mean"),
            delta_iw=("delta_iw", "mean"),
            n=("adjustment", "size"),
        )
        .reset_index()
    )
    return table[list(ADJUSTMENT_COLUMNS)]
