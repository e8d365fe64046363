# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`site`
====================================================

Per-site arrays shared by tuning and daily calibration: raw bounds and conformity
scores per ``alpha``, feature blocks, and calibration sets built over a subset of
rows for one feature choice.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..conformal import (
    CalibrationSet,
    calibration_adjustments,
    conformity_scores,
    neighbour_adjustments,
)
from ..conformal.weights import (
    KMeansScheme,
    KNNScheme,
    NexCPScheme,
    PairwiseCache,
    UniformScheme,
    WeightScheme,
    compute_weight_matrix,
    scheme_label,
)
from ..features import (
    FeatureMask,
    FeatureTable,
    StandardizationStats,
    assemble_covariates,
)
from ..io import raw_interval_arrays

try:
    from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

    from ..core import TimeSeriesRecord
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

RAW = "raw"
CQR = "cqr"
CACP_KERNEL = "cacp_kernel"
CACP_KMEANS = "cacp_kmeans"
CACP_KNN = "cacp_knn"
NEXCP = "nexcp"
ADAPTIVE_CP = "adaptive_cp"

METHODS = (RAW, CQR, CACP_KERNEL, CACP_KMEANS, CACP_KNN, NEXCP, ADAPTIVE_CP)
"""Every method the backtest can run."""

CONTEXT_METHODS = (CACP_KERNEL, CACP_KMEANS, CACP_KNN)
"""Methods that weight by covariates and therefore search feature masks."""

TUNED_METHODS = CONTEXT_METHODS + (NEXCP, ADAPTIVE_CP)

WEIGHTED_METHODS = (CQR,) + CONTEXT_METHODS + (NEXCP,)
"""Methods that calibrate on a weighted score distribution."""

SCORE_LEVELS = (0.05, 0.1, 0.25, 0.5, 0.75, 0.9, 0.95)
"""Levels at which weighted score distributions are summarized."""


@dataclass(frozen=True)
class CalibrationOptions:
    """Switches applied to every conformal adjustment."""

    clip: bool = True
    finite_sample_correction: bool = False
    test_point_mass: bool = False


def adjust_bounds(
    lower: np.ndarray, upper: np.ndarray, adjustment: np.ndarray, clip: bool
) -> Tuple[np.ndarray, np.ndarray]:
    """Array form of `cacp.conformal.adjust_interval`."""
    new_lower = lower - adjustment
    new_upper = upper + adjustment
    inverted = new_lower > new_upper
    if inverted.any():
        midpoint = (lower + upper) / 2.0
        new_lower = np.where(inverted, midpoint, new_lower)
        new_upper = np.where(inverted, midpoint, new_upper)
    if clip:
        new_lower = np.minimum(np.maximum(new_lower, 0.0), 1.0)
        new_upper = np.minimum(np.maximum(new_upper, 0.0), 1.0)
    return new_lower, new_upper


class SiteFrame:
    """
    One site's records as arrays.

    :param str site_id: the site
    :param records: the site's records, strictly increasing in time
    :param alphas: miscoverage rates to precompute raw bounds and scores for
    """

    def __init__(
        self, site_id: str, records: Sequence[TimeSeriesRecord], alphas: Sequence[float]
    ) -> None:
        for earlier, later in zip(records, records[1:]):
            if not earlier.t < later.t:
                raise ValueError(
                    "records of {} must be strictly increasing in time at {}".format(
                        site_id, later.t.isoformat()
                    )
                )
        self.site_id = site_id
        self.records = list(records)
        self.instants = [record.t for record in self.records]
        self.days = np.asarray([t.date().toordinal() for t in self.instants], dtype=int)
        self.hours = np.asarray([t.hour for t in self.instants], dtype=int)
        self.daylight = np.asarray([record.is_daylight for record in self.records], dtype=bool)
        self.actual = np.asarray([record.actual for record in self.records], dtype=float)
        self.lower: Dict[float, np.ndarray] = {}
        self.upper: Dict[float, np.ndarray] = {}
        self.scores: Dict[float, np.ndarray] = {}
        for alpha in alphas:
            lower, upper = raw_interval_arrays(self.records, alpha)
            self.lower[alpha] = lower
            self.upper[alpha] = upper
            self.scores[alpha] = conformity_scores(lower, upper, self.actual)
        self.table = FeatureTable(self.records)

    def __len__(self) -> int:
        return len(self.records)

    @property
    def alphas(self) -> Tuple[float, ...]:
        """Miscoverage rates with precomputed scores."""
        return tuple(self.scores)

    def local_days(self) -> np.ndarray:
        """Distinct local dates as ordinals, ascending."""
        return np.unique(self.days)

    def daylight_before(self, day: int, limit: Optional[int] = None) -> np.ndarray:
        """Daylight rows dated strictly before ``day``, the most recent ``limit`` if given."""
        rows = np.flatnonzero(self.daylight & (self.days < day))
        if limit is not None and rows.size > limit:
            rows = rows[-limit:]
        return rows

    def daylight_between(self, first_day: int, last_day: int) -> np.ndarray:
        """Daylight rows dated ``first_day`` to ``last_day`` inclusive."""
        return np.flatnonzero(self.daylight & (self.days >= first_day) & (self.days <= last_day))


@dataclass
class FeatureView:
    """
    A calibration set and target rows for one feature choice.

    Rows lacking any masked-in feature are dropped from both sides.
    """

    cal: CalibrationSet
    cal_rows: np.ndarray
    target_rows: np.ndarray
    target_x: np.ndarray
    dropped_targets: np.ndarray
    _pairs: Optional[PairwiseCache] = field(default=None, repr=False)

    @property
    def pairs(self) -> PairwiseCache:
        """Distances of the target rows to the calibration set, shared by every scheme."""
        if self._pairs is None:
            self._pairs = PairwiseCache(self.target_x, self.cal)
        return self._pairs


def build_view(
    site: SiteFrame,
    cal_rows: np.ndarray,
    target_rows: np.ndarray,
    feature_mask: Optional[FeatureMask] = None,
    lag_offset: Optional[int] = None,
    lag_window: Optional[int] = None,
) -> Optional[FeatureView]:
    """
    Standardized calibration set over ``cal_rows`` and covariates of ``target_rows``.

    Statistics are fitted on the calibration rows only, and each target row is
    assembled against them on its own. Returns None when no calibration row has
    every feature.
    """
    if feature_mask is None:
        if cal_rows.size == 0:
            return None
        cal = CalibrationSet(
            [site.instants[i] for i in cal_rows],
            np.zeros((cal_rows.size, 0)),
            {alpha: site.scores[alpha][cal_rows] for alpha in site.alphas},
        )
        return FeatureView(
            cal, cal_rows, target_rows, np.zeros((target_rows.size, 0)), target_rows[:0]
        )
    kwargs = {}
    if feature_mask.lags:
        kwargs = {"lag_offset": lag_offset, "window": lag_window}
    matrix = site.table.matrix(feature_mask, **kwargs)
    complete = ~np.isnan(matrix).any(axis=1)
    kept_cal = cal_rows[complete[cal_rows]]
    if kept_cal.size == 0:
        return None
    kept_targets = target_rows[complete[target_rows]]
    stats = StandardizationStats.fit(matrix[kept_cal])
    target_x = np.empty((kept_targets.size, matrix.shape[1]))
    for position, row in enumerate(kept_targets):
        context = site.table.context(int(row), **kwargs)
        target_x[position] = assemble_covariates(context, feature_mask, stats).as_array()
    cal = CalibrationSet(
        [site.instants[i] for i in kept_cal],
        stats.apply(matrix[kept_cal]),
        {alpha: site.scores[alpha][kept_cal] for alpha in site.alphas},
        stats,
    )
    return FeatureView(
        cal,
        kept_cal,
        kept_targets,
        target_x,
        target_rows[~complete[target_rows]],
    )


def make_scheme(method: str, params: Mapping[str, Any], seed: int = 0) -> WeightScheme:
    """Weight scheme of ``method`` under ``params``."""
    if method == CQR:
        return UniformScheme()
    if method == CACP_KERNEL:
        return WeightScheme.from_kind(
            str(params.get("kernel", "rbf")), gamma=float(params.get("gamma", 1.0))
        )
    if method == CACP_KMEANS:
        return KMeansScheme(K=int(params["K"]), seed=seed)
    if method == CACP_KNN:
        return KNNScheme(K=int(params["K"]))
    if method == NEXCP:
        return NexCPScheme(rho_decay=float(params["rho_decay"]))
    raise KeyError("{} has no weight scheme".format(method))


def scheme_adjustments(
    scheme: WeightScheme,
    view: FeatureView,
    alphas: Sequence[float],
    options: CalibrationOptions,
) -> Dict[float, np.ndarray]:
    """
    ``s`` for every target row of ``view``, per ``alpha``.

    Weights depend only on covariates, so they are computed once for all ``alphas``.
    Rows that share their weights are calibrated once: every row under a scheme
    that ignores covariates, and every row of one k-means cluster.

    :raises ValueError: "too few points" when a k-means scheme has more clusters
        than calibration entries
    """
    n_targets = view.target_rows.size
    if n_targets == 0:
        return {alpha: np.zeros(0) for alpha in alphas}
    cal = view.cal
    kwargs = {
        "finite_sample_correction": options.finite_sample_correction,
        "test_point_mass": options.test_point_mass,
        "test_weight": scheme.test_weight(),
    }
    logger.debug(
        "%s over %d calibration entries for %d rows", scheme_label(scheme), len(cal), n_targets
    )
    if isinstance(scheme, KNNScheme) and scheme.K < len(cal):
        chosen = view.pairs.neighbour_order()[:, : scheme.K]
        return {
            alpha: neighbour_adjustments(cal, chosen, alpha, **kwargs) for alpha in alphas
        }
    if not scheme.uses_covariates:
        shared = np.zeros(n_targets, dtype=int)
        weights = compute_weight_matrix(scheme, view.target_x[:1], cal)
    elif isinstance(scheme, KMeansScheme):
        if len(cal) < scheme.K:
            raise ValueError("too few points")
        labels = scheme.assign(view.target_x, cal)
        _, first, shared = np.unique(labels, return_index=True, return_inverse=True)
        weights = compute_weight_matrix(scheme, view.target_x[first], cal)
    else:
        shared = np.arange(n_targets)
        weights = compute_weight_matrix(scheme, view.target_x, cal, pairs=view.pairs)
    return {
        alpha: calibration_adjustments(cal, weights, alpha, **kwargs)[shared.ravel()]
        for alpha in alphas
    }


def scheme_score_quantiles(
    scheme: WeightScheme,
    view: FeatureView,
    alphas: Sequence[float],
    levels: Sequence[float] = SCORE_LEVELS,
) -> Dict[float, np.ndarray]:
    """
    Weighted quantiles of the calibration scores each target row of ``view`` sees.

    One array of shape ``(n_targets, len(levels))`` per ``alpha``. No mass is put
    on the test point.

    :raises ValueError: "too few points" when a k-means scheme has more clusters
        than calibration entries
    """
    n_targets = view.target_rows.size
    if n_targets == 0:
        return {alpha: np.zeros((0, len(levels))) for alpha in alphas}
    weights = compute_weight_matrix(scheme, view.target_x, view.cal, pairs=view.pairs)
    result = {}
    for alpha in alphas:
        index = view.cal.quantile_index(alpha)
        result[alpha] = np.column_stack([index.quantiles(weights, level) for level in levels])
    return result
