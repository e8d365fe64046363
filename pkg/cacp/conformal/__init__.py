# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
:py:mod:`~cacp.conformal`
====================================================

Conformity scores, calibration sets and the weighted split-conformal adjustment of
raw forecast intervals.

A calibrated interval is ``[lower - s, upper + s]`` where ``s`` is the weighted
``1 - alpha`` quantile of the calibration conformity scores. Negative ``s`` narrows
intervals that were too wide.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from datetime import datetime

import numpy as np

from ..core import (
    PredictionInterval,
    QuantileIndex,
    TargetCoverage,
    mass_tolerance,
    weighted_quantile_array,
)
from .kmeans import KMeansModel, fit_kmeans
from .weights import WeightScheme, WeightVector, compute_weights

try:
    from typing import Dict, Iterator, Mapping, Optional, Sequence, Tuple

    from ..features import StandardizationStats
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ConformityScore:
    """``max(lower - y, y - upper)`` of one calibration instant at one ``alpha``."""

    t: datetime
    alpha: float
    value: float

    @property
    def covered(self) -> bool:
        """Scores are non-positive exactly when the raw interval covered the actual."""
        return self.value <= 0.0


def conformity_score(interval: PredictionInterval, actual: float) -> float:
    """
    Signed distance of ``actual`` outside ``interval``; negative inside it.

    :param PredictionInterval interval: the raw interval
    :param float actual: the observed value
    """
    return max(interval.lower - actual, actual - interval.upper)


def conformity_scores(lower, upper, actual) -> np.ndarray:
    """Vectorized `conformity_score`."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    actual = np.asarray(actual, dtype=float)
    return np.maximum(lower - actual, actual - upper)


class CalibrationSet:
    """
    Past instants with standardized covariates and per-``alpha`` conformity scores.

    Entries are held in time order regardless of the order given. Every instant must
    precede the instants the set is used to calibrate; the caller enforces that.

    :param timestamps: one instant per entry, no duplicates
    :param covariates: standardized covariates, shape ``(n, d)``
    :param Mapping scores: ``alpha`` to scores of shape ``(n,)``
    :param StandardizationStats stats: statistics the covariates were standardized with
    """

    def __init__(
        self,
        timestamps: Sequence[datetime],
        covariates,
        scores: Mapping[float, np.ndarray],
        stats: Optional[StandardizationStats] = None,
    ) -> None:
        n = len(timestamps)
        covariates = np.asarray(covariates, dtype=float)
        if covariates.ndim == 1:
            covariates = covariates.reshape(n, -1) if n else np.zeros((0, 0))
        if covariates.shape[0] != n:
            raise ValueError("covariates must have one row per timestamp")
        order = sorted(range(n), key=lambda i: timestamps[i])
        ordered = [timestamps[i] for i in order]
        for earlier, later in zip(ordered, ordered[1:]):
            if not earlier < later:
                raise ValueError("duplicate calibration timestamp {}".format(later))
        index = np.asarray(order, dtype=int)
        self.timestamps: Tuple[datetime, ...] = tuple(ordered)
        self.covariates = covariates[index]
        self.covariates.setflags(write=False)
        self._scores: Dict[float, np.ndarray] = {}
        for alpha, values in scores.items():
            TargetCoverage(alpha)
            values = np.asarray(values, dtype=float)
            if values.shape != (n,):
                raise ValueError("scores must have one value per timestamp")
            values = values[index]
            values.setflags(write=False)
            self._scores[alpha] = values
        self.stats = stats
        self._quantile_indices: Dict[Tuple[float, bool], QuantileIndex] = {}
        self._kmeans: Dict[Tuple[int, int], KMeansModel] = {}

    def __len__(self) -> int:
        return len(self.timestamps)

    def __iter__(self) -> Iterator[Tuple[datetime, np.ndarray, Dict[float, float]]]:
        for i, t in enumerate(self.timestamps):
            yield t, self.covariates[i], {
                alpha: float(values[i]) for alpha, values in self._scores.items()
            }

    @property
    def dimension(self) -> int:
        """Covariate dimension."""
        return self.covariates.shape[1]

    @property
    def alphas(self) -> Tuple[float, ...]:
        """Miscoverage rates with scores, ascending."""
        return tuple(sorted(self._scores))

    @property
    def latest(self) -> Optional[datetime]:
        """Most recent instant, or None when empty."""
        return self.timestamps[-1] if self.timestamps else None

    def scores(self, alpha: float) -> np.ndarray:
        """Conformity scores at ``alpha``, in time order."""
        try:
            return self._scores[alpha]
        except KeyError:
            raise KeyError("no conformity scores for alpha={}".format(alpha)) from None

    def score_records(self, alpha: float) -> Tuple[ConformityScore, ...]:
        """Scores at ``alpha`` as `ConformityScore` records."""
        return tuple(
            ConformityScore(t, alpha, float(value))
            for t, value in zip(self.timestamps, self.scores(alpha))
        )

    def quantile_index(self, alpha: float, *, test_point_mass: bool = False) -> QuantileIndex:
        """
        Sorted index of the scores at ``alpha``, built on first use.

        With ``test_point_mass`` the index holds one more atom at ``+inf``, last.
        """
        key = (alpha, test_point_mass)
        if key not in self._quantile_indices:
            values = self.scores(alpha)
            if test_point_mass:
                values = np.append(values, np.inf)
            self._quantile_indices[key] = QuantileIndex(values)
        return self._quantile_indices[key]

    def kmeans_model(self, K: int, seed: int) -> KMeansModel:
        """K-means over the covariates, fitted once per ``(K, seed)``."""
        key = (K, seed)
        if key not in self._kmeans:
            self._kmeans[key] = fit_kmeans(self.covariates, K, seed)
            logger.debug(
                "fitted k-means K=%d over %d entries in %d iterations",
                K,
                len(self),
                self._kmeans[key].n_iter,
            )
        return self._kmeans[key]


def calibration_levels(
    alpha: float, weight_matrix: np.ndarray, *, finite_sample_correction: bool = False
) -> np.ndarray:
    """`calibration_level` of every row of ``weight_matrix``."""
    level = TargetCoverage(alpha).coverage
    weight_matrix = np.asarray(weight_matrix, dtype=float)
    levels = np.full(weight_matrix.shape[0], level)
    if finite_sample_correction:
        n = np.count_nonzero(weight_matrix > 0.0, axis=1)
        positive = n > 0
        levels[positive] = np.minimum(1.0, level * (n[positive] + 1) / n[positive])
    return levels


def calibration_level(
    alpha: float, weights: WeightVector, *, finite_sample_correction: bool = False
) -> float:
    """
    Quantile level of the conformity scores, ``1 - alpha`` or, with the finite-sample
    correction, ``min(1, (1 - alpha)(n + 1) / n)`` for ``n`` positively weighted entries.
    """
    return float(
        calibration_levels(
            alpha, weights.weights[None, :], finite_sample_correction=finite_sample_correction
        )[0]
    )


def calibration_adjustments(
    cal: CalibrationSet,
    weight_matrix: np.ndarray,
    alpha: float,
    *,
    finite_sample_correction: bool = False,
    test_point_mass: bool = False,
    test_weight: float = 1.0,
) -> np.ndarray:
    """
    `calibration_adjustment` under every row of ``weight_matrix``, in one pass.

    :param weight_matrix: unnormalized weights, shape ``(m, len(cal))``
    :return: one ``s`` per row, shape ``(m,)``
    """
    if len(cal) == 0:
        raise ValueError("empty sample")
    weight_matrix = np.asarray(weight_matrix, dtype=float)
    if weight_matrix.ndim != 2 or weight_matrix.shape[1] != len(cal):
        raise ValueError("values and weights must have the same length")
    levels = calibration_levels(
        alpha, weight_matrix, finite_sample_correction=finite_sample_correction
    )
    if test_point_mass:
        weight_matrix = np.hstack(
            [weight_matrix, np.full((weight_matrix.shape[0], 1), test_weight)]
        )
    return cal.quantile_index(alpha, test_point_mass=test_point_mass).quantiles(
        weight_matrix, levels
    )


def neighbour_adjustments(
    cal: CalibrationSet,
    chosen: np.ndarray,
    alpha: float,
    *,
    finite_sample_correction: bool = False,
    test_point_mass: bool = False,
    test_weight: float = 1.0,
) -> np.ndarray:
    """
    `calibration_adjustments` when every row weighs its own ``K`` entries by one.

    Equal weights put the quantile at the same sorted position in every row, so
    only the chosen scores are sorted.

    :param chosen: calibration indices per row, shape ``(m, K)`` with ``K < len(cal)``
    """
    chosen = np.asarray(chosen, dtype=int)
    size = chosen.shape[1]
    if size == 0:
        raise ValueError("degenerate weights")
    selected = np.sort(cal.scores(alpha)[chosen], axis=1)
    mass = np.ones(size)
    if test_point_mass:
        selected = np.hstack([selected, np.full((selected.shape[0], 1), np.inf)])
        mass = np.append(mass, test_weight)
    level = calibration_levels(
        alpha, np.ones((1, size)), finite_sample_correction=finite_sample_correction
    )[0]
    cumulative = np.cumsum(mass) / mass.sum()
    tolerance = mass_tolerance(len(cal) + int(test_point_mass))
    index = int(np.count_nonzero(cumulative < level - tolerance))
    return selected[:, min(index, selected.shape[1] - 1)].copy()


def calibration_adjustment(
    cal: CalibrationSet,
    weights: WeightVector,
    alpha: float,
    *,
    level: Optional[float] = None,
    finite_sample_correction: bool = False,
    test_point_mass: bool = False,
    test_weight: float = 1.0,
) -> float:
    """
    The score quantile ``s`` added to both bounds of the raw interval.

    :param CalibrationSet cal: non-empty calibration set with scores at ``alpha``
    :param WeightVector weights: unnormalized weights aligned with ``cal``
    :param float alpha: miscoverage rate whose scores are used
    :param float level: quantile level; defaults to `calibration_level`
    :param bool finite_sample_correction: inflate the level by ``(n + 1) / n``
    :param bool test_point_mass: add a point mass at ``+inf`` carrying ``test_weight``
    :return: ``s``, possibly negative or ``+inf``
    :rtype: float
    """
    if len(cal) == 0:
        raise ValueError("empty sample")
    if len(weights) != len(cal):
        raise ValueError("values and weights must have the same length")
    if level is None:
        return float(
            calibration_adjustments(
                cal,
                weights.weights[None, :],
                alpha,
                finite_sample_correction=finite_sample_correction,
                test_point_mass=test_point_mass,
                test_weight=test_weight,
            )[0]
        )
    if test_point_mass:
        return weighted_quantile_array(
            np.append(cal.scores(alpha), np.inf),
            np.append(weights.weights, test_weight),
            level,
        )
    return cal.quantile_index(alpha).quantile(weights.weights, level)


def adjust_interval(
    raw: PredictionInterval, adjustment: float, *, clip: bool = True
) -> PredictionInterval:
    """
    ``[lower - s, upper + s]``.

    When a negative ``s`` would invert the interval it collapses to the raw midpoint.
    With ``clip`` the bounds are limited to the per-unit range [0, 1].
    """
    lower = raw.lower - adjustment
    upper = raw.upper + adjustment
    if lower > upper:
        lower = upper = (raw.lower + raw.upper) / 2.0
    if clip:
        lower = min(max(lower, 0.0), 1.0)
        upper = min(max(upper, 0.0), 1.0)
    return PredictionInterval(lower, upper, raw.alpha, calibrated=True)


def calibrate_interval(
    raw: PredictionInterval,
    cal: CalibrationSet,
    weights: WeightVector,
    alpha: Optional[float] = None,
    *,
    clip: bool = True,
    finite_sample_correction: bool = False,
    test_point_mass: bool = False,
    test_weight: float = 1.0,
) -> PredictionInterval:
    """
    Weighted split-conformal calibration of one raw interval.

    Example::

        weights = compute_weights(WeightScheme.from_kind("knn", K=100), x_test, cal)
        interval = calibrate_interval(raw, cal, weights)

    :param PredictionInterval raw: the forecaster's interval at ``alpha``
    :param CalibrationSet cal: calibration set with scores at ``alpha``
    :param WeightVector weights: weights aligned with ``cal``
    :param float alpha: miscoverage rate, ``raw.alpha`` if not given
    :return: the calibrated interval
    :rtype: PredictionInterval
    """
    alpha = raw.alpha if alpha is None else alpha
    adjustment = calibration_adjustment(
        cal,
        weights,
        alpha,
        finite_sample_correction=finite_sample_correction,
        test_point_mass=test_point_mass,
        test_weight=test_weight,
    )
    return adjust_interval(raw, adjustment, clip=clip)


__all__ = [
    "CalibrationSet",
    "ConformityScore",
    "WeightScheme",
    "WeightVector",
    "adjust_interval",
    "calibrate_interval",
    "calibration_adjustment",
    "calibration_adjustments",
    "calibration_level",
    "calibration_levels",
    "compute_weights",
    "conformity_score",
    "conformity_scores",
    "neighbour_adjustments",
]
