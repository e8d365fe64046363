# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
:py:mod:`~cacp.core`
====================================================

Domain types shared by every other module, and the weighted quantile that the
calibration methods are built on.

Quantiles use the left-continuous convention: the result is the smallest sample
value whose normalized cumulative mass reaches ``alpha``. There is no interpolation
between atoms.

"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

try:
    from typing import Iterable, Mapping, Optional, Sequence, Tuple
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

DEFAULT_ALPHAS = (0.1, 0.2, 0.3, 0.4)
"""Default miscoverage grid: 90%, 80%, 70% and 60% nominal coverage."""

MASS_EPSILON = 1e-12
"""Tolerance per sample on the cumulative-mass comparison."""


@dataclass(frozen=True)
class TargetCoverage:
    """Miscoverage rate ``alpha`` in (0, 1); nominal coverage is ``1 - alpha``."""

    alpha: float

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1), got {!r}".format(self.alpha))

    @property
    def coverage(self) -> float:
        """Nominal coverage ``1 - alpha``."""
        return 1.0 - self.alpha

    @property
    def lower_level(self) -> float:
        """Quantile level of the lower interval bound, ``alpha / 2``."""
        return self.alpha / 2.0

    @property
    def upper_level(self) -> float:
        """Quantile level of the upper interval bound, ``1 - alpha / 2``."""
        return 1.0 - self.alpha / 2.0


@dataclass(frozen=True)
class TimeSeriesRecord:
    """
    One hourly observation of a site: the normalized actual and the forecaster's quantiles.

    :param datetime t: timezone-aware instant, in the site's local offset
    :param float actual: generation in per-unit of capacity
    :param Mapping raw_quantiles: quantile level in (0, 1) to per-unit forecast,
        non-decreasing in level once ingested
    :param str site_id: site identifier
    :param bool is_daylight: True when sunrise <= t <= sunset (or the configured daylight rule)
    :param datetime sunrise: sunrise of the local date of ``t``, if known
    :param datetime sunset: sunset of the local date of ``t``, if known
    """

    t: datetime
    actual: float
    raw_quantiles: Mapping[float, float]
    site_id: str
    is_daylight: bool
    sunrise: Optional[datetime] = None
    sunset: Optional[datetime] = None

    @property
    def levels(self) -> Tuple[float, ...]:
        """Declared quantile levels, ascending."""
        return tuple(sorted(self.raw_quantiles))


@dataclass(frozen=True)
class PredictionInterval:
    """Lower/upper bound pair at miscoverage ``alpha``."""

    lower: float
    upper: float
    alpha: float
    calibrated: bool = False

    def __post_init__(self) -> None:
        TargetCoverage(self.alpha)
        if self.lower > self.upper:
            raise ValueError(
                "Interval lower bound must be <= upper bound: {} > {}".format(
                    self.lower, self.upper
                )
            )

    @property
    def width(self) -> float:
        """``upper - lower``."""
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        """Closed-interval membership."""
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class WeightedSample:
    """A value with a non-negative weight."""

    value: float
    weight: float = field(default=1.0)

    def __post_init__(self) -> None:
        if not self.weight >= 0.0:
            raise ValueError("weight must be non-negative")


def _check_alpha(alpha: float) -> None:
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1], got {!r}".format(alpha))


def mass_tolerance(size: int) -> float:
    """Tolerance of the cumulative-mass comparison over ``size`` samples."""
    return MASS_EPSILON * max(1, size)


def weighted_quantile_array(values, weights, alpha: float) -> float:
    """
    Array form of `weighted_quantile`.

    :param values: sample values, shape ``(n,)``
    :param weights: non-negative weights, shape ``(n,)``; normalized internally
    :param float alpha: level in [0, 1]
    :return: the smallest value whose normalized cumulative mass is >= ``alpha``
    :rtype: float
    """
    _check_alpha(alpha)
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        raise ValueError("empty sample")
    if values.shape != weights.shape:
        raise ValueError("values and weights must have the same length")
    return QuantileIndex(values).quantile(weights, alpha)


def weighted_quantile(samples: Sequence[WeightedSample], alpha: float) -> float:
    """
    Weighted ``alpha`` quantile of a discrete mixture of point masses.

    Example::

        weighted_quantile(
            [WeightedSample(1, 0.2), WeightedSample(2, 0.3), WeightedSample(3, 0.5)], 0.5
        )  # -> 2.0
    """
    if not samples:
        raise ValueError("empty sample")
    values = [sample.value for sample in samples]
    weights = [sample.weight for sample in samples]
    return weighted_quantile_array(values, weights, alpha)


def empirical_quantile(values: Iterable[float], alpha: float) -> float:
    """Unweighted quantile; each value carries mass ``1 / n``."""
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("empty sample")
    return weighted_quantile_array(values, np.full(values.size, 1.0 / values.size), alpha)


class QuantileIndex:
    """
    Pre-sorted sample values that can be queried with many different weight vectors.

    Ties are merged into one atom, so a result never depends on the input order.
    The tolerance of the mass comparison grows with the sample size, which keeps
    weights that differ from uniform only by rounding on the uniform answer.

    :param values: sample values, shape ``(n,)``
    """

    def __init__(self, values) -> None:
        values = np.asarray(values, dtype=float).ravel()
        if values.size == 0:
            raise ValueError("empty sample")
        self._order = np.argsort(values, kind="mergesort")
        ordered = values[self._order]
        # Last sorted position of every distinct value.
        self._ends = np.append(np.flatnonzero(np.diff(ordered) != 0.0), ordered.size - 1)
        self._atoms = ordered[self._ends]
        self._size = values.size
        self._tolerance = mass_tolerance(values.size)

    def __len__(self) -> int:
        return self._size

    @property
    def atoms(self) -> np.ndarray:
        """Distinct values, ascending."""
        return self._atoms

    def _cumulative(self, weights: np.ndarray) -> np.ndarray:
        if weights.shape[-1] != self._size:
            raise ValueError("values and weights must have the same length")
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and non-negative")
        total = weights.sum(axis=-1, keepdims=True)
        if not np.all(total > 0.0):
            raise ValueError("degenerate weights")
        return np.cumsum(weights[..., self._order], axis=-1)[..., self._ends] / total

    def quantiles(self, weights, alpha) -> np.ndarray:
        """
        Weighted ``alpha`` quantile under every row of ``weights``.

        :param weights: non-negative weights, shape ``(m, n)``
        :param alpha: one level for every row, or one level per row
        :return: one quantile per row, shape ``(m,)``
        """
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 2:
            raise ValueError("weights must have shape (m, n)")
        alpha = np.broadcast_to(np.asarray(alpha, dtype=float), (weights.shape[0],))
        for level in np.unique(alpha):
            _check_alpha(float(level))
        cumulative = self._cumulative(weights)
        # Rows are non-decreasing, so counting the entries below the threshold is a
        # left search.
        index = np.count_nonzero(cumulative < (alpha - self._tolerance)[:, None], axis=1)
        return self._atoms[np.minimum(index, self._atoms.size - 1)]

    def quantile(self, weights, alpha: float) -> float:
        """Weighted ``alpha`` quantile of the indexed values under ``weights``."""
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1:
            raise ValueError("values and weights must have the same length")
        return float(self.quantiles(weights[None, :], alpha)[0])
