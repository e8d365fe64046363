# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
:py:mod:`~cacp.features`
====================================================

Context features used to compare a test instant with calibration instants: recent
actuals, cyclic time embeddings and the solar-day embedding.

Covariates are concatenated in the fixed order lags, hour-of-day, day-of-year,
month-of-year, solar day, and standardized with statistics from the calibration set.

"""

from __future__ import annotations

import math
from collections import abc
from dataclasses import dataclass
from datetime import datetime, timedelta

import numpy as np

from .solar import solar_day_feature

try:
    from typing import Dict, Iterator, Mapping, Optional, Sequence, Tuple, Type, Union
    from typing_extensions import Literal

    from ..core import TimeSeriesRecord
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

HOUR_OF_DAY = "hour-of-day"
DAY_OF_YEAR = "day-of-year"
MONTH_OF_YEAR = "month-of-year"

PERIODS = {HOUR_OF_DAY: 24, DAY_OF_YEAR: 365, MONTH_OF_YEAR: 12}
"""Period of each cyclic embedding."""

FAMILIES = ("lags", "hour", "day", "month", "solar")
"""Feature families, in concatenation order."""

DEFAULT_LAG_OFFSET = 24
DEFAULT_LAG_WINDOW = 1


class FeatureFlag:
    """A single feature family bit within a `FeatureMask`."""

    def __init__(self, bit_position: int) -> None:
        self._bitmask = 1 << bit_position

    def __get__(
        self, obj: Optional["FeatureMask"], cls: Type["FeatureMask"]
    ) -> Union[bool, "FeatureFlag"]:
        if obj is None:
            return self
        return (obj.flags & self._bitmask) != 0

    def __set__(self, obj: "FeatureMask", value: bool) -> None:
        if value:
            obj.flags |= self._bitmask
        else:
            obj.flags &= ~self._bitmask


class FeatureMask:
    """
    Which feature families are active.

    Example::

        mask = FeatureMask.from_families(("lags", "solar"))
        mask.solar  # True
        mask.hour  # False
    """

    lags = FeatureFlag(0)
    """Recent actuals."""
    hour = FeatureFlag(1)
    """Hour-of-day embedding."""
    day = FeatureFlag(2)
    """Day-of-year embedding."""
    month = FeatureFlag(3)
    """Month-of-year embedding."""
    solar = FeatureFlag(4)
    """Normalized time of solar day embedding."""

    def __init__(self, flags: int = 0) -> None:
        if not 0 <= flags < 1 << len(FAMILIES):
            raise ValueError("out of range")
        self.flags = flags

    @classmethod
    def from_families(cls, families: Sequence[str]) -> "FeatureMask":
        """Build a mask from family names."""
        mask = cls()
        for family in families:
            if family not in FAMILIES:
                raise KeyError("unknown feature family {!r}".format(family))
            setattr(mask, family, True)
        return mask

    @classmethod
    def all_masks(cls, allowed: Sequence[str] = FAMILIES) -> Iterator["FeatureMask"]:
        """Every non-empty subset of ``allowed``, in increasing flag order."""
        allowed_flags = cls.from_families(allowed).flags
        for flags in range(1, 1 << len(FAMILIES)):
            if flags & ~allowed_flags == 0:
                yield cls(flags)

    @property
    def families(self) -> Tuple[str, ...]:
        """Active family names, in concatenation order."""
        return tuple(family for family in FAMILIES if getattr(self, family))

    def dimension(self, window: int = DEFAULT_LAG_WINDOW) -> int:
        """Covariate dimension for lag window ``window``."""
        size = 0
        for family in self.families:
            size += window + 1 if family == "lags" else 2
        return size

    def __len__(self) -> int:
        return len(self.families)

    def __eq__(self, other) -> bool:
        if isinstance(other, FeatureMask):
            return self.flags == other.flags
        return False

    def __hash__(self) -> int:
        return hash(self.flags)

    def __str__(self) -> str:
        return "+".join(self.families) or "none"

    def __repr__(self) -> str:
        return "<FeatureMask {} >".format(" ".join(self.families))


@dataclass(frozen=True)
class LagFeature:
    """Actuals ``y[t-l], y[t-l-1], ..., y[t-l-k]``."""

    lag_offset: int
    window: int
    values: Tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.values) != self.window + 1:
            raise ValueError("lag feature needs exactly window + 1 values")


@dataclass(frozen=True)
class TimeEmbedding:
    """Position within a period, as a point on the unit circle."""

    sin_component: float
    cos_component: float
    period_kind: Literal["hour-of-day", "day-of-year", "month-of-year"]


@dataclass(frozen=True)
class CovariateVector:
    """Standardized covariates of one instant and the mask they were built with."""

    components: Tuple[float, ...]
    feature_mask: FeatureMask

    def __len__(self) -> int:
        return len(self.components)

    def as_array(self) -> np.ndarray:
        """Components as a float array."""
        return np.asarray(self.components, dtype=float)


def actuals_by_instant(series: Sequence[TimeSeriesRecord]) -> Dict[datetime, float]:
    """Lookup from instant to actual, for lag construction."""
    return {record.t: record.actual for record in series}


def _lag_values(
    lookup: Mapping[datetime, float], t: datetime, lag_offset: int, window: int
) -> Tuple[float, ...]:
    values = []
    for step in range(window + 1):
        instant = t - timedelta(hours=lag_offset + step)
        if instant not in lookup:
            raise ValueError("insufficient history")
        values.append(lookup[instant])
    return tuple(values)


def build_lag_feature(
    series: Union[Sequence[TimeSeriesRecord], Mapping[datetime, float]],
    t: datetime,
    l: int,
    k: int,
) -> LagFeature:
    """
    Actuals at ``l, l+1, ..., l+k`` hours before ``t``, most recent first.

    :param series: the site's records sorted by time, or a lookup from
        `actuals_by_instant`
    :param datetime t: the instant the feature is built for
    :param int l: lag offset in hours; at least the data-availability delay
    :param int k: window, the number of extra past observations
    """
    if l < 0 or k < 0:
        raise ValueError("lag offset and window must be non-negative")
    history = series if isinstance(series, abc.Mapping) else actuals_by_instant(series)
    return LagFeature(l, k, _lag_values(history, t, l, k))


def period_position(t: datetime, period_kind: str) -> int:
    """
    Position ``a`` of ``t`` within the period: hour in 1..24 (midnight is 24),
    day of year in 1..365 (Dec 31 of a leap year reuses 365), month in 1..12.
    """
    if period_kind == HOUR_OF_DAY:
        return t.hour or 24
    if period_kind == DAY_OF_YEAR:
        return min(t.timetuple().tm_yday, 365)
    if period_kind == MONTH_OF_YEAR:
        return t.month
    raise KeyError("unknown period kind {!r}".format(period_kind))


def time_embedding(t: datetime, period_kind: str) -> TimeEmbedding:
    """``(sin theta, cos theta)`` with ``theta = 2 pi a / P``."""
    theta = 2.0 * math.pi * period_position(t, period_kind) / PERIODS[period_kind]
    return TimeEmbedding(math.sin(theta), math.cos(theta), period_kind)


class StandardizationStats:
    """
    Per-feature mean and standard deviation of a calibration set.

    Features with zero variance standardize to 0 rather than NaN.
    """

    def __init__(self, mean: np.ndarray, scale: np.ndarray) -> None:
        self.mean = np.array(mean, dtype=float)
        self.scale = np.array(scale, dtype=float)
        self.mean.setflags(write=False)
        self.scale.setflags(write=False)

    @classmethod
    def fit(cls, matrix: np.ndarray) -> "StandardizationStats":
        """Statistics of the rows of ``matrix``."""
        matrix = np.asarray(matrix, dtype=float)
        if matrix.ndim != 2 or matrix.shape[0] == 0:
            raise ValueError("standardization needs at least one row")
        return cls(matrix.mean(axis=0), matrix.std(axis=0))

    def apply(self, matrix: np.ndarray) -> np.ndarray:
        """Z-score ``matrix`` (one row or many)."""
        matrix = np.asarray(matrix, dtype=float)
        centered = matrix - self.mean
        out = np.zeros_like(centered)
        np.divide(centered, self.scale, out=out, where=self.scale > 0.0)
        return out

    def __eq__(self, other) -> bool:
        if isinstance(other, StandardizationStats):
            return np.array_equal(self.mean, other.mean) and np.array_equal(
                self.scale, other.scale
            )
        return False

    def __hash__(self) -> int:
        return hash((self.mean.tobytes(), self.scale.tobytes()))


@dataclass(frozen=True)
class RecordContext:
    """A record together with the history its lag features are read from."""

    record: TimeSeriesRecord
    history: Mapping[datetime, float]
    lag_offset: int = DEFAULT_LAG_OFFSET
    window: int = DEFAULT_LAG_WINDOW


def _family_values(context: RecordContext, family: str) -> Tuple[float, ...]:
    record = context.record
    if family == "lags":
        return build_lag_feature(
            context.history, record.t, context.lag_offset, context.window
        ).values
    if family == "solar":
        if record.sunrise is None or record.sunset is None:
            raise ValueError("insufficient history")
        solar = solar_day_feature(record.t, record.sunrise, record.sunset)
        if not solar.defined:
            raise ValueError("insufficient history")
        return (solar.sin_component, solar.cos_component)
    kind = {"hour": HOUR_OF_DAY, "day": DAY_OF_YEAR, "month": MONTH_OF_YEAR}[family]
    embedding = time_embedding(record.t, kind)
    return (embedding.sin_component, embedding.cos_component)


def raw_covariates(context: RecordContext, feature_mask: FeatureMask) -> np.ndarray:
    """Unstandardized covariates of one record, in concatenation order."""
    values = []
    for family in feature_mask.families:
        values.extend(_family_values(context, family))
    return np.asarray(values, dtype=float)


def assemble_covariates(
    context: RecordContext,
    feature_mask: FeatureMask,
    stats: StandardizationStats,
) -> CovariateVector:
    """
    Standardized covariate vector of one record.

    :param RecordContext context: the record and its history
    :param FeatureMask feature_mask: active families
    :param StandardizationStats stats: statistics of the current calibration set
    :raises ValueError: "insufficient history" when a masked-in feature is unavailable
    """
    standardized = stats.apply(raw_covariates(context, feature_mask))
    return CovariateVector(tuple(float(v) for v in standardized), feature_mask)


class FeatureTable:
    """
    Every feature family for every record of one site, computed once.

    Rows where a family is unavailable hold NaN in that family's columns; callers
    drop those rows for masks that include the family.

    :param series: the site's records, sorted by time
    """

    def __init__(self, series: Sequence[TimeSeriesRecord]) -> None:
        self._series = series
        self._history = actuals_by_instant(series)
        self._blocks: Dict[object, np.ndarray] = {}
        n = len(series)
        for family in ("hour", "day", "month", "solar"):
            block = np.full((n, 2), np.nan)
            for i, record in enumerate(series):
                context = RecordContext(record, self._history)
                try:
                    block[i] = _family_values(context, family)
                except ValueError:
                    continue
            self._blocks[family] = block

    def __len__(self) -> int:
        return len(self._series)

    def context(
        self,
        index: int,
        lag_offset: int = DEFAULT_LAG_OFFSET,
        window: int = DEFAULT_LAG_WINDOW,
    ) -> RecordContext:
        """Record ``index`` with the site history its lags are read from."""
        return RecordContext(self._series[index], self._history, lag_offset, window)

    def _lag_block(self, lag_offset: int, window: int) -> np.ndarray:
        key = ("lags", lag_offset, window)
        if key not in self._blocks:
            block = np.full((len(self._series), window + 1), np.nan)
            for i, record in enumerate(self._series):
                try:
                    block[i] = build_lag_feature(self._history, record.t, lag_offset, window).values
                except ValueError:
                    continue
            self._blocks[key] = block
        return self._blocks[key]

    def matrix(
        self,
        feature_mask: FeatureMask,
        lag_offset: int = DEFAULT_LAG_OFFSET,
        window: int = DEFAULT_LAG_WINDOW,
    ) -> np.ndarray:
        """Raw covariates of every record, shape ``(n, feature_mask.dimension(window))``."""
        blocks = []
        for family in feature_mask.families:
            if family == "lags":
                blocks.append(self._lag_block(lag_offset, window))
            else:
                blocks.append(self._blocks[family])
        if not blocks:
            return np.zeros((len(self._series), 0))
        return np.hstack(blocks)
