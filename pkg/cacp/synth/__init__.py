# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
:py:mod:`~cacp.synth`
====================================================

Synthetic solar sites with known conditional distributions, and a deliberately
miscalibrated forecaster over them.

During daylight the actual is a normal truncated to [0, 1] with location
``peak * b``, where ``b = sin(pi * rho)`` is a bell over the normalized time of
solar day. At night the actual is exactly 0. Per regime:

* ``exchangeable``: scale ``noise_scale * b``; the forecaster's normal quantiles
  have their spread scaled by ``sqrt(variance_factor)`` everywhere.
* ``diurnal-heteroscedastic``: scale ``noise_scale * (1 + b) / 2``, so the
  shoulders keep some spread. The forecaster issues the truncated normal with the
  right location and its variance multiplied by ``v(rho)``, where
  ``log v = log(noon_variance_factor) x^2 - shoulder_dip x (1 - x)^2`` and
  ``x = sin^2(pi rho)``. Intervals are too wide around noon and too narrow on the
  shoulders, and ``v`` is smooth and symmetric about noon, so one global
  adjustment cannot fix every hour while a neighbourhood in ``rho`` can.
* ``regime-switching``: each day is calm or volatile following a two-state
  Markov chain. Both states share the location; the scale is
  ``calm_noise_scale * b`` or ``volatile_noise_scale * b``. The forecaster does
  not know the state and issues the even mixture.

Sites use the fixed UTC offset nearest their longitude.

"""

from __future__ import annotations

import logging
import math
from collections import abc
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta, timezone

import numpy as np
from scipy.stats import norm, truncnorm

from ..core import TimeSeriesRecord
from ..features.solar import SiteGeometry, local_sunrise_sunset, solar_day_feature
from ..io.config import (
    ChoiceField,
    ConfigBase,
    DateField,
    Field,
    FloatField,
    IntField,
    TupleField,
)

try:
    from typing import Any, Dict, List, Sequence, Tuple
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

LEVELS = tuple(i / 100 for i in range(1, 100))
"""Quantile levels of the synthetic forecaster: 0.01 to 0.99."""

REGIMES = ("exchangeable", "diurnal-heteroscedastic", "regime-switching")

MIN_BELL = 1e-3
BISECTION_STEPS = 60


class SiteEntry(Field):
    """A site given as ``{site_id, latitude, longitude}``."""

    def validate(self, value: Any) -> SiteGeometry:
        if isinstance(value, SiteGeometry):
            return value
        if not isinstance(value, abc.Mapping):
            raise ValueError("{} entries must be mappings".format(self.name))
        try:
            return SiteGeometry(
                float(value["latitude"]),
                float(value["longitude"]),
                str(value.get("site_id", "")),
            )
        except KeyError as missing:
            raise ValueError("{} entry needs {}".format(self.name, missing)) from None

    def dump(self, value: SiteGeometry) -> Dict[str, Any]:
        return {
            "site_id": value.site_id,
            "latitude": value.latitude,
            "longitude": value.longitude,
        }


class SynthSpec(ConfigBase):
    """
    Parameters of a synthetic dataset.

    Example::

        spec = SynthSpec(n_days=90, regime="diurnal-heteroscedastic", noise_seed=3)
        data = generate(spec)
    """

    n_days = IntField(90, min_value=1)
    """Number of local calendar days per site."""
    sites = TupleField(
        (SiteGeometry(35.1, -106.6, "site-a"),),
        item=SiteEntry(),
    )
    """Site locations."""
    regime = ChoiceField("exchangeable", REGIMES)
    """How the forecaster is distorted; see the module description."""
    variance_factor = FloatField(1.0, min_value=0.0, exclusive=True)
    """Ratio of forecast variance to true variance."""
    noise_seed = IntField(0, min_value=0)
    """Seed of every random draw."""
    start = DateField(date(2023, 3, 1))
    """First local date."""
    peak = FloatField(0.6, min_value=0.0, max_value=1.0, exclusive=True)
    """Mean generation at solar noon on a clear day, per unit."""
    noise_scale = FloatField(0.1, min_value=0.0, exclusive=True)
    """Standard deviation at solar noon on a clear day."""
    noon_variance_factor = FloatField(4.0, min_value=0.0, exclusive=True)
    """Forecast over true variance at solar noon in the diurnal regime."""
    shoulder_dip = FloatField(3.0, min_value=0.0)
    """How far below one the diurnal forecast variance ratio dips on the shoulders."""
    calm_noise_scale = FloatField(0.02, min_value=0.0, exclusive=True)
    """Standard deviation at solar noon on a calm day."""
    volatile_noise_scale = FloatField(0.15, min_value=0.0, exclusive=True)
    """Standard deviation at solar noon on a volatile day."""
    persistence = FloatField(0.9, min_value=0.0, max_value=1.0)
    """Probability that tomorrow has today's weather in the regime-switching model."""

    def geometries(self) -> Dict[str, SiteGeometry]:
        """Sites by id; unnamed sites are called ``site-<index>``."""
        result: Dict[str, SiteGeometry] = {}
        for index, geom in enumerate(self.sites):
            site_id = geom.site_id or "site-{}".format(index)
            if site_id in result:
                raise ValueError("duplicate site id {!r}".format(site_id))
            result[site_id] = SiteGeometry(geom.latitude, geom.longitude, site_id)
        return result


def site_timezone(geom: SiteGeometry) -> timezone:
    """Fixed offset of ``round(longitude / 15)`` hours."""
    return timezone(timedelta(hours=round(geom.longitude / 15.0)))


def expected_raw_coverage(alpha: float, variance_factor: float) -> float:
    """
    Coverage of a central ``1 - alpha`` normal interval whose variance is
    ``variance_factor`` times the true variance: ``2 Phi(z sqrt(c)) - 1``.

    Example::

        expected_raw_coverage(0.1, 0.5)  # 0.7545...
    """
    z = norm.ppf(1.0 - alpha / 2.0)
    return float(2.0 * norm.cdf(z * math.sqrt(variance_factor)) - 1.0)


@dataclass(frozen=True)
class TruthParameters:
    """Location and scale of the untruncated normal behind one actual."""

    loc: float
    scale: float
    daylight: bool

    def standardized_bounds(self) -> Tuple[float, float]:
        return (0.0 - self.loc) / self.scale, (1.0 - self.loc) / self.scale


class GroundTruth:
    """
    Conditional distribution of every generated actual.

    At night the actual is a point mass at 0.
    """

    def __init__(self) -> None:
        self._sites: Dict[str, Tuple[Dict[datetime, int], np.ndarray, np.ndarray, np.ndarray]] = {}

    def add_site(
        self,
        site_id: str,
        instants: Sequence[datetime],
        loc: np.ndarray,
        scale: np.ndarray,
        daylight: np.ndarray,
    ) -> None:
        """Register the parameters of one site's records."""
        index = {t: i for i, t in enumerate(instants)}
        self._sites[site_id] = (index, loc, scale, daylight)

    def parameters(self, site_id: str, t: datetime) -> TruthParameters:
        """Parameters of the record of ``site_id`` at ``t``."""
        index, loc, scale, daylight = self._sites[site_id]
        i = index[t]
        return TruthParameters(float(loc[i]), float(scale[i]), bool(daylight[i]))

    def quantile(self, site_id: str, t: datetime, level: float) -> float:
        """True ``level`` quantile."""
        params = self.parameters(site_id, t)
        if not params.daylight:
            return 0.0
        a, b = params.standardized_bounds()
        return float(truncnorm.ppf(level, a, b, loc=params.loc, scale=params.scale))

    def cdf(self, site_id: str, t: datetime, value: float) -> float:
        """True ``P(actual <= value)``."""
        params = self.parameters(site_id, t)
        if not params.daylight:
            return 1.0 if value >= 0.0 else 0.0
        a, b = params.standardized_bounds()
        return float(truncnorm.cdf(value, a, b, loc=params.loc, scale=params.scale))

    def coverage(self, site_id: str, t: datetime, lower: float, upper: float) -> float:
        """True probability that the actual falls in ``[lower, upper]``."""
        params = self.parameters(site_id, t)
        if not params.daylight:
            return 1.0 if lower <= 0.0 <= upper else 0.0
        return max(0.0, self.cdf(site_id, t, upper) - self.cdf(site_id, t, lower))

    def coverage_many(
        self, site_id: str, instants: Sequence[datetime], lower, upper
    ) -> np.ndarray:
        """Vectorized `coverage` over daylight instants of one site."""
        index, loc, scale, daylight = self._sites[site_id]
        rows = np.asarray([index[t] for t in instants], dtype=int)
        if not daylight[rows].all():
            raise ValueError("coverage_many expects daylight instants only")
        loc, scale = loc[rows], scale[rows]
        a, b = (0.0 - loc) / scale, (1.0 - loc) / scale
        upper_cdf = truncnorm.cdf(np.asarray(upper, dtype=float), a, b, loc=loc, scale=scale)
        lower_cdf = truncnorm.cdf(np.asarray(lower, dtype=float), a, b, loc=loc, scale=scale)
        return np.maximum(upper_cdf - lower_cdf, 0.0)


@dataclass
class SyntheticData:
    """Generated records per site, their locations and the ground truth."""

    series: Dict[str, List[TimeSeriesRecord]]
    geometries: Dict[str, SiteGeometry]
    truth: GroundTruth
    levels: Tuple[float, ...] = field(default=LEVELS)


def _mixture_quantiles(
    locs: np.ndarray, scales: np.ndarray, weights: np.ndarray, levels: np.ndarray
) -> np.ndarray:
    levels = levels[None, :]
    shape = (locs.shape[0], levels.shape[1])
    low = np.broadcast_to((locs - 10.0 * scales).min(axis=1)[:, None], shape).copy()
    high = np.broadcast_to((locs + 10.0 * scales).max(axis=1)[:, None], shape).copy()
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (low + high)
        cdf = np.zeros(shape)
        for k, weight in enumerate(weights):
            cdf += weight * norm.cdf((mid - locs[:, k, None]) / scales[:, k, None])
        below = cdf < levels
        low = np.where(below, mid, low)
        high = np.where(below, high, mid)
    return 0.5 * (low + high)


def _volatile_days(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    volatile = np.zeros(spec.n_days, dtype=bool)
    volatile[0] = rng.random() < 0.5
    for day in range(1, spec.n_days):
        stay = rng.random() < spec.persistence
        volatile[day] = volatile[day - 1] if stay else not volatile[day - 1]
    return volatile


def diurnal_variance_ratio(spec: SynthSpec, rho: np.ndarray) -> np.ndarray:
    """
    Forecast over true variance at ``rho`` in the diurnal regime.

    ``noon_variance_factor`` at solar noon, one at sunrise and sunset, and below
    one on the shoulders in between.
    """
    x = np.sin(np.pi * np.asarray(rho, dtype=float)) ** 2
    log_ratio = math.log(spec.noon_variance_factor) * x**2 - spec.shoulder_dip * x * (1.0 - x) ** 2
    return np.exp(log_ratio)


def _truncated_quantiles(loc: np.ndarray, scale: np.ndarray, levels: np.ndarray) -> np.ndarray:
    low = norm.cdf((0.0 - loc) / scale)[:, None]
    high = norm.cdf((1.0 - loc) / scale)[:, None]
    return loc[:, None] + scale[:, None] * norm.ppf(low + levels[None, :] * (high - low))


def _generate_site(
    spec: SynthSpec,
    site_id: str,
    geom: SiteGeometry,
    rng: np.random.Generator,
    truth: GroundTruth,
) -> List[TimeSeriesRecord]:
    tz = site_timezone(geom)
    origin = datetime.combine(spec.start, time(0), tzinfo=tz)
    n = spec.n_days * 24
    instants = [origin + timedelta(hours=h) for h in range(n)]
    solar_days = [
        local_sunrise_sunset(geom, origin + timedelta(days=d)) for d in range(spec.n_days)
    ]
    rho = np.full(n, np.nan)
    daylight = np.zeros(n, dtype=bool)
    for h, t in enumerate(instants):
        sunrise, sunset = solar_days[h // 24]
        feature = solar_day_feature(t, sunrise, sunset)
        if feature.defined:
            rho[h] = feature.rho
            daylight[h] = True
    bell = np.where(daylight, np.maximum(np.sin(np.pi * np.nan_to_num(rho)), MIN_BELL), 0.0)

    loc = spec.peak * bell
    if spec.regime == "regime-switching":
        volatile = np.repeat(_volatile_days(spec, rng), 24)
        noise = np.where(volatile, spec.volatile_noise_scale, spec.calm_noise_scale) * bell
    elif spec.regime == "diurnal-heteroscedastic":
        noise = spec.noise_scale * 0.5 * (1.0 + bell)
    else:
        noise = spec.noise_scale * bell
    scale = np.where(daylight, noise, 1.0)

    uniforms = rng.uniform(size=n)
    a, b = (0.0 - loc) / scale, (1.0 - loc) / scale
    actual = np.where(daylight, truncnorm.ppf(uniforms, a, b, loc=loc, scale=scale), 0.0)

    levels = np.asarray(LEVELS)
    quantiles = np.zeros((n, levels.size))
    day = np.flatnonzero(daylight)
    root_c = math.sqrt(spec.variance_factor)
    if spec.regime == "regime-switching":
        locs = np.stack([loc[day], loc[day]], axis=1)
        scales = np.stack(
            [spec.calm_noise_scale * bell[day], spec.volatile_noise_scale * bell[day]], axis=1
        ) * root_c
        quantiles[day] = _mixture_quantiles(locs, scales, np.array([0.5, 0.5]), levels)
    elif spec.regime == "diurnal-heteroscedastic":
        spread = root_c * np.sqrt(diurnal_variance_ratio(spec, rho[day])) * scale[day]
        quantiles[day] = _truncated_quantiles(loc[day], spread, levels)
    else:
        quantiles[day] = loc[day, None] + (root_c * scale[day])[:, None] * norm.ppf(levels)[None, :]

    truth.add_site(site_id, instants, loc, scale, daylight)
    records = []
    for h, t in enumerate(instants):
        sunrise, sunset = solar_days[h // 24]
        records.append(
            TimeSeriesRecord(
                t=t,
                actual=float(actual[h]),
                raw_quantiles=dict(zip(LEVELS, (float(q) for q in quantiles[h]))),
                site_id=site_id,
                is_daylight=bool(daylight[h]),
                sunrise=sunrise,
                sunset=sunset,
            )
        )
    return records


def generate(spec: SynthSpec) -> SyntheticData:
    """
    Records for every site in ``spec`` and their ground truth.

    The same spec always yields the same data.

    :param SynthSpec spec: dataset parameters
    :rtype: SyntheticData
    """
    rng = np.random.default_rng(spec.noise_seed)
    geometries = spec.geometries()
    truth = GroundTruth()
    series = {}
    for site_id, geom in geometries.items():
        series[site_id] = _generate_site(spec, site_id, geom, rng, truth)
        logger.debug(
            "generated %d records (%d daylight) for %s",
            len(series[site_id]),
            sum(record.is_daylight for record in series[site_id]),
            site_id,
        )
    return SyntheticData(series, geometries, truth)
