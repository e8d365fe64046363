# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`solar`
====================================================

Sunrise and sunset from latitude/longitude, and the normalized time of solar day.

Sunrise and sunset use the NOAA general solar position equations (fractional year,
equation of time and declination) with the zenith at 90.833 degrees, which accounts
for refraction and the solar disc. Accuracy is a few minutes at mid-latitudes.

"""

from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone, tzinfo

try:
    from typing import Iterable, Optional, Tuple
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

SUNRISE_ZENITH = 90.833
"""Zenith angle, in degrees, at which the upper limb of the sun touches the horizon."""


@dataclass(frozen=True)
class SiteGeometry:
    """Location of a site, in degrees."""

    latitude: float
    longitude: float
    site_id: str = ""

    def __post_init__(self) -> None:
        if not -90.0 <= self.latitude <= 90.0:
            raise ValueError("latitude out of range")
        if not -180.0 <= self.longitude <= 180.0:
            raise ValueError("longitude out of range")


@dataclass(frozen=True)
class SolarDayFeature:
    """
    Normalized time of solar day ``rho`` and its embedding on the unit circle.

    ``defined`` is False at night, in which case the other fields are NaN.
    """

    rho: float
    sin_component: float
    cos_component: float
    defined: bool


def _minutes_to_instant(day: date, minutes: float, tz: tzinfo) -> datetime:
    midnight = datetime.combine(day, time(0), tzinfo=timezone.utc)
    return (midnight + timedelta(minutes=minutes)).astimezone(tz)


def sunrise_sunset(
    geom: SiteGeometry, day: date, tz: Optional[tzinfo] = None
) -> Tuple[datetime, datetime]:
    """
    Sunrise and sunset for a calendar date at a site.

    :param SiteGeometry geom: the site location
    :param date day: the date, interpreted in UTC for the solar computation
    :param tzinfo tz: timezone of the returned instants, UTC if not given
    :return: ``(sunrise, sunset)`` as timezone-aware datetimes
    :rtype: tuple
    """
    doy = day.timetuple().tm_yday
    days_in_year = 366 if _is_leap(day.year) else 365
    # Fractional year at local solar noon.
    gamma = 2.0 * math.pi / days_in_year * (doy - 1)
    eqtime = 229.18 * (
        0.000075
        + 0.001868 * math.cos(gamma)
        - 0.032077 * math.sin(gamma)
        - 0.014615 * math.cos(2 * gamma)
        - 0.040849 * math.sin(2 * gamma)
    )
    decl = (
        0.006918
        - 0.399912 * math.cos(gamma)
        + 0.070257 * math.sin(gamma)
        - 0.006758 * math.cos(2 * gamma)
        + 0.000907 * math.sin(2 * gamma)
        - 0.002697 * math.cos(3 * gamma)
        + 0.00148 * math.sin(3 * gamma)
    )
    lat = math.radians(geom.latitude)
    cos_ha = math.cos(math.radians(SUNRISE_ZENITH)) / (
        math.cos(lat) * math.cos(decl)
    ) - math.tan(lat) * math.tan(decl)
    if not -1.0 <= cos_ha <= 1.0:
        raise ValueError("no solar event")
    ha = math.degrees(math.acos(cos_ha))
    rise_minutes = 720.0 - 4.0 * (geom.longitude + ha) - eqtime
    set_minutes = 720.0 - 4.0 * (geom.longitude - ha) - eqtime
    tz = tz or timezone.utc
    return (
        _minutes_to_instant(day, rise_minutes, tz),
        _minutes_to_instant(day, set_minutes, tz),
    )


def _is_leap(year: int) -> bool:
    return year % 4 == 0 and (year % 100 != 0 or year % 400 == 0)


def local_sunrise_sunset(geom: SiteGeometry, t: datetime) -> Tuple[datetime, datetime]:
    """
    Sunrise and sunset of the local calendar date of ``t``, in the timezone of ``t``.

    The solar computation uses the local date, and the result is shifted by whole days
    when the local offset pushes the UTC events onto a neighbouring date.
    """
    local_day = t.date()
    sunrise, sunset = sunrise_sunset(geom, local_day, t.tzinfo)
    if sunrise.date() != local_day:
        shift = timedelta(days=(local_day - sunrise.date()).days)
        sunrise, sunset = sunrise + shift, sunset + shift
    return sunrise, sunset


def is_daylight(t: datetime, sunrise: datetime, sunset: datetime) -> bool:
    """Daylight is ``sunrise <= t <= sunset``."""
    return sunrise <= t <= sunset


def solar_day_feature(t: datetime, sunrise: datetime, sunset: datetime) -> SolarDayFeature:
    """
    Position of ``t`` between sunrise and sunset.

    ``rho = (t - sunrise) / (sunset - sunrise)`` and the embedding is
    ``(sin 2 pi rho, cos 2 pi rho)``; undefined outside daylight.
    """
    if not sunrise < sunset:
        raise ValueError("sunrise must precede sunset")
    if not is_daylight(t, sunrise, sunset):
        nan = float("nan")
        return SolarDayFeature(nan, nan, nan, False)
    rho = (t - sunrise) / (sunset - sunrise)
    phi = 2.0 * math.pi * rho
    return SolarDayFeature(rho, math.sin(phi), math.cos(phi), True)


def fleet_solar_window(
    geometries: Iterable[SiteGeometry], day: date, tz: Optional[tzinfo] = None
) -> Tuple[datetime, datetime]:
    """
    Earliest sunrise and latest sunset across several sites, for fleet-level series.

    Sites with no solar event on that date are skipped; if none remain this raises
    ``ValueError("no solar event")``.
    """
    windows = []
    for geom in geometries:
        try:
            windows.append(sunrise_sunset(geom, day, tz))
        except ValueError:
            continue
    if not windows:
        raise ValueError("no solar event")
    return min(w[0] for w in windows), max(w[1] for w in windows)
