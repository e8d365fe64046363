# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

from __future__ import annotations

import math
from datetime import date, datetime, timedelta, timezone

import pytest

from cacp.features.solar import (
    SiteGeometry,
    fleet_solar_window,
    is_daylight,
    local_sunrise_sunset,
    solar_day_feature,
    sunrise_sunset,
)

UTC = timezone.utc


def test_equator_equinox_day_length() -> None:
    sunrise, sunset = sunrise_sunset(SiteGeometry(0.0, 0.0), date(2023, 3, 20))
    length = (sunset - sunrise).total_seconds() / 60.0
    # Refraction and the solar disc add a few minutes to the geometric 12 hours.
    assert abs(length - 720.0) <= 10.0
    assert sunrise < sunset


def test_summer_longer_than_winter() -> None:
    geom = SiteGeometry(40.0, -105.0)
    summer = sunrise_sunset(geom, date(2023, 6, 21))
    winter = sunrise_sunset(geom, date(2023, 12, 21))
    assert summer[1] - summer[0] > winter[1] - winter[0]


def test_polar_day_has_no_solar_event() -> None:
    with pytest.raises(ValueError, match="no solar event"):
        sunrise_sunset(SiteGeometry(80.0, 0.0), date(2023, 6, 21))


def test_site_geometry_ranges() -> None:
    with pytest.raises(ValueError, match="latitude"):
        SiteGeometry(91.0, 0.0)
    with pytest.raises(ValueError, match="longitude"):
        SiteGeometry(0.0, 181.0)


def test_local_sunrise_sunset_on_local_date() -> None:
    tz = timezone(timedelta(hours=-7))
    t = datetime(2023, 7, 1, 12, tzinfo=tz)
    sunrise, sunset = local_sunrise_sunset(SiteGeometry(35.1, -106.6), t)
    assert sunrise.date() == t.date()
    assert sunrise.utcoffset() == timedelta(hours=-7)
    assert 4 <= sunrise.hour <= 7
    assert 19 <= sunset.hour <= 21


def test_solar_day_feature_examples() -> None:
    sunrise = datetime(2023, 3, 20, 6, tzinfo=UTC)
    sunset = datetime(2023, 3, 20, 18, tzinfo=UTC)
    at_sunrise = solar_day_feature(sunrise, sunrise, sunset)
    assert at_sunrise.defined
    assert at_sunrise.rho == 0.0
    assert at_sunrise.sin_component == pytest.approx(0.0, abs=1e-12)
    assert at_sunrise.cos_component == pytest.approx(1.0)

    noon = solar_day_feature(datetime(2023, 3, 20, 12, tzinfo=UTC), sunrise, sunset)
    assert noon.rho == pytest.approx(0.5)
    assert noon.sin_component == pytest.approx(0.0, abs=1e-12)
    assert noon.cos_component == pytest.approx(-1.0)

    night = solar_day_feature(datetime(2023, 3, 20, 19, tzinfo=UTC), sunrise, sunset)
    assert not night.defined
    assert math.isnan(night.rho)


def test_solar_day_feature_translation() -> None:
    sunrise = datetime(2023, 3, 20, 6, 13, tzinfo=UTC)
    sunset = datetime(2023, 3, 20, 18, 41, tzinfo=UTC)
    t = datetime(2023, 3, 20, 9, 30, tzinfo=UTC)
    shift = timedelta(days=3, hours=5)
    first = solar_day_feature(t, sunrise, sunset)
    second = solar_day_feature(t + shift, sunrise + shift, sunset + shift)
    assert first.rho == pytest.approx(second.rho, abs=1e-12)
    assert first.sin_component ** 2 + first.cos_component ** 2 == pytest.approx(1.0, abs=1e-9)


def test_solar_day_feature_rejects_inverted_window() -> None:
    t = datetime(2023, 3, 20, 12, tzinfo=UTC)
    with pytest.raises(ValueError):
        solar_day_feature(t, t, t)


def test_is_daylight_is_closed() -> None:
    sunrise = datetime(2023, 3, 20, 6, tzinfo=UTC)
    sunset = datetime(2023, 3, 20, 18, tzinfo=UTC)
    assert is_daylight(sunrise, sunrise, sunset)
    assert is_daylight(sunset, sunrise, sunset)
    assert not is_daylight(sunset + timedelta(seconds=1), sunrise, sunset)


def test_fleet_solar_window_spans_sites() -> None:
    east = SiteGeometry(35.0, -80.0, "east")
    west = SiteGeometry(35.0, -120.0, "west")
    day = date(2023, 6, 1)
    sunrise, sunset = fleet_solar_window([east, west], day)
    assert sunrise == sunrise_sunset(east, day)[0]
    assert sunset == sunrise_sunset(west, day)[1]


def test_fleet_solar_window_skips_polar_sites() -> None:
    day = date(2023, 6, 21)
    polar = SiteGeometry(80.0, 0.0)
    site = SiteGeometry(35.0, 0.0)
    assert fleet_solar_window([polar, site], day) == sunrise_sunset(site, day)
    with pytest.raises(ValueError, match="no solar event"):
        fleet_solar_window([polar], day)
