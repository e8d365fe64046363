# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from cacp.core import TimeSeriesRecord

DECILES = tuple(i / 10 for i in range(1, 10))


def build_series(
    n_hours,
    *,
    site_id="site-a",
    start=datetime(2023, 3, 1, tzinfo=timezone.utc),
    actual=None,
    spread=0.1,
    levels=DECILES,
    sunrise_hour=6,
    sunset_hour=18,
):
    """
    Hourly records whose quantiles are centered on 0.5 with half-width ``spread``
    at the outermost declared level, linear in between.
    """
    records = []
    for i in range(n_hours):
        t = start + timedelta(hours=i)
        value = 0.5 if actual is None else float(actual(i, t))
        midnight = t.replace(hour=0, minute=0, second=0, microsecond=0)
        sunrise = midnight + timedelta(hours=sunrise_hour)
        sunset = midnight + timedelta(hours=sunset_hour)
        lo, hi = levels[0], levels[-1]
        quantiles = {
            level: 0.5 + spread * (2.0 * (level - lo) / (hi - lo) - 1.0) for level in levels
        }
        records.append(
            TimeSeriesRecord(
                t=t,
                actual=value,
                raw_quantiles=quantiles,
                site_id=site_id,
                is_daylight=sunrise <= t <= sunset,
                sunrise=sunrise,
                sunset=sunset,
            )
        )
    return records


@pytest.fixture
def series_factory():
    """`build_series` as a fixture."""
    return build_series


@pytest.fixture
def rng():
    return np.random.default_rng(0)
