# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

from __future__ import annotations

import math
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from cacp.features import (
    FAMILIES,
    FeatureMask,
    FeatureTable,
    RecordContext,
    StandardizationStats,
    actuals_by_instant,
    assemble_covariates,
    build_lag_feature,
    period_position,
    raw_covariates,
    time_embedding,
)

UTC = timezone.utc


def ramp_series(series_factory, n_hours=72):
    return series_factory(n_hours, actual=lambda i, t: (i % 24) / 24.0)


def test_build_lag_feature_examples(series_factory) -> None:
    series = ramp_series(series_factory)
    t = series[34].t
    feature = build_lag_feature(series, t, 1, 1)
    assert feature.values == (series[33].actual, series[32].actual)
    day_before = build_lag_feature(series, series[60].t, 24, 0)
    assert day_before.values == (series[36].actual,)
    assert len(build_lag_feature(series, t, 24, 2).values) == 3
    lookup = actuals_by_instant(series)
    assert build_lag_feature(lookup, t, 24, 2) == build_lag_feature(series, t, 24, 2)


def test_build_lag_feature_insufficient_history(series_factory) -> None:
    series = ramp_series(series_factory)
    with pytest.raises(ValueError, match="insufficient history"):
        build_lag_feature(series, series[10].t, 24, 0)
    with pytest.raises(ValueError, match="insufficient history"):
        build_lag_feature(series, series[24].t, 24, 1)


def test_time_embedding_examples() -> None:
    midnight = datetime(2023, 6, 1, 0, tzinfo=UTC)
    assert period_position(midnight, "hour-of-day") == 24
    full = time_embedding(midnight, "hour-of-day")
    assert full.sin_component == pytest.approx(0.0, abs=1e-12)
    assert full.cos_component == pytest.approx(1.0)
    quarter = time_embedding(datetime(2023, 6, 1, 6, tzinfo=UTC), "hour-of-day")
    assert quarter.sin_component == pytest.approx(1.0)
    assert quarter.cos_component == pytest.approx(0.0, abs=1e-12)
    june = time_embedding(datetime(2023, 6, 15, tzinfo=UTC), "month-of-year")
    assert june.sin_component == pytest.approx(0.0, abs=1e-12)
    assert june.cos_component == pytest.approx(-1.0)


def test_day_of_year_capped_on_leap_years() -> None:
    assert period_position(datetime(2024, 12, 31, tzinfo=UTC), "day-of-year") == 365
    assert period_position(datetime(2024, 12, 30, tzinfo=UTC), "day-of-year") == 365
    assert period_position(datetime(2023, 1, 1, tzinfo=UTC), "day-of-year") == 1


def test_time_embeddings_on_unit_circle() -> None:
    t = datetime(2023, 1, 1, tzinfo=UTC)
    for step in range(0, 24 * 400, 7):
        instant = t + timedelta(hours=step)
        for kind in ("hour-of-day", "day-of-year", "month-of-year"):
            e = time_embedding(instant, kind)
            assert math.hypot(e.sin_component, e.cos_component) == pytest.approx(1.0, abs=1e-9)


def test_unknown_period_kind() -> None:
    with pytest.raises(KeyError):
        period_position(datetime(2023, 1, 1, tzinfo=UTC), "week")


def test_feature_mask_flags() -> None:
    mask = FeatureMask.from_families(("lags", "solar"))
    assert mask.lags and mask.solar
    assert not mask.hour
    assert mask.families == ("lags", "solar")
    assert str(mask) == "lags+solar"
    assert len(mask) == 2
    mask.hour = True
    assert mask.families == ("lags", "hour", "solar")
    assert FeatureMask.from_families(mask.families) == mask
    with pytest.raises(KeyError):
        FeatureMask.from_families(("wind",))
    with pytest.raises(ValueError):
        FeatureMask(1 << len(FAMILIES))


def test_all_masks() -> None:
    masks = list(FeatureMask.all_masks())
    assert len(masks) == 31
    assert len(set(masks)) == 31
    subset = list(FeatureMask.all_masks(("hour", "solar")))
    assert [m.families for m in subset] == [("hour",), ("solar",), ("hour", "solar")]


def test_dimension_bookkeeping() -> None:
    assert FeatureMask.from_families(("lags",)).dimension(1) == 2
    assert FeatureMask.from_families(FAMILIES).dimension(2) == 11


def test_standardization() -> None:
    matrix = np.array([[1.0, 5.0], [3.0, 5.0], [5.0, 5.0]])
    stats = StandardizationStats.fit(matrix)
    out = stats.apply(matrix)
    assert np.all(np.isfinite(out))
    assert np.array_equal(out[:, 1], np.zeros(3))
    assert out[:, 0].mean() == pytest.approx(0.0)
    assert out[:, 0].std() == pytest.approx(1.0)
    appended = StandardizationStats.fit(np.vstack([matrix, [[100.0, 5.0]]]))
    assert appended != stats
    with pytest.raises(ValueError):
        StandardizationStats.fit(np.zeros((0, 2)))


def test_assemble_covariates(series_factory) -> None:
    series = ramp_series(series_factory)
    history = actuals_by_instant(series)
    mask = FeatureMask.from_families(FAMILIES)
    contexts = [RecordContext(record, history, 24, 2) for record in series[30:42]]
    raw = np.vstack([raw_covariates(context, mask) for context in contexts])
    assert raw.shape == (12, 11)
    stats = StandardizationStats.fit(raw)
    first = assemble_covariates(contexts[0], mask, stats)
    again = assemble_covariates(contexts[0], mask, stats)
    assert first == again
    assert len(first) == 11
    assert np.all(np.isfinite(first.as_array()))
    # Lags come first.
    assert first.components[0] == pytest.approx(stats.apply(raw)[0, 0])
    night = RecordContext(series[2], history, 24, 0)
    with pytest.raises(ValueError, match="insufficient history"):
        raw_covariates(night, FeatureMask.from_families(("solar",)))


def test_feature_table_matches_single_records(series_factory) -> None:
    series = ramp_series(series_factory)
    history = actuals_by_instant(series)
    table = FeatureTable(series)
    mask = FeatureMask.from_families(("lags", "hour", "solar"))
    matrix = table.matrix(mask, lag_offset=24, window=1)
    assert matrix.shape == (len(series), mask.dimension(1))
    for i in (30, 36, 40):
        expected = raw_covariates(RecordContext(series[i], history, 24, 1), mask)
        assert np.array_equal(matrix[i], expected)
    # No lag history on the first day, no solar feature at night.
    assert np.isnan(matrix[5]).any()
    assert np.isnan(matrix[26]).any()
    assert not np.isnan(matrix[36]).any()


def test_feature_table_context_assembles_standardized_rows(series_factory) -> None:
    series = ramp_series(series_factory)
    table = FeatureTable(series)
    mask = FeatureMask.from_families(("lags", "solar"))
    matrix = table.matrix(mask, lag_offset=24, window=1)
    stats = StandardizationStats.fit(matrix[30:42])
    context = table.context(40, lag_offset=24, window=1)
    assert context.record is series[40]
    vector = assemble_covariates(context, mask, stats)
    assert np.array_equal(vector.as_array(), stats.apply(matrix[40]))
