# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

from __future__ import annotations

import math
from datetime import date

import pytest

from cacp.backtest.site import SiteFrame
from cacp.backtest.tuning import (
    TuningResult,
    feature_choices,
    param_candidates,
    split_for_day,
    tune,
)
from cacp.features import FeatureMask

TEST_DAY = date(2023, 3, 8).toordinal()


def wave(i, t):
    return 0.5 + 0.15 * math.sin(0.7 * i) + 0.05 * math.cos(0.3 * t.hour)


@pytest.fixture
def constant_site(series_factory):
    return SiteFrame("site-a", series_factory(24 * 10), (0.2,))


@pytest.fixture
def wave_site(series_factory):
    return SiteFrame("site-a", series_factory(24 * 10, actual=wave), (0.2, 0.4))


def test_param_candidates_order() -> None:
    candidates = param_candidates({"kernel": ["rbf", "laplacian"], "gamma": [2.0, 0.5]})
    assert candidates == [
        {"gamma": 0.5, "kernel": "rbf"},
        {"gamma": 0.5, "kernel": "laplacian"},
        {"gamma": 2.0, "kernel": "rbf"},
        {"gamma": 2.0, "kernel": "laplacian"},
    ]
    with pytest.raises(ValueError, match="empty tuning grid"):
        param_candidates({"K": []})


def test_feature_choices_simplest_first() -> None:
    choices = feature_choices(["hour", "lags"], [48, 24], [1, 0])
    assert len(choices) == 9
    lags = FeatureMask.from_families(["lags"])
    hour = FeatureMask.from_families(["hour"])
    assert choices[0].feature_mask == lags
    assert (choices[0].lag_offset, choices[0].lag_window) == (24, 0)
    assert (choices[3].lag_offset, choices[3].lag_window) == (48, 1)
    assert choices[4].feature_mask == hour
    assert choices[4].lag_offset is None
    assert len(choices[-1].feature_mask) == 2


def test_split_for_day(constant_site) -> None:
    split = split_for_day(constant_site, TEST_DAY, 2)
    days = constant_site.days
    assert set(days[split.val_rows]) == {TEST_DAY - 2, TEST_DAY - 1}
    assert days[split.cal_rows].max() == TEST_DAY - 3
    assert constant_site.daylight[split.cal_rows].all()
    capped = split_for_day(constant_site, TEST_DAY, 2, max_calibration_size=10)
    assert capped.cal_rows.tolist() == split.cal_rows[-10:].tolist()


def test_single_point_grid(wave_site) -> None:
    split = split_for_day(wave_site, TEST_DAY, 2)
    result = tune("nexcp", split, (0.2, 0.4), {"rho_decay": [0.98]})
    assert result.chosen_params == {"rho_decay": 0.98}
    assert result.chosen_feature_mask is None
    assert result.n_candidates == 1
    assert math.isfinite(result.validation_ws)


def test_ties_go_to_smaller_k(constant_site) -> None:
    split = split_for_day(constant_site, TEST_DAY, 2)
    choices = feature_choices(["hour", "solar"], [24], [0])
    result = tune("cacp_knn", split, (0.2,), {"K": [10, 5]}, choices)
    assert result.chosen_params == {"K": 5}
    assert result.chosen_feature_mask == FeatureMask.from_families(["hour"])
    assert result.n_candidates == 2 * len(choices)
    assert result.validation_ws == pytest.approx(0.0)


def test_unscorable_candidates_are_skipped(wave_site) -> None:
    split = split_for_day(wave_site, TEST_DAY, 2)
    choices = feature_choices(["solar"], [24], [0])
    result = tune("cacp_kmeans", split, (0.2,), {"K": [2, 100000]}, choices)
    assert result.chosen_params == {"K": 2}


def test_nothing_scorable(wave_site, caplog) -> None:
    split = split_for_day(wave_site, TEST_DAY, 2)
    choices = feature_choices(["solar"], [24], [0])
    result = tune("cacp_kmeans", split, (0.2,), {"K": [100000]}, choices)
    assert math.isinf(result.validation_ws)
    assert result.as_dict()["validation_ws"] is None
    assert "could be scored" in caplog.text


def test_context_method_needs_choices(wave_site) -> None:
    split = split_for_day(wave_site, TEST_DAY, 2)
    with pytest.raises(ValueError, match="feature mask"):
        tune("cacp_knn", split, (0.2,), {"K": [5]})


def test_adaptive_tuning_picks_from_grid(wave_site) -> None:
    split = split_for_day(wave_site, TEST_DAY, 2)
    result = tune("adaptive_cp", split, (0.2, 0.4), {"gamma_lr": [1e-3, 1e-4]})
    assert result.chosen_params["gamma_lr"] in (1e-3, 1e-4)
    assert result.n_candidates == 2


def test_result_as_dict() -> None:
    result = TuningResult(
        "cacp_knn",
        {"K": 5},
        FeatureMask.from_families(["hour", "solar"]),
        validation_ws=0.25,
        n_candidates=3,
    )
    assert result.as_dict() == {
        "method": "cacp_knn",
        "chosen_params": {"K": 5},
        "chosen_feature_mask": ["hour", "solar"],
        "lag_offset": None,
        "lag_window": None,
        "validation_ws": 0.25,
        "n_candidates": 3,
    }
