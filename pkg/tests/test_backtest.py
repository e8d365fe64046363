# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

from __future__ import annotations

import math
from dataclasses import replace
from datetime import date, datetime, timedelta, timezone

import numpy as np
import pandas as pd
import pytest

from cacp.backtest import BacktestConfig, backtest_site, first_test_day, run_backtest
from cacp.backtest.site import (
    CalibrationOptions,
    FeatureView,
    SiteFrame,
    adjust_bounds,
    build_view,
    scheme_adjustments,
)
from cacp.conformal import (
    CalibrationSet,
    WeightVector,
    calibrate_interval,
    calibration_adjustment,
    compute_weights,
    conformity_score,
)
from cacp.conformal.weights import (
    KMeansScheme,
    KNNScheme,
    LaplacianKernel,
    NexCPScheme,
    RBFKernel,
    UniformScheme,
)
from cacp.features import FeatureMask, StandardizationStats
from cacp.io import interval_from_quantiles
from cacp.synth import SynthSpec, generate

FIRST_TEST_DAY = date(2023, 3, 8)

SMALL_GRIDS = {
    "cacp_kernel": {"kernel": ["rbf"], "gamma": [1.0]},
    "cacp_kmeans": {"K": [2]},
    "cacp_knn": {"K": [5, 10]},
    "nexcp": {"rho_decay": [0.95]},
    "adaptive_cp": {"gamma_lr": [1e-3]},
}


def wave(i, t):
    return 0.5 + 0.15 * math.sin(0.7 * i) + 0.05 * math.cos(0.3 * t.hour)


def small_config(**values):
    settings = {
        "alpha_grid": [0.2, 0.4],
        "initial_calibration_end": FIRST_TEST_DAY,
        "validation_window": 2,
        "lag_offsets": [24],
        "lag_windows": [0],
        "feature_families": ["lags", "hour", "solar"],
        "tuning_grids": SMALL_GRIDS,
        "workers": 1,
    }
    settings.update(values)
    return BacktestConfig(**settings)


@pytest.fixture
def wave_series(series_factory):
    return series_factory(24 * 11, actual=wave)


def test_cqr_single_day_matches_direct_calibration(wave_series) -> None:
    day = date(2023, 3, 9)
    config = small_config(
        methods=["cqr"], alpha_grid=[0.2], initial_calibration_end=day, test_end=day
    )
    result = run_backtest({"site-a": wave_series}, config)

    past = [r for r in wave_series if r.is_daylight and r.t.date() < day]
    scores = [conformity_score(interval_from_quantiles(r, 0.2), r.actual) for r in past]
    cal = CalibrationSet([r.t for r in past], np.zeros((len(past), 0)), {0.2: scores})
    weights = WeightVector.uniform(len(cal))
    today = [r for r in wave_series if r.is_daylight and r.t.date() == day]

    frame = result.intervals
    assert frame["timestamp"].tolist() == [r.t.isoformat() for r in today]
    for (_, row), record in zip(frame.iterrows(), today):
        expected = calibrate_interval(interval_from_quantiles(record, 0.2), cal, weights)
        assert row["lower"] == pytest.approx(expected.lower)
        assert row["upper"] == pytest.approx(expected.upper)
        assert row["covered"] == expected.contains(record.actual)


def test_raw_intervals_pass_through(wave_series) -> None:
    config = small_config(methods=["raw"], test_end=FIRST_TEST_DAY)
    frame = run_backtest({"site-a": wave_series}, config).intervals
    assert set(frame["alpha"]) == {0.2, 0.4}
    assert (frame["adjustment"] == 0.0).all()
    low = frame[frame["alpha"] == 0.2]
    assert low["lower"].to_numpy() == pytest.approx(0.4)
    assert low["upper"].to_numpy() == pytest.approx(0.6)


def test_only_daylight_is_emitted(wave_series) -> None:
    config = small_config(methods=["cqr"], test_end=FIRST_TEST_DAY)
    frame = run_backtest({"site-a": wave_series}, config).intervals
    assert frame["hour"].between(6, 18).all()
    assert len(frame) == 13 * 2


def test_every_method_runs(wave_series) -> None:
    config = small_config(test_end=date(2023, 3, 9))
    result = run_backtest({"site-a": wave_series}, config)
    frame = result.intervals
    assert set(frame["method"]) == set(config.methods)
    counts = frame.groupby("method").size()
    assert counts.nunique() == 1
    assert set(result.reports) == set(config.methods)
    for report in result.reports.values():
        assert report.alphas == [0.2, 0.4]
    assert (frame["lower"] <= frame["upper"]).all()
    assert frame["lower"].between(0.0, 1.0).all()
    assert result.n_evaluated == 2 * 13


def test_output_is_deterministic(wave_series) -> None:
    config = small_config(test_end=date(2023, 3, 9))
    first = run_backtest({"site-a": wave_series}, config)
    second = run_backtest({"site-a": wave_series}, config)
    pd.testing.assert_frame_equal(first.intervals, second.intervals)
    assert first.tuning_history == second.tuning_history


def test_future_records_do_not_leak(wave_series) -> None:
    config = small_config()
    base = run_backtest({"site-a": wave_series}, config).intervals
    mutated = [
        replace(
            record,
            actual=1.0 - record.actual,
            raw_quantiles={level: value / 2 for level, value in record.raw_quantiles.items()},
        )
        if record.t.date() > FIRST_TEST_DAY
        else record
        for record in wave_series
    ]
    changed = run_backtest({"site-a": mutated}, config).intervals
    day = FIRST_TEST_DAY.isoformat()
    base_day = base[base["timestamp"].str.startswith(day)].reset_index(drop=True)
    changed_day = changed[changed["timestamp"].str.startswith(day)].reset_index(drop=True)
    assert len(base_day) > 0
    pd.testing.assert_frame_equal(base_day, changed_day)


def test_calibration_window_expands(wave_series) -> None:
    result = backtest_site("site-a", wave_series, small_config(methods=["cqr"]))
    sizes = [timing.calibration_size for timing in result.timings]
    assert sizes == [13 * 7, 13 * 8, 13 * 9, 13 * 10]
    assert [timing.day for timing in result.timings][0] == FIRST_TEST_DAY


def test_calibration_cap(wave_series) -> None:
    result = backtest_site(
        "site-a", wave_series, small_config(methods=["cqr"], max_calibration_size=20)
    )
    assert {timing.calibration_size for timing in result.timings} == {20}


def test_recalibration_frequency(wave_series) -> None:
    methods = ["cqr", "nexcp"]
    daily = backtest_site("site-a", wave_series, small_config(methods=methods))
    assert [t.tuned for t in daily.timings] == [True] * 4
    assert len(daily.tuning_history) == 4
    every_other = backtest_site(
        "site-a", wave_series, small_config(methods=methods, delta_rec=2)
    )
    assert [t.tuned for t in every_other.timings] == [True, False, True, False]
    once = backtest_site("site-a", wave_series, small_config(methods=methods, delta_rec=None))
    assert [t.tuned for t in once.timings] == [True, False, False, False]
    assert [entry["day"] for entry in once.tuning_history] == [FIRST_TEST_DAY.isoformat()]


def test_tuning_history_entries(wave_series) -> None:
    result = backtest_site(
        "site-a", wave_series, small_config(methods=["cacp_knn"], test_end=FIRST_TEST_DAY)
    )
    (entry,) = result.tuning_history
    assert entry["site_id"] == "site-a"
    assert entry["method"] == "cacp_knn"
    assert entry["chosen_params"]["K"] in (5, 10)
    assert entry["chosen_feature_mask"]
    assert entry["n_candidates"] > 0


def test_sites_are_independent(series_factory) -> None:
    a = series_factory(24 * 10, site_id="a", actual=wave)
    b = series_factory(24 * 10, site_id="b")
    config = small_config(methods=["cqr"], test_end=FIRST_TEST_DAY)
    together = run_backtest({"b": b, "a": a}, config).intervals
    alone = run_backtest({"a": a}, config).intervals
    assert together["site_id"].tolist()[: len(alone)] == ["a"] * len(alone)
    pd.testing.assert_frame_equal(together.iloc[: len(alone)], alone)


@pytest.mark.slow
def test_worker_count_does_not_change_output(series_factory) -> None:
    data = {
        site: series_factory(24 * 10, site_id=site, actual=wave) for site in ("a", "b", "c")
    }
    config = small_config(methods=["cqr", "nexcp"], test_end=date(2023, 3, 9))
    serial = run_backtest(data, config).intervals
    parallel = run_backtest(data, small_config(
        methods=["cqr", "nexcp"], test_end=date(2023, 3, 9), workers=3
    )).intervals
    pd.testing.assert_frame_equal(serial, parallel)


def test_default_first_test_day(series_factory) -> None:
    site = SiteFrame("site-a", series_factory(24 * 3), (0.2,))
    config = BacktestConfig()
    assert date.fromordinal(first_test_day(site, config)) == date(2023, 5, 1)


def test_no_test_days(wave_series) -> None:
    config = small_config(initial_calibration_end=date(2024, 1, 1))
    with pytest.raises(ValueError, match="no test days"):
        run_backtest({"site-a": wave_series}, config)


def test_empty_initial_calibration(wave_series) -> None:
    config = small_config(initial_calibration_end=date(2023, 3, 1))
    with pytest.raises(ValueError, match="initial calibration window"):
        run_backtest({"site-a": wave_series}, config)


def test_missing_lags_are_skipped_for_every_method(series_factory) -> None:
    records = series_factory(24 * 11, actual=wave)
    # Drop one whole day so day-ahead lags of the next day are unavailable.
    gap = date(2023, 3, 8)
    records = [r for r in records if r.t.date() != gap]
    config = small_config(
        methods=["cqr", "cacp_knn"],
        feature_families=["lags"],
        initial_calibration_end=date(2023, 3, 9),
        test_end=date(2023, 3, 9),
    )
    result = run_backtest({"site-a": records}, config)
    assert result.skipped == {"site-a": 13}
    assert result.intervals.empty


def test_adjust_bounds_matches_scalar() -> None:
    lower, upper = adjust_bounds(
        np.array([0.4, 0.4, 0.05]), np.array([0.5, 0.5, 0.95]), np.array([0.1, -0.1, 0.1]), True
    )
    assert lower == pytest.approx([0.3, 0.45, 0.0])
    assert upper == pytest.approx([0.6, 0.45, 1.0])


@pytest.mark.parametrize(
    "options",
    [
        CalibrationOptions(),
        CalibrationOptions(finite_sample_correction=True),
        CalibrationOptions(test_point_mass=True),
    ],
)
@pytest.mark.parametrize(
    "scheme",
    [
        UniformScheme(),
        RBFKernel(gamma=0.5),
        LaplacianKernel(gamma=2.0),
        KMeansScheme(K=4),
        KNNScheme(K=17),
        KNNScheme(K=500),
        NexCPScheme(rho_decay=0.99),
    ],
)
def test_batched_adjustments_match_single_rows(scheme, options) -> None:
    rng = np.random.default_rng(41)
    n = 300
    start = datetime(2023, 1, 1, tzinfo=timezone.utc)
    timestamps = [start + timedelta(hours=i) for i in range(n)]
    # Coarse covariates and scores put ties on both distances and quantiles.
    covariates = np.round(rng.normal(size=(n, 2)), 1)
    scores = {alpha: np.round(rng.normal(0.0, 0.1, size=n), 2) for alpha in (0.2, 0.4)}
    cal = CalibrationSet(timestamps, covariates, scores)
    target_x = np.round(rng.normal(size=(25, 2)), 1)
    view = FeatureView(cal, np.arange(n), np.arange(25), target_x, np.zeros(0, dtype=int))
    batched = scheme_adjustments(scheme, view, (0.2, 0.4), options)
    for alpha in (0.2, 0.4):
        expected = [
            calibration_adjustment(
                cal,
                compute_weights(scheme, x, cal),
                alpha,
                finite_sample_correction=options.finite_sample_correction,
                test_point_mass=options.test_point_mass,
                test_weight=scheme.test_weight(),
            )
            for x in target_x
        ]
        assert batched[alpha].tolist() == expected


def test_tuning_threads_do_not_change_output(wave_series) -> None:
    serial = run_backtest({"site-a": wave_series}, small_config(tuning_threads=1))
    threaded = run_backtest({"site-a": wave_series}, small_config(tuning_threads=4))
    pd.testing.assert_frame_equal(serial.intervals, threaded.intervals)
    assert serial.tuning_history == threaded.tuning_history


@pytest.mark.slow
def test_one_day_with_ten_thousand_calibration_records_is_fast() -> None:
    data = generate(SynthSpec(n_days=830, noise_seed=0))
    day = SynthSpec().start + timedelta(days=825)
    config = BacktestConfig(
        initial_calibration_end=day,
        test_end=day,
        max_calibration_size=10_000,
        workers=1,
    )
    result = run_backtest(data.series, config)
    (timing,) = result.timings
    assert timing.tuned
    assert timing.calibration_size == 10_000
    assert timing.seconds < 60.0
    assert set(result.intervals["method"]) == set(config.methods)


def test_view_targets_are_standardized_with_calibration_stats(wave_series) -> None:
    site = SiteFrame("site-a", wave_series, (0.2,))
    cal_rows = site.daylight_before(int(site.days[8]))
    target_rows = site.daylight_between(int(site.days[8]), int(site.days[8]))
    mask = FeatureMask.from_families(("lags", "hour", "solar"))
    view = build_view(site, cal_rows, target_rows, mask, 24, 1)
    matrix = site.table.matrix(mask, lag_offset=24, window=1)
    assert view.target_rows.tolist() == target_rows.tolist()
    np.testing.assert_array_equal(view.target_x, view.cal.stats.apply(matrix[target_rows]))
    assert view.cal.stats == StandardizationStats.fit(matrix[view.cal_rows])


def test_frame_keeps_raw_width_and_last_day_scores(wave_series) -> None:
    result = run_backtest({"site-a": wave_series}, small_config(methods=["raw", "cqr"]))
    frame = result.intervals
    raw = frame[frame["method"] == "raw"]
    np.testing.assert_allclose(raw["raw_width"], raw["upper"] - raw["lower"])
    cqr = frame[frame["method"] == "cqr"]
    assert cqr["raw_width"].tolist() == raw["raw_width"].tolist()
    last_day = result.timings[-1]
    assert set(result.scores["day"]) == {last_day.day.isoformat()}
    assert len(result.scores) == 2 * last_day.calibration_size
    assert set(result.score_quantiles["method"]) == {"cqr"}
