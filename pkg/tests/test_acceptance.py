# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
Statistical checks against the synthetic ground truth.

Coverage is read from `GroundTruth.coverage_many`, the exact conditional
probability of each calibrated interval, rather than from the realized actuals.
"""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np
import pytest

from cacp.backtest import CACP_KERNEL, CACP_KMEANS, CACP_KNN, CQR, BacktestConfig, run_backtest
from cacp.backtest.site import (
    CalibrationOptions,
    SiteFrame,
    adjust_bounds,
    build_view,
    scheme_adjustments,
)
from cacp.conformal.weights import (
    KMeansScheme,
    KNNScheme,
    LaplacianKernel,
    RBFKernel,
    UniformScheme,
)
from cacp.core import DEFAULT_ALPHAS
from cacp.features import FeatureMask
from cacp.synth import SynthSpec, generate

pytestmark = pytest.mark.slow

ALPHA = 0.2
SOLAR = FeatureMask.from_families(["solar"])
SEEDS = (0, 1, 2, 3, 4)


def rho_of(record):
    return (record.t - record.sunrise) / (record.sunset - record.sunrise)


def split_site(data, cal_days, alphas=(ALPHA,)):
    site = SiteFrame("site-a", data.series["site-a"], alphas)
    first = int(site.days[0])
    cal_rows = site.daylight_before(first + cal_days)
    target_rows = site.daylight_between(first + cal_days, int(site.days[-1]))
    return site, cal_rows, target_rows


def calibrated_coverage(data, site, view, scheme, alphas=(ALPHA,)):
    """Adjustment and true coverage of every target row, per ``alpha``."""
    adjustments = scheme_adjustments(scheme, view, alphas, CalibrationOptions())
    rows = view.target_rows
    instants = [site.instants[i] for i in rows]
    result = {}
    for alpha in alphas:
        lower, upper = adjust_bounds(
            site.lower[alpha][rows], site.upper[alpha][rows], adjustments[alpha], True
        )
        coverage = data.truth.coverage_many("site-a", instants, lower, upper)
        result[alpha] = (adjustments[alpha], coverage)
    return result


@pytest.mark.parametrize("seed", SEEDS)
def test_marginal_coverage_on_exchangeable_data(seed) -> None:
    data = generate(SynthSpec(n_days=1020, regime="exchangeable", noise_seed=seed))
    site, cal_rows, target_rows = split_site(data, 900, DEFAULT_ALPHAS)
    assert cal_rows.size > 9000

    plain = build_view(site, cal_rows, target_rows)
    solar = build_view(site, cal_rows, target_rows, SOLAR)
    cases = {
        "cqr": (plain, UniformScheme()),
        "rbf": (solar, RBFKernel(gamma=1.0)),
        "laplacian": (solar, LaplacianKernel(gamma=1.0)),
        "kmeans": (solar, KMeansScheme(K=5, seed=seed)),
        "knn": (solar, KNNScheme(K=1000)),
    }
    for name, (view, scheme) in cases.items():
        for alpha, (_, coverage) in calibrated_coverage(
            data, site, view, scheme, DEFAULT_ALPHAS
        ).items():
            assert coverage.mean() == pytest.approx(1 - alpha, abs=0.02), (name, alpha)


def diurnal_split(seed):
    data = generate(SynthSpec(n_days=760, regime="diurnal-heteroscedastic", noise_seed=seed))
    site, cal_rows, target_rows = split_site(data, 650)
    return data, site, cal_rows, target_rows


def hourly_means(site, rows, values):
    hours = site.hours[rows]
    result = {}
    for hour in np.unique(hours):
        selected = hours == hour
        # Hours seen only around the solstices carry too few rows to judge.
        if selected.sum() >= 30:
            result[int(hour)] = float(values[selected].mean())
    return result


def test_context_weights_hold_coverage_in_every_hour() -> None:
    passed = 0
    for seed in SEEDS:
        data, site, cal_rows, target_rows = diurnal_split(seed)
        plain = build_view(site, cal_rows, target_rows)
        _, cqr = calibrated_coverage(data, site, plain, UniformScheme())[ALPHA]
        view = build_view(site, cal_rows, target_rows, SOLAR)
        _, knn = calibrated_coverage(data, site, view, KNNScheme(K=500))[ALPHA]
        knn_hourly = hourly_means(site, view.target_rows, knn)
        cqr_hourly = hourly_means(site, plain.target_rows, cqr)
        knn_holds = all(abs(value - (1 - ALPHA)) <= 0.05 for value in knn_hourly.values())
        cqr_misses = any(abs(value - (1 - ALPHA)) >= 0.10 for value in cqr_hourly.values())
        passed += knn_holds and cqr_misses
    assert passed >= 4


def test_context_weights_narrow_midday_and_widen_shoulders() -> None:
    data, site, cal_rows, target_rows = diurnal_split(4)
    view = build_view(site, cal_rows, target_rows, SOLAR)
    assert view.target_rows.tolist() == target_rows.tolist()
    adjustment, _ = calibrated_coverage(data, site, view, KNNScheme(K=500))[ALPHA]
    rho = np.asarray([rho_of(site.records[i]) for i in target_rows])
    midday = (rho > 0.42) & (rho < 0.58)
    shoulders = ((rho > 0.15) & (rho < 0.25)) | ((rho > 0.75) & (rho < 0.85))
    assert midday.any() and shoulders.any()
    assert adjustment[midday].mean() < 0.0
    assert adjustment[shoulders].mean() > 0.0


def test_context_weights_sharpen_regime_switching_intervals() -> None:
    spec = SynthSpec(n_days=150, regime="regime-switching", noise_seed=0)
    data = generate(spec)
    config = BacktestConfig(
        initial_calibration_end=spec.start + timedelta(days=90),
        methods=[CQR, CACP_KERNEL, CACP_KMEANS, CACP_KNN],
        feature_families=["lags", "solar"],
        lag_offsets=[24],
        lag_windows=[1, 2],
        delta_rec=10,
        finite_sample_correction=True,
        tuning_grids={
            CACP_KERNEL: {"kernel": ["rbf", "laplacian"], "gamma": [1.0, 4.0, 16.0]},
            CACP_KMEANS: {"K": [5, 10, 20]},
            CACP_KNN: {"K": [50, 100, 200, 400]},
        },
        workers=1,
    )
    result = run_backtest(data.series, config)
    frame = result.intervals

    def true_picp(method):
        rows = frame[frame["method"] == method]
        instants = [datetime.fromisoformat(value) for value in rows["timestamp"]]
        coverage = data.truth.coverage_many(
            "site-a", instants, rows["lower"].to_numpy(), rows["upper"].to_numpy()
        )
        return float(coverage.mean())

    baseline = result.reports[CQR].mean_winkler()
    baseline_picp = true_picp(CQR)
    for method in (CACP_KERNEL, CACP_KMEANS, CACP_KNN):
        assert result.reports[method].mean_winkler() <= baseline, method
        assert true_picp(method) >= baseline_picp - 0.01, method
