# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`tuning`
====================================================

Exhaustive search of method hyperparameters, feature masks and lag settings,
scored by the Winkler score on a validation split averaged over ``alpha``.

Candidates are visited in increasing complexity: parameter values ascending in
grid order, then masks with fewer families, then lower mask flags, then shorter
lags and windows. Only a strictly lower score replaces the current choice, so
exact ties go to the simpler candidate.

"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..conformal.adaptive import AdaptiveCalibrator
from ..features import FeatureMask
from ..metrics import covered_mask, winkler_arrays
from .site import (
    ADAPTIVE_CP,
    CONTEXT_METHODS,
    CalibrationOptions,
    FeatureView,
    SiteFrame,
    adjust_bounds,
    build_view,
    make_scheme,
    scheme_adjustments,
)

try:
    from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TuningResult:
    """The candidate with the lowest validation Winkler score."""

    method: str
    chosen_params: Mapping[str, Any]
    chosen_feature_mask: Optional[FeatureMask] = None
    lag_offset: Optional[int] = None
    lag_window: Optional[int] = None
    validation_ws: float = math.inf
    n_candidates: int = 0

    def as_dict(self) -> Dict[str, Any]:
        """Plain representation for reports."""
        return {
            "method": self.method,
            "chosen_params": dict(self.chosen_params),
            "chosen_feature_mask": (
                list(self.chosen_feature_mask.families) if self.chosen_feature_mask else None
            ),
            "lag_offset": self.lag_offset,
            "lag_window": self.lag_window,
            "validation_ws": None if math.isinf(self.validation_ws) else self.validation_ws,
            "n_candidates": self.n_candidates,
        }


def _sort_key(value: Any) -> Tuple[int, Any]:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, value)
    return (1, 0)


def param_candidates(grid: Mapping[str, Sequence[Any]]) -> List[Dict[str, Any]]:
    """
    Every assignment of ``grid``, simplest first.

    Numeric values are tried ascending; other values keep their grid order.
    Parameters are varied in sorted name order, the last name fastest.
    """
    names = sorted(grid)
    axes = []
    for name in names:
        values = list(grid[name])
        if not values:
            raise ValueError("empty tuning grid for {}".format(name))
        axes.append(sorted(values, key=_sort_key))
    return [dict(zip(names, combo)) for combo in itertools.product(*axes)]


@dataclass(frozen=True)
class FeatureChoice:
    """A feature mask with its lag setting; lags are None for masks without lags."""

    feature_mask: FeatureMask
    lag_offset: Optional[int] = None
    lag_window: Optional[int] = None


def feature_choices(
    families: Sequence[str],
    lag_offsets: Sequence[int],
    lag_windows: Sequence[int],
) -> List[FeatureChoice]:
    """Every mask over ``families`` and, for masks with lags, every lag setting."""
    masks = sorted(
        FeatureMask.all_masks(families), key=lambda mask: (len(mask), mask.flags)
    )
    choices = []
    for mask in masks:
        if mask.lags:
            for offset, window in itertools.product(sorted(lag_offsets), sorted(lag_windows)):
                choices.append(FeatureChoice(mask, offset, window))
        else:
            choices.append(FeatureChoice(mask))
    return choices


@dataclass
class TuningSplit:
    """
    Calibration rows a candidate is fitted on and the validation rows it is scored on.

    Feature views are built once per feature choice and shared between methods.
    """

    site: SiteFrame
    cal_rows: np.ndarray
    val_rows: np.ndarray
    _views: Dict[Tuple, Optional[FeatureView]] = field(default_factory=dict, repr=False)

    def view(self, choice: Optional[FeatureChoice] = None) -> Optional[FeatureView]:
        """Calibration set and validation covariates under ``choice``."""
        key = (
            (None,)
            if choice is None
            else (choice.feature_mask.flags, choice.lag_offset, choice.lag_window)
        )
        if key not in self._views:
            if choice is None:
                self._views[key] = build_view(self.site, self.cal_rows, self.val_rows)
            else:
                self._views[key] = build_view(
                    self.site,
                    self.cal_rows,
                    self.val_rows,
                    choice.feature_mask,
                    choice.lag_offset,
                    choice.lag_window,
                )
        return self._views[key]


def scheme_validation_score(
    site: SiteFrame,
    view: FeatureView,
    method: str,
    params: Mapping[str, Any],
    alphas: Sequence[float],
    options: CalibrationOptions,
    seed: int = 0,
) -> float:
    """Winkler score averaged over ``alphas`` on the target rows of ``view``."""
    rows = view.target_rows
    if rows.size == 0:
        return math.inf
    scheme = make_scheme(method, params, seed)
    try:
        adjustments = scheme_adjustments(scheme, view, alphas, options)
    except ValueError as error:
        logger.debug("candidate %s %s rejected: %s", method, dict(params), error)
        return math.inf
    scores = []
    for alpha in alphas:
        lower, upper = adjust_bounds(
            site.lower[alpha][rows], site.upper[alpha][rows], adjustments[alpha], options.clip
        )
        scores.append(winkler_arrays(lower, upper, site.actual[rows], alpha))
    return float(np.mean(scores))


def adaptive_validation_score(
    split: TuningSplit,
    gamma_lr: float,
    alphas: Sequence[float],
    options: CalibrationOptions,
) -> float:
    """
    Winkler score of AdaptiveCP replayed over the validation days.

    ``alpha_effective`` starts at the target, holds for a whole day and is updated
    after it in time order.
    """
    view = split.view()
    if view is None or split.val_rows.size == 0:
        return math.inf
    site = split.site
    rows = split.val_rows
    scores = []
    for alpha in alphas:
        calibrator = AdaptiveCalibrator(alpha, gamma_lr, clip=options.clip)
        lower = np.empty(rows.size)
        upper = np.empty(rows.size)
        for day in np.unique(site.days[rows]):
            in_day = np.flatnonzero(site.days[rows] == day)
            adjustment = calibrator.adjustment(view.cal)
            day_rows = rows[in_day]
            lower[in_day], upper[in_day] = adjust_bounds(
                site.lower[alpha][day_rows],
                site.upper[alpha][day_rows],
                np.full(day_rows.size, adjustment),
                options.clip,
            )
            covered = covered_mask(lower[in_day], upper[in_day], site.actual[day_rows])
            for hit in covered:
                calibrator.update(bool(hit))
        scores.append(winkler_arrays(lower, upper, site.actual[rows], alpha))
    return float(np.mean(scores))


def tune(
    method: str,
    split: TuningSplit,
    alpha_grid: Sequence[float],
    grid: Mapping[str, Sequence[Any]],
    choices: Sequence[FeatureChoice] = (),
    *,
    options: CalibrationOptions = CalibrationOptions(),
    seed: int = 0,
) -> TuningResult:
    """
    Exhaustive search for one method.

    :param str method: a tuned method id
    :param TuningSplit split: calibration and validation rows
    :param alpha_grid: miscoverage rates whose Winkler scores are averaged
    :param Mapping grid: parameter name to candidate values
    :param choices: feature choices, searched only by context-weighted methods
    :return: the chosen candidate; ``validation_ws`` is infinite when none could
        be scored, in which case the simplest candidate is returned
    :rtype: TuningResult
    """
    params_list = param_candidates(grid)
    context = method in CONTEXT_METHODS
    searched: Sequence[Optional[FeatureChoice]] = list(choices) if context else [None]
    if context and not searched:
        raise ValueError("{} needs at least one feature mask".format(method))
    best: Optional[Tuple[float, Dict[str, Any], Optional[FeatureChoice]]] = None
    count = 0
    for params in params_list:
        for choice in searched:
            count += 1
            if method == ADAPTIVE_CP:
                score = adaptive_validation_score(
                    split, float(params["gamma_lr"]), alpha_grid, options
                )
            else:
                view = split.view(choice)
                if view is None:
                    score = math.inf
                else:
                    score = scheme_validation_score(
                        split.site, view, method, params, alpha_grid, options, seed
                    )
            if best is None or score < best[0]:
                best = (score, params, choice)
    assert best is not None
    score, params, choice = best
    if math.isinf(score):
        logger.warning("no %s candidate could be scored on %s", method, split.site.site_id)
    result = TuningResult(
        method=method,
        chosen_params=params,
        chosen_feature_mask=choice.feature_mask if choice else None,
        lag_offset=choice.lag_offset if choice else None,
        lag_window=choice.lag_window if choice else None,
        validation_ws=score,
        n_candidates=count,
    )
    logger.info(
        "%s on %s: chose %s mask=%s lags=%s/%s validation WS %.5f over %d candidates",
        method,
        split.site.site_id,
        dict(params),
        result.chosen_feature_mask,
        result.lag_offset,
        result.lag_window,
        score,
        count,
    )
    return result


def split_for_day(
    site: SiteFrame,
    day: int,
    validation_window: int,
    max_calibration_size: Optional[int] = None,
) -> TuningSplit:
    """
    Validation on the ``validation_window`` local days before ``day``; calibration on
    the daylight rows before the validation days.
    """
    first_validation_day = day - validation_window
    return TuningSplit(
        site,
        site.daylight_before(first_validation_day, max_calibration_size),
        site.daylight_between(first_validation_day, day - 1),
    )
