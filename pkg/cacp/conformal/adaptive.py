# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`adaptive`
====================================================

AdaptiveCP: uniform-weight calibration whose quantile level follows an effective
miscoverage rate steered by observed coverage.

"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

from ..core import TargetCoverage
from . import CalibrationSet, adjust_interval, calibration_adjustment
from .weights import WeightVector

try:
    from typing import Tuple

    from ..core import PredictionInterval
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

ALPHA_EPSILON = 1e-4
"""``alpha_effective`` is kept within ``[ALPHA_EPSILON, 1 - ALPHA_EPSILON]``."""


@dataclass(frozen=True)
class AdaptiveState:
    """Target and effective miscoverage with the learning rate ``gamma_lr``."""

    alpha_target: float
    alpha_effective: float
    gamma_lr: float

    def __post_init__(self) -> None:
        TargetCoverage(self.alpha_target)
        if not self.gamma_lr > 0.0:
            raise ValueError("gamma_lr must be positive")

    @classmethod
    def start(cls, alpha: float, gamma_lr: float) -> "AdaptiveState":
        """Initial state, with ``alpha_effective`` at the target."""
        return cls(alpha, alpha, gamma_lr)

    @property
    def level(self) -> float:
        """Quantile level ``1 - alpha_effective`` used for the next interval."""
        return 1.0 - self.alpha_effective


def adaptive_step(state: AdaptiveState, covered: bool) -> AdaptiveState:
    """
    ``alpha_effective += gamma * (alpha_target - err)`` with ``err = 1`` on a miss.

    Example::

        state = adaptive_step(AdaptiveState.start(0.1, 1e-3), covered=True)
        state.alpha_effective  # 0.1001
    """
    err = 0.0 if covered else 1.0
    alpha = state.alpha_effective + state.gamma_lr * (state.alpha_target - err)
    alpha = min(max(alpha, ALPHA_EPSILON), 1.0 - ALPHA_EPSILON)
    return replace(state, alpha_effective=alpha)


class AdaptiveCalibrator:
    """
    Runs AdaptiveCP over a stream of raw intervals for one target ``alpha``.

    Call `calibrate` for an instant, then `update` once its actual is known. Scores
    are always those of the target ``alpha``; only the quantile level moves.

    :param float alpha: target miscoverage
    :param float gamma_lr: learning rate
    :param bool clip: clip calibrated intervals to [0, 1]
    """

    def __init__(self, alpha: float, gamma_lr: float, *, clip: bool = True) -> None:
        self.state = AdaptiveState.start(alpha, gamma_lr)
        self.clip = clip
        self.steps = 0
        self.misses = 0

    def adjustment(self, cal: CalibrationSet) -> float:
        """Score quantile at the current effective level."""
        return calibration_adjustment(
            cal,
            WeightVector.uniform(len(cal)),
            self.state.alpha_target,
            level=self.state.level,
        )

    def calibrate(
        self, raw: PredictionInterval, cal: CalibrationSet
    ) -> Tuple[PredictionInterval, float]:
        """Calibrated interval and the adjustment used."""
        adjustment = self.adjustment(cal)
        return adjust_interval(raw, adjustment, clip=self.clip), adjustment

    def update(self, covered: bool) -> AdaptiveState:
        """Feed back whether the last interval covered its actual."""
        self.state = adaptive_step(self.state, covered)
        self.steps += 1
        if not covered:
            self.misses += 1
        return self.state

    def set_learning_rate(self, gamma_lr: float) -> None:
        """Change ``gamma_lr``, keeping ``alpha_effective``."""
        self.state = replace(self.state, gamma_lr=gamma_lr)

    @property
    def empirical_coverage(self) -> float:
        """Fraction of updates that were covered."""
        if not self.steps:
            raise RuntimeError("no updates yet")
        return 1.0 - self.misses / self.steps
