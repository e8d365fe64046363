# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
`reports`
====================================================

Report files of a backtest and their readers.

``intervals.csv``
    one row per method, ``alpha`` and evaluated record
``summary.json``
    PICP, AIW and Winkler score per method and ``alpha``
``hourly_coverage.csv``
    PICP per method, ``alpha`` and local hour
``coverage_width.csv``
    PICP against AIW per method and ``alpha``
``hourly_adjustment.csv``
    mean adjustment and mean width change per method, ``alpha`` and local hour
``conformity_scores.csv``
    calibration scores of each site's last test day
``score_quantiles.csv``
    weighted quantiles of those scores per method, ``alpha`` and record
``tuning_history.json``
    every `TuningResult`, with its site and test day
``timings.csv``
    wall clock per site and test day

"""

from __future__ import annotations

import json
import logging
import math
import os
from collections import abc
from pathlib import Path

import numpy as np
import pandas as pd

from ..metrics import (
    coverage_width_points,
    evaluate_frame,
    hourly_adjustment_table,
    hourly_table,
)

try:
    from typing import Any, Dict, List, Mapping, Sequence, Union

    from ..backtest import BacktestResult
    from ..metrics import MetricsReport
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

INTERVALS_FILE = "intervals.csv"
SUMMARY_FILE = "summary.json"
HOURLY_FILE = "hourly_coverage.csv"
COVERAGE_WIDTH_FILE = "coverage_width.csv"
ADJUSTMENT_FILE = "hourly_adjustment.csv"
SCORES_FILE = "conformity_scores.csv"
SCORE_QUANTILES_FILE = "score_quantiles.csv"
TUNING_FILE = "tuning_history.json"
TIMINGS_FILE = "timings.csv"

TUNING_COLUMNS = (
    "site_id",
    "day",
    "method",
    "chosen_params",
    "chosen_feature_mask",
    "lag_offset",
    "lag_window",
    "validation_ws",
    "n_candidates",
)


def _plain(value: Any) -> Any:
    if isinstance(value, abc.Mapping):
        return {str(key): _plain(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(item) for item in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def to_json(document: Any) -> str:
    """JSON text of a report document; non-finite numbers become null."""
    return json.dumps(_plain(document), indent=2, sort_keys=True)


def _write_json(path: Path, document: Any) -> None:
    path.write_text(to_json(document) + "\n", encoding="utf-8")


def summarize(
    reports: Mapping[str, MetricsReport], n_evaluated: int, **extra: Any
) -> Dict[str, Any]:
    """
    The metrics summary document: one row per method and ``alpha``.

    Example::

        {"n_evaluated": 2160, "rows": [{"method": "cqr", "alpha": 0.1, "picp": ...}]}
    """
    rows: List[Dict[str, Any]] = []
    for method in sorted(reports):
        rows.extend(reports[method].rows(method))
    document = {"n_evaluated": int(n_evaluated), "rows": rows}
    document.update(extra)
    return document


def _n_evaluated(frame: pd.DataFrame) -> int:
    if frame.empty:
        return 0
    return int(frame[["site_id", "timestamp"]].drop_duplicates().shape[0])


def emit_reports(result: BacktestResult, out_dir: Union[str, os.PathLike]) -> Dict[str, Path]:
    """
    Write every report file of ``result`` into ``out_dir``, created if missing.

    :return: file role to written path
    :raises OSError: when ``out_dir`` is not writable
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "intervals": out / INTERVALS_FILE,
        "summary": out / SUMMARY_FILE,
        "hourly": out / HOURLY_FILE,
        "coverage_width": out / COVERAGE_WIDTH_FILE,
        "adjustment": out / ADJUSTMENT_FILE,
        "scores": out / SCORES_FILE,
        "score_quantiles": out / SCORE_QUANTILES_FILE,
        "tuning": out / TUNING_FILE,
        "timings": out / TIMINGS_FILE,
    }
    result.intervals.to_csv(paths["intervals"], index=False)
    _write_json(
        paths["summary"],
        summarize(
            result.reports,
            _n_evaluated(result.intervals),
            pooled=result.config.pooled_metrics,
            skipped=dict(result.skipped),
        ),
    )
    hourly_table(result.reports).to_csv(paths["hourly"], index=False)
    coverage_width_points(result.reports).to_csv(paths["coverage_width"], index=False)
    hourly_adjustment_table(result.intervals).to_csv(paths["adjustment"], index=False)
    result.scores.to_csv(paths["scores"], index=False)
    result.score_quantiles.to_csv(paths["score_quantiles"], index=False)
    _write_json(paths["tuning"], list(result.tuning_history))
    pd.DataFrame(
        [
            {
                "site_id": timing.site_id,
                "day": timing.day.isoformat(),
                "tuned": timing.tuned,
                "seconds": timing.seconds,
                "calibration_size": timing.calibration_size,
            }
            for timing in result.timings
        ],
        columns=["site_id", "day", "tuned", "seconds", "calibration_size"],
    ).to_csv(paths["timings"], index=False)
    logger.info("reports written to %s", out)
    return paths


def read_intervals(path: Union[str, os.PathLike]) -> pd.DataFrame:
    """Read an ``intervals.csv`` back with the dtypes it was written with."""
    frame = pd.read_csv(
        path,
        dtype={"site_id": str, "timestamp": str, "method": str},
        float_precision="round_trip",
    )
    if "covered" in frame:
        frame["covered"] = frame["covered"].astype(str).str.lower() == "true"
    return frame


def evaluate(frame: pd.DataFrame, *, pooled: bool = False) -> Dict[str, Any]:
    """Summary document of an interval frame."""
    return summarize(evaluate_frame(frame, pooled=pooled), _n_evaluated(frame))


def evaluate_path(path: Union[str, os.PathLike], *, pooled: bool = False) -> Dict[str, Any]:
    """
    Recompute the metrics summary from an interval file or a report directory.

    :param path: ``intervals.csv`` or the directory holding it
    """
    path = Path(path)
    if path.is_dir():
        path = path / INTERVALS_FILE
    if not path.exists():
        raise OSError("no interval file at {}".format(path))
    return evaluate(read_intervals(path), pooled=pooled)


def read_tuning_history(path: Union[str, os.PathLike]) -> List[Dict[str, Any]]:
    """Entries of a ``tuning_history.json``; a report directory is accepted."""
    path = Path(path)
    if path.is_dir():
        path = path / TUNING_FILE
    document = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(document, list):
        raise ValueError("tuning history must be a list")
    return document


def tuning_report(history: Sequence[Mapping[str, Any]]) -> pd.DataFrame:
    """
    One row per tuning event, ordered by site, day and method.

    Parameters are rendered as ``name=value`` pairs and masks as ``lags+solar``.
    """
    rows = []
    for entry in history:
        params = entry.get("chosen_params") or {}
        mask = entry.get("chosen_feature_mask")
        rows.append(
            {
                "site_id": entry.get("site_id"),
                "day": entry.get("day"),
                "method": entry.get("method"),
                "chosen_params": " ".join(
                    "{}={}".format(name, params[name]) for name in sorted(params)
                ),
                "chosen_feature_mask": "+".join(mask) if mask else "",
                "lag_offset": entry.get("lag_offset"),
                "lag_window": entry.get("lag_window"),
                "validation_ws": entry.get("validation_ws"),
                "n_candidates": entry.get("n_candidates"),
            }
        )
    frame = pd.DataFrame(rows, columns=list(TUNING_COLUMNS))
    return frame.sort_values(["site_id", "day", "method"], kind="mergesort").reset_index(
        drop=True
    )
