# SPDX-FileCopyrightText: 2026 CACP Developers
#
# SPDX-License-Identifier: MIT

"""
:py:mod:`~cacp.io`
====================================================

Dataset files: ingestion of hourly actuals and quantile forecasts, quantile crossing
repair, raw interval lookup and the writer for the same format.

The file is comma separated with a header row. Required columns are ``timestamp``
(ISO-8601 with offset), ``site_id`` and ``actual``; quantile columns are named
``q01`` to ``q99`` unless mapped explicitly. ``capacity`` normalizes actuals and
quantiles when present. ``latitude``/``longitude`` or ``sunrise``/``sunset`` give
the solar day.

"""

from __future__ import annotations

import logging
import math
import os
import re
from dataclasses import dataclass
from datetime import date, datetime, timedelta

import numpy as np
import pandas as pd

from ..core import PredictionInterval, TargetCoverage, TimeSeriesRecord
from ..features.solar import (
    SiteGeometry,
    fleet_solar_window,
    is_daylight,
    local_sunrise_sunset,
)
from .config import ChoiceField, ConfigBase, MappingField, StringField

try:
    from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union
except ImportError:
    pass

__version__ = "0.0.0+auto.0"
__repo__ = "https://github.com/cacp-developers/cacp.git"

logger = logging.getLogger(__name__)

LEVEL_TOLERANCE = 0.005
"""Largest distance between a requested quantile level and the declared one used."""

FLEET_SITE = "fleet"
"""Site id of an aggregated fleet series."""


def _quantile_columns(mapping: Mapping) -> Dict[float, str]:
    columns: Dict[float, str] = {}
    for level, column in mapping.items():
        level = float(level)
        if not 0.0 < level < 1.0:
            raise ValueError("quantile level {} out of range".format(level))
        if level in columns:
            raise ValueError("quantile level {} declared twice".format(level))
        columns[level] = str(column)
    return columns


class DatasetSchema(ConfigBase):
    """
    Column names of a dataset file.

    ``quantile_columns`` maps levels to column names explicitly; when empty, every
    column matching ``quantile_pattern`` is a quantile whose level is the captured
    percentage.
    """

    timestamp_column = StringField("timestamp")
    site_column = StringField("site_id")
    actual_column = StringField("actual")
    capacity_column = StringField("capacity", optional=True)
    """Normalizing column; actuals pass through unchanged when absent."""
    quantile_pattern = StringField(r"q(\d{2})")
    quantile_columns = MappingField({}, validator=_quantile_columns)
    latitude_column = StringField("latitude")
    longitude_column = StringField("longitude")
    sunrise_column = StringField("sunrise")
    sunset_column = StringField("sunset")
    daylight_rule = ChoiceField("solar", ("solar", "generation"))
    """``solar``: sunrise <= t <= sunset. ``generation``: actual > 0."""

    def resolve_quantiles(self, columns: Sequence[str]) -> Dict[float, str]:
        """Level to column name for a file with ``columns``, ascending by level."""
        if self.quantile_columns:
            resolved = dict(self.quantile_columns)
            missing = [name for name in resolved.values() if name not in columns]
            if missing:
                raise ValueError("missing quantile column(s): {}".format(", ".join(missing)))
        else:
            pattern = re.compile(self.quantile_pattern)
            resolved = {}
            for name in columns:
                match = pattern.fullmatch(name)
                if match:
                    level = int(match.group(1)) / 100
                    if not 0.0 < level < 1.0:
                        raise ValueError("quantile column {} out of range".format(name))
                    if level in resolved:
                        raise ValueError("quantile level {} declared twice".format(level))
                    resolved[level] = name
        if not resolved:
            raise ValueError("no quantile columns found")
        return dict(sorted(resolved.items()))


def level_column_name(level: float) -> str:
    """``q05`` for 0.05; levels must be whole percentages."""
    percent = level * 100
    if abs(percent - round(percent)) > 1e-9 or not 1 <= round(percent) <= 99:
        raise ValueError("level {} has no qNN column name".format(level))
    return "q{:02d}".format(int(round(percent)))


def repair_crossings(values: Sequence[float]) -> np.ndarray:
    """Monotone rearrangement: quantile values sorted in level order."""
    return np.sort(np.asarray(values, dtype=float))


def _parse_instant(value) -> Optional[datetime]:
    if not isinstance(value, str) or not value:
        return None
    try:
        instant = datetime.fromisoformat(value)
    except ValueError:
        return None
    if instant.tzinfo is None:
        return None
    return instant


class _SolarDays:
    """Sunrise/sunset per site and local date, computed on demand."""

    def __init__(self) -> None:
        self._cache: Dict[tuple, Optional[Tuple[datetime, datetime]]] = {}

    def get(self, geom: SiteGeometry, t: datetime) -> Optional[Tuple[datetime, datetime]]:
        key = (geom, t.date(), t.utcoffset())
        if key not in self._cache:
            try:
                self._cache[key] = local_sunrise_sunset(geom, t)
            except ValueError:
                self._cache[key] = None
        return self._cache[key]


def _optional_column(frame: pd.DataFrame, name: str) -> Optional[np.ndarray]:
    if name in frame.columns:
        return frame[name].to_numpy()
    return None


def ingest(
    path: Union[str, os.PathLike], schema: Optional[DatasetSchema] = None
) -> Dict[str, List[TimeSeriesRecord]]:
    """
    Read a dataset file into per-site series sorted by time.

    Rows with an unparseable timestamp, non-finite values or a non-positive
    capacity are skipped and counted in a warning.

    :param path: the CSV file
    :param DatasetSchema schema: column names, defaults if not given
    :raises ValueError: on a missing required column or a duplicate
        ``(site_id, timestamp)``
    """
    schema = schema or DatasetSchema()
    frame = pd.read_csv(
        path,
        dtype={
            schema.timestamp_column: str,
            schema.site_column: str,
            schema.sunrise_column: str,
            schema.sunset_column: str,
        },
        keep_default_na=False,
        na_values=[""],
        float_precision="round_trip",
        encoding="utf-8",
    )
    for column in (schema.timestamp_column, schema.site_column, schema.actual_column):
        if column not in frame.columns:
            raise ValueError("missing required column {!r}".format(column))
    levels_to_columns = schema.resolve_quantiles(list(frame.columns))
    levels = tuple(levels_to_columns)
    quantiles = frame[list(levels_to_columns.values())].apply(
        pd.to_numeric, errors="coerce"
    ).to_numpy(dtype=float)
    actuals = pd.to_numeric(frame[schema.actual_column], errors="coerce").to_numpy(dtype=float)
    capacity = None
    if schema.capacity_column and schema.capacity_column in frame.columns:
        capacity = pd.to_numeric(frame[schema.capacity_column], errors="coerce").to_numpy(
            dtype=float
        )
    latitudes = _optional_column(frame, schema.latitude_column)
    longitudes = _optional_column(frame, schema.longitude_column)
    sunrises = _optional_column(frame, schema.sunrise_column)
    sunsets = _optional_column(frame, schema.sunset_column)
    timestamps = frame[schema.timestamp_column].to_numpy()
    sites = frame[schema.site_column].to_numpy()

    solar_days = _SolarDays()
    series: Dict[str, List[TimeSeriesRecord]] = {}
    seen = set()
    skipped = 0
    for row in range(len(frame)):
        t = _parse_instant(timestamps[row])
        site_id = sites[row]
        actual = actuals[row]
        values = quantiles[row]
        scale = 1.0 if capacity is None else capacity[row]
        if (
            t is None
            or not isinstance(site_id, str)
            or not site_id
            or not math.isfinite(actual)
            or not np.all(np.isfinite(values))
            or not (math.isfinite(scale) and scale > 0.0)
        ):
            skipped += 1
            continue
        key = (site_id, t)
        if key in seen:
            raise ValueError("duplicate key ({}, {})".format(site_id, t.isoformat()))
        seen.add(key)
        actual = actual / scale
        values = repair_crossings(values / scale)

        sunrise = sunset = None
        if sunrises is not None and sunsets is not None:
            sunrise = _parse_instant(sunrises[row])
            sunset = _parse_instant(sunsets[row])
        if (sunrise is None or sunset is None) and latitudes is not None and longitudes is not None:
            try:
                geom = SiteGeometry(float(latitudes[row]), float(longitudes[row]), site_id)
            except (TypeError, ValueError):
                geom = None
            window = solar_days.get(geom, t) if geom is not None else None
            if window is not None:
                sunrise, sunset = window
        if schema.daylight_rule == "solar" and sunrise is not None and sunset is not None:
            daylight = is_daylight(t, sunrise, sunset)
        else:
            daylight = actual > 0.0

        series.setdefault(site_id, []).append(
            TimeSeriesRecord(
                t=t,
                actual=float(actual),
                raw_quantiles=dict(zip(levels, (float(v) for v in values))),
                site_id=site_id,
                is_daylight=bool(daylight),
                sunrise=sunrise,
                sunset=sunset,
            )
        )
    if skipped:
        logger.warning("skipped %d unparseable row(s) in %s", skipped, path)
    for records in series.values():
        records.sort(key=lambda record: record.t)
    logger.info(
        "ingested %d record(s) for %d site(s) from %s",
        sum(len(records) for records in series.values()),
        len(series),
        path,
    )
    return dict(sorted(series.items()))


def nearest_level(
    levels: Sequence[float], target: float, tolerance: float = LEVEL_TOLERANCE
) -> float:
    """
    The declared level closest to ``target``; the lower one on a tie.

    :raises ValueError: "missing quantile level" when none is within ``tolerance``
    """
    best = None
    for level in sorted(levels):
        if best is None or abs(level - target) < abs(best - target):
            best = level
    if best is None or abs(best - target) > tolerance + 1e-12:
        raise ValueError("missing quantile level {:.4f}".format(target))
    return best


def interval_from_quantiles(
    record: TimeSeriesRecord, alpha: float, tolerance: float = LEVEL_TOLERANCE
) -> PredictionInterval:
    """
    The forecaster's interval ``[q(alpha / 2), q(1 - alpha / 2)]``.

    Example::

        interval_from_quantiles(record, 0.2)  # [q10, q90]
    """
    target = TargetCoverage(alpha)
    levels = record.levels
    lower = record.raw_quantiles[nearest_level(levels, target.lower_level, tolerance)]
    upper = record.raw_quantiles[nearest_level(levels, target.upper_level, tolerance)]
    return PredictionInterval(lower, upper, alpha)


def raw_interval_arrays(
    records: Sequence[TimeSeriesRecord], alpha: float, tolerance: float = LEVEL_TOLERANCE
) -> Tuple[np.ndarray, np.ndarray]:
    """Lower and upper bounds of `interval_from_quantiles` for many records."""
    target = TargetCoverage(alpha)
    chosen: Dict[Tuple[float, ...], Tuple[float, float]] = {}
    lower = np.empty(len(records))
    upper = np.empty(len(records))
    for i, record in enumerate(records):
        levels = record.levels
        if levels not in chosen:
            chosen[levels] = (
                nearest_level(levels, target.lower_level, tolerance),
                nearest_level(levels, target.upper_level, tolerance),
            )
        low_level, high_level = chosen[levels]
        lower[i] = record.raw_quantiles[low_level]
        upper[i] = record.raw_quantiles[high_level]
    return lower, upper


def write_dataset(
    path: Union[str, os.PathLike],
    series: Mapping[str, Sequence[TimeSeriesRecord]],
    geometries: Optional[Mapping[str, SiteGeometry]] = None,
    *,
    capacity: float = 1.0,
) -> None:
    """
    Write records in the format `ingest` reads back unchanged.

    Values are written in per-unit with the given ``capacity`` column, so
    ``capacity=1.0`` round-trips exactly.
    """
    rows = []
    levels: Optional[Tuple[float, ...]] = None
    for site_id in sorted(series):
        geom = (geometries or {}).get(site_id)
        for record in series[site_id]:
            if levels is None:
                levels = record.levels
            elif record.levels != levels:
                raise ValueError("every record must declare the same quantile levels")
            row = {
                "timestamp": record.t.isoformat(),
                "site_id": site_id,
                "actual": record.actual * capacity,
                "capacity": capacity,
            }
            for level in levels:
                row[level_column_name(level)] = record.raw_quantiles[level] * capacity
            if geom is not None:
                row["latitude"] = geom.latitude
                row["longitude"] = geom.longitude
            row["sunrise"] = record.sunrise.isoformat() if record.sunrise else ""
            row["sunset"] = record.sunset.isoformat() if record.sunset else ""
            rows.append(row)
    pd.DataFrame(rows).to_csv(path, index=False, encoding="utf-8")
    logger.info("wrote %d record(s) to %s", len(rows), path)


@dataclass(frozen=True)
class SiteMetadata:
    """Location and nameplate capacity of one site."""

    geometry: Optional[SiteGeometry] = None
    capacity: float = 1.0


def read_site_metadata(
    path: Union[str, os.PathLike], schema: Optional[DatasetSchema] = None
) -> Dict[str, SiteMetadata]:
    """
    Location and capacity of every site in a dataset file.

    A site's location is its first row with a valid latitude and longitude. Its
    capacity is the median of its positive capacities, or 1 without a capacity
    column.
    """
    schema = schema or DatasetSchema()
    frame = pd.read_csv(
        path,
        dtype={schema.site_column: str},
        float_precision="round_trip",
        encoding="utf-8",
    )
    if schema.site_column not in frame.columns:
        raise ValueError("missing required column {!r}".format(schema.site_column))
    located = schema.latitude_column in frame.columns and schema.longitude_column in frame.columns
    sized = bool(schema.capacity_column) and schema.capacity_column in frame.columns
    result: Dict[str, SiteMetadata] = {}
    for site_id, rows in frame.groupby(schema.site_column, sort=True):
        geometry = None
        if located:
            coordinates = (
                rows[[schema.latitude_column, schema.longitude_column]]
                .apply(pd.to_numeric, errors="coerce")
                .dropna()
            )
            for latitude, longitude in coordinates.itertuples(index=False):
                try:
                    geometry = SiteGeometry(float(latitude), float(longitude), str(site_id))
                except ValueError:
                    continue
                break
        capacity = 1.0
        if sized:
            values = pd.to_numeric(rows[schema.capacity_column], errors="coerce").to_numpy(
                dtype=float
            )
            values = values[np.isfinite(values) & (values > 0.0)]
            if values.size:
                capacity = float(np.median(values))
        result[str(site_id)] = SiteMetadata(geometry, capacity)
    return result


def _local_fleet_window(
    geometries: Sequence[SiteGeometry], day: date, t: datetime
) -> Optional[Tuple[datetime, datetime]]:
    try:
        sunrise, sunset = fleet_solar_window(geometries, day, t.tzinfo)
    except ValueError:
        return None
    if sunrise.date() != day:
        shift = timedelta(days=(day - sunrise.date()).days)
        sunrise, sunset = sunrise + shift, sunset + shift
    return sunrise, sunset


def aggregate_fleet(
    series: Mapping[str, Sequence[TimeSeriesRecord]],
    sites: Optional[Mapping[str, SiteMetadata]] = None,
    *,
    site_id: str = FLEET_SITE,
) -> List[TimeSeriesRecord]:
    """
    Capacity-weighted fleet series of per-unit site series.

    Actuals and every shared quantile level are averaged with capacity weights
    over the instants all sites report, so the result is again per unit of fleet
    capacity. Instants take the offset of the first site by id.

    The fleet's solar day runs from the earliest sunrise to the latest sunset:
    from `fleet_solar_window` when every site has a location, else from the sun
    times the records carry. Without either, an instant is daylight when the fleet
    generates.

    :param series: per-unit records per site
    :param sites: capacity and location per site; missing sites weigh 1
    :param str site_id: id of the fleet records
    :raises ValueError: when there is nothing to aggregate
    """
    if not series:
        raise ValueError("no sites to aggregate")
    sites = sites or {}
    site_ids = sorted(series)
    lookups = [{record.t: record for record in series[name]} for name in site_ids]
    common = sorted(set(lookups[0]).intersection(*lookups[1:]))
    if not common:
        raise ValueError("no instant common to every site")
    level_sets = [set(records[0].raw_quantiles) for records in series.values() if records]
    levels = sorted(set.intersection(*level_sets))
    if not levels:
        raise ValueError("sites share no quantile level")
    capacity = np.asarray(
        [sites[name].capacity if name in sites else 1.0 for name in site_ids], dtype=float
    )
    share = capacity / capacity.sum()
    geometries = [sites[name].geometry if name in sites else None for name in site_ids]
    located = all(geometry is not None for geometry in geometries)

    windows: Dict[date, Optional[Tuple[datetime, datetime]]] = {}
    records = []
    for t in common:
        members = [lookup[t] for lookup in lookups]
        actual = float(share @ np.asarray([member.actual for member in members]))
        values = share @ np.asarray(
            [[member.raw_quantiles[level] for level in levels] for member in members]
        )
        if located:
            day = t.date()
            if day not in windows:
                windows[day] = _local_fleet_window(geometries, day, t)
            window = windows[day]
        else:
            sunrises = [member.sunrise for member in members if member.sunrise is not None]
            sunsets = [member.sunset for member in members if member.sunset is not None]
            window = (min(sunrises), max(sunsets)) if sunrises and sunsets else None
        sunrise, sunset = window if window is not None else (None, None)
        daylight = is_daylight(t, sunrise, sunset) if window is not None else actual > 0.0
        records.append(
            TimeSeriesRecord(
                t=t,
                actual=actual,
                raw_quantiles=dict(zip(levels, (float(v) for v in repair_crossings(values)))),
                site_id=site_id,
                is_daylight=bool(daylight),
                sunrise=sunrise,
                sunset=sunset,
            )
        )
    dropped = max(len(lookup) for lookup in lookups) - len(common)
    if dropped:
        logger.warning("%d instant(s) missing at some site left out of the fleet", dropped)
    logger.info("aggregated %d site(s) into %d fleet record(s)", len(site_ids), len(records))
    return records


__all__ = [
    "DatasetSchema",
    "FLEET_SITE",
    "LEVEL_TOLERANCE",
    "SiteMetadata",
    "aggregate_fleet",
    "ingest",
    "interval_from_quantiles",
    "level_column_name",
    "nearest_level",
    "raw_interval_arrays",
    "read_site_metadata",
    "repair_crossings",
    "write_dataset",
]
