"""Intensity labeling, RAG cross-dataset comparison, and temporal analytics."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .clustering import ClusterModel
from .dataset import DemographyRecord, SectorProfile, SentimentSnapshot
from .errors import ConfigError, DataError
from .frame import ObservationFrame

log = logging.getLogger("geocluster.compare")

GREEN, AMBER, RED = "Green", "Amber", "Red"


@dataclass(frozen=True)
class IntensityLabel:
    ordinal: int
    name: str
    color: str


def _names_for(count: int) -> list[str]:
    if count == 3:
        return ["Low", "Medium", "High"]
    if count == 2:
        return ["Low", "High"]
    return [f"L{i + 1}" for i in range(count)]


def _colors_for(count: int) -> list[str]:
    return [GREEN] + [AMBER] * (count - 2) + [RED]


def label_intensity(model: ClusterModel, frame: ObservationFrame,
                    intensity_feature: str) -> dict[str, IntensityLabel]:
    """Rank clusters by the mean of one feature over members; label by rank.

    The frame only has to cover the model's entities; it may be a different
    (for instance derived-index) frame than the one the model was fit on.
    Noise-labeled entities receive no label.
    """
    col = frame.feature_index(intensity_feature)
    cluster_ids = sorted({int(l) for l in model.labels if l >= 0})
    if len(cluster_ids) < 2:
        raise DataError("intensity labeling needs at least two clusters")
    row_of = {eid: i for i, eid in enumerate(frame.entity_ids)}
    means = []
    for cid in cluster_ids:
        values = []
        for eid in model.members(cid):
            if eid not in row_of:
                raise DataError(f"entity {eid!r} missing from the intensity frame")
            v = frame.values[row_of[eid], col]
            if not np.isnan(v):
                values.append(v)
        if not values:
            raise DataError(
                f"cluster {cid} has no present {intensity_feature!r} values")
        means.append(float(np.mean(values)))
    # ties resolve to the lower cluster id
    order = sorted(range(len(cluster_ids)), key=lambda i: (means[i], cluster_ids[i]))
    names = _names_for(len(cluster_ids))
    colors = _colors_for(len(cluster_ids))
    rank_of = {cluster_ids[ci]: rank for rank, ci in enumerate(order)}
    out: dict[str, IntensityLabel] = {}
    for eid, l in zip(model.entity_ids, model.labels):
        if l < 0:
            continue
        rank = rank_of[int(l)]
        out[eid] = IntensityLabel(ordinal=rank, name=names[rank], color=colors[rank])
    return out


@dataclass
class RagRow:
    area: str
    labels: dict[str, IntensityLabel]  # dimension -> label


@dataclass
class ComparisonTable:
    dimensions: list[str]
    rows: list[RagRow]
    gaps: dict[str, int]  # area -> ordinal(loans) - ordinal(deaths)

    def to_dict(self) -> dict:
        return {
            "dimensions": list(self.dimensions),
            "rows": [
                {
                    "area": r.area,
                    "labels": {
                        d: {"ordinal": l.ordinal, "name": l.name, "color": l.color}
                        for d, l in r.labels.items()
                    },
                    "gap": self.gaps.get(r.area),
                }
                for r in self.rows
            ],
        }


def rag_table(labelings: dict[str, dict[str, IntensityLabel]]) -> ComparisonTable:
    """Inner-join per-dimension labelings; gaps need loans and deaths present."""
    if not labelings:
        raise ConfigError("rag_table needs at least one labeled dimension")
    dimensions = list(labelings)
    common = set.intersection(*(set(m) for m in labelings.values()))
    if not common:
        raise DataError("no entity is labeled in every dimension")
    rows = [
        RagRow(area=a, labels={d: labelings[d][a] for d in dimensions})
        for a in sorted(common)
    ]
    gaps: dict[str, int] = {}
    if "loans" in labelings and "deaths" in labelings:
        for row in rows:
            gaps[row.area] = row.labels["loans"].ordinal - row.labels["deaths"].ordinal
    return ComparisonTable(dimensions=dimensions, rows=rows, gaps=gaps)


def detect_discrepancies(table: ComparisonTable, threshold: int = 2) -> list[tuple[str, int]]:
    """Areas whose |gap| reaches the threshold, worst first.

    Positive gaps mean loan demand exceeds historic failure intensity.
    """
    if threshold < 1:
        raise ConfigError("threshold must be >= 1")
    flagged = [(a, g) for a, g in table.gaps.items() if abs(g) >= threshold]
    flagged.sort(key=lambda t: (-abs(t[1]), t[0]))
    return flagged


@dataclass
class TimeSeries:
    key: str
    points: list[tuple[int, float]]  # strictly increasing time keys

    def __post_init__(self):
        times = [t for t, _ in self.points]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError(f"time keys must strictly increase: {times}")

    def values(self) -> list[float]:
        return [v for _, v in self.points]

    def to_dict(self) -> dict:
        return {"key": self.key, "points": [[t, v] for t, v in self.points]}


def net_growth_series(records: list[DemographyRecord], area: str) -> TimeSeries:
    """births - deaths per year for one area."""
    rows = sorted((r for r in records if r.area_code == area), key=lambda r: r.year)
    if not rows:
        raise DataError(f"no demography records for area {area!r}")
    return TimeSeries(key=area, points=[(r.year, float(r.births - r.deaths)) for r in rows])


def trough_years(series: TimeSeries, top_n: int) -> list[int]:
    """The top_n years with the lowest values, ascending by value then year."""
    if not series.points:
        raise DataError("empty series")
    if top_n > len(series.points):
        log.warning("top_n %d exceeds series length %d; truncating",
                    top_n, len(series.points))
        top_n = len(series.points)
    ranked = sorted(series.points, key=lambda p: (p[1], p[0]))
    return [t for t, _ in ranked[:top_n]]


@dataclass(frozen=True)
class Extrapolation:
    value: float
    clamped: bool
    slope: float
    intercept: float


def trend_slope(series: TimeSeries) -> float:
    """Ordinary-least-squares slope of value over time."""
    if len(series.points) < 2:
        raise DataError("trend needs at least two points")
    t = np.array([p[0] for p in series.points], dtype=float)
    v = np.array([p[1] for p in series.points], dtype=float)
    t_bar, v_bar = t.mean(), v.mean()
    denom = ((t - t_bar) ** 2).sum()
    if denom == 0:
        raise DataError("trend needs at least two distinct time keys")
    return float(((t - t_bar) * (v - v_bar)).sum() / denom)


def extrapolate_counterfactual(series: TimeSeries, target_year: int) -> Extrapolation:
    """OLS linear trend evaluated at target_year; negatives clamp to 0."""
    slope = trend_slope(series)
    t = np.array([p[0] for p in series.points], dtype=float)
    v = np.array([p[1] for p in series.points], dtype=float)
    intercept = float(v.mean() - slope * t.mean())
    predicted = slope * target_year + intercept
    if predicted < 0:
        return Extrapolation(0.0, True, slope, intercept)
    return Extrapolation(float(predicted), False, slope, intercept)


def sector_concentration(profiles: list[SectorProfile], area: str, year: int,
                         top_n: int) -> list[tuple[str, int]]:
    """Divisions of one (area, year) profile ranked by count, ties by name."""
    match = [p for p in profiles if p.area_code == area and p.year == year]
    if not match:
        raise DataError(f"no sector profile for ({area!r}, {year})")
    counts = match[0].sector_counts
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(name, int(count)) for name, count in ranked[:top_n]]


def sentiment_exposure(snapshots: list[SentimentSnapshot]) -> list[tuple[str, float]]:
    """Sectors ranked by their peak paused-trading fraction, worst first."""
    peaks: dict[str, float] = {}
    for snap in snapshots:
        prev = peaks.get(snap.sector)
        if prev is None or snap.pct_trading_paused > prev:
            peaks[snap.sector] = snap.pct_trading_paused
    return sorted(peaks.items(), key=lambda kv: (-kv[1], kv[0]))
