"""Entity-by-feature matrix, the currency passed between pipeline stages."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, ConfigError


@dataclass
class ObservationFrame:
    """Dense numeric matrix with named rows (entities) and columns (features).

    ``values`` holds NaN wherever ``missing_mask`` is True; masked cells are
    excluded from every downstream statistic.
    """

    entity_ids: list[str]
    feature_names: list[str]
    values: np.ndarray
    missing_mask: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ConfigError("frame values must be a 2-D matrix")
        n, d = self.values.shape
        if n != len(self.entity_ids) or d != len(self.feature_names):
            raise ConfigError(
                f"frame shape {self.values.shape} does not match "
                f"{len(self.entity_ids)} entities x {len(self.feature_names)} features"
            )
        if len(set(self.entity_ids)) != n:
            raise ConfigError("entity ids must be unique")
        if len(set(self.feature_names)) != d:
            raise ConfigError("feature names must be unique")
        if self.missing_mask is None:
            self.missing_mask = np.isnan(self.values)
        else:
            self.missing_mask = np.asarray(self.missing_mask, dtype=bool)
            if self.missing_mask.shape != self.values.shape:
                raise ConfigError("missing mask shape must match values")
            self.values = np.where(self.missing_mask, np.nan, self.values)

    @property
    def n_entities(self) -> int:
        return len(self.entity_ids)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def feature_index(self, name: str) -> int:
        try:
            return self.feature_names.index(name)
        except ValueError:
            raise ConfigError(f"unknown feature {name!r}") from None

    def entity_index(self, entity_id: str) -> int:
        try:
            return self.entity_ids.index(entity_id)
        except ValueError:
            raise DataError(f"unknown entity {entity_id!r}") from None

    def column(self, name: str) -> np.ndarray:
        """Column values with NaN at missing cells."""
        return self.values[:, self.feature_index(name)]

    def select_features(self, names: list[str]) -> "ObservationFrame":
        idx = [self.feature_index(n) for n in names]
        return ObservationFrame(
            list(self.entity_ids), list(names),
            self.values[:, idx], self.missing_mask[:, idx],
        )

    def select_entities(self, ids: list[str]) -> "ObservationFrame":
        idx = [self.entity_index(i) for i in ids]
        return ObservationFrame(
            list(ids), list(self.feature_names),
            self.values[idx, :], self.missing_mask[idx, :],
        )

    def complete_rows(self) -> "ObservationFrame":
        """Sub-frame of entities with no missing cells."""
        keep = ~self.missing_mask.any(axis=1)
        ids = [e for e, k in zip(self.entity_ids, keep) if k]
        return ObservationFrame(
            ids, list(self.feature_names),
            self.values[keep, :], self.missing_mask[keep, :],
        )

    def hstack(self, other: "ObservationFrame") -> "ObservationFrame":
        """Join columns of two frames over identical entity order."""
        if other.entity_ids != self.entity_ids:
            raise DataError("cannot join frames over different entities")
        return ObservationFrame(
            list(self.entity_ids),
            list(self.feature_names) + list(other.feature_names),
            np.hstack([self.values, other.values]),
            np.hstack([self.missing_mask, other.missing_mask]),
        )

    def to_dict(self) -> dict:
        return {
            "entity_ids": list(self.entity_ids),
            "feature_names": list(self.feature_names),
            "values": [
                [None if m else v for v, m in zip(row, mrow)]
                for row, mrow in zip(self.values.tolist(), self.missing_mask.tolist())
            ],
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "ObservationFrame":
        raw = payload["values"]
        values = np.array(
            [[np.nan if v is None else float(v) for v in row] for row in raw],
            dtype=float,
        ).reshape(len(payload["entity_ids"]), len(payload["feature_names"]))
        return cls(list(payload["entity_ids"]), list(payload["feature_names"]), values)


@dataclass
class DistributionSummary:
    feature: str
    n: int
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float
    iqr: float
    outliers: list[tuple[str, float]]


def summarize_distribution(frame: ObservationFrame, feature: str) -> DistributionSummary:
    """Five-number summary plus the IQR outlier list for one feature.

    Outliers fall outside [Q1 - 1.5*IQR, Q3 + 1.5*IQR]; they are reported,
    never removed. Quartiles use linear interpolation between closest ranks.
    """
    col = frame.column(feature)
    mask = frame.missing_mask[:, frame.feature_index(feature)]
    present = ~mask
    if not present.any():
        raise DataError(f"feature {feature!r} has no present values")
    vals = col[present]
    ids = [e for e, p in zip(frame.entity_ids, present) if p]
    q1, med, q3 = np.quantile(vals, [0.25, 0.5, 0.75], method="linear")
    iqr = q3 - q1
    lo, hi = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    outliers = [
        (eid, float(v)) for eid, v in zip(ids, vals) if v < lo or v > hi
    ]
    outliers.sort(key=lambda t: (t[1], t[0]))
    return DistributionSummary(
        feature=feature,
        n=int(present.sum()),
        minimum=float(vals.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        maximum=float(vals.max()),
        iqr=float(iqr),
        outliers=outliers,
    )
