"""Cluster validity scoring and the model-selection rule with forced-k override."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .clustering import ClusterModel
from .errors import ConfigError, DataError
from .frame import ObservationFrame


@dataclass(frozen=True)
class QualityReport:
    silhouette: float
    davies_bouldin: float
    n_clusters_scored: int
    n_points_scored: int
    noise_excluded: int

    def to_dict(self) -> dict:
        return {
            "silhouette": self.silhouette,
            "davies_bouldin": self.davies_bouldin,
            "n_clusters_scored": self.n_clusters_scored,
            "n_points_scored": self.n_points_scored,
            "noise_excluded": self.noise_excluded,
        }


@dataclass
class CandidateRun:
    descriptor: str
    model: ClusterModel | None
    report: QualityReport
    forced: bool = False


def _scored_points(frame: ObservationFrame, labels) -> tuple[np.ndarray, np.ndarray, int]:
    """Drop noise-labeled points; error when nothing scoreable remains."""
    if frame.missing_mask.any():
        raise DataError("validity scores require a frame without missing values")
    labels = np.asarray(labels, dtype=int)
    if labels.shape[0] != frame.n_entities:
        raise ConfigError("labels length does not match frame entities")
    keep = labels >= 0
    noise = int((~keep).sum())
    x, l = frame.values[keep], labels[keep]
    if x.shape[0] == 0:
        raise DataError("all points are noise; nothing to score")
    if np.unique(l).size < 2:
        raise DataError("validity scores are undefined for a single cluster")
    if x.shape[0] < 2:
        raise DataError("validity scores need at least two points")
    return x, l, noise


def silhouette(frame: ObservationFrame, labels) -> float:
    """Mean of (b - a) / max(a, b); singleton clusters contribute 0.

    a is the mean intra-cluster distance, b the lowest mean distance to
    another cluster. Points labeled -1 are excluded before scoring.
    """
    x, l, _ = _scored_points(frame, labels)
    n = x.shape[0]
    uniq = np.unique(l)
    dist = np.sqrt(np.maximum(
        ((x[:, None, :] - x[None, :, :]) ** 2).sum(axis=2), 0.0))
    sums = np.empty((n, uniq.size))
    counts = np.empty(uniq.size)
    for ci, cl in enumerate(uniq):
        mask = l == cl
        sums[:, ci] = dist[:, mask].sum(axis=1)
        counts[ci] = mask.sum()
    own = np.searchsorted(uniq, l)
    rows = np.arange(n)
    own_count = counts[own]
    a = np.divide(sums[rows, own], np.maximum(own_count - 1, 1))
    means_to = sums / counts[None, :]
    means_to[rows, own] = np.inf
    b = means_to.min(axis=1)
    denom = np.maximum(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s = np.where(own_count == 1, 0.0, s)
    return float(s.mean())


def davies_bouldin(frame: ObservationFrame, labels) -> float:
    """Mean over clusters of the worst (scatter_i + scatter_j) / separation."""
    x, l, _ = _scored_points(frame, labels)
    uniq = np.unique(l)
    c = uniq.size
    centroids = np.vstack([x[l == cl].mean(axis=0) for cl in uniq])
    scatter = np.array([
        np.sqrt(((x[l == cl] - centroids[ci]) ** 2).sum(axis=1)).mean()
        for ci, cl in enumerate(uniq)
    ])
    sep = np.sqrt(np.maximum(
        ((centroids[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2), 0.0))
    off = ~np.eye(c, dtype=bool)
    if (sep[off] == 0.0).any():
        raise DataError("degenerate separation: two clusters share a centroid")
    ratio = (scatter[:, None] + scatter[None, :]) / np.where(off, sep, np.inf)
    return float(ratio.max(axis=1).mean())


def score_report(frame: ObservationFrame, labels) -> QualityReport:
    """Both validity indices plus the counts behind them."""
    x, l, noise = _scored_points(frame, labels)
    return QualityReport(
        silhouette=silhouette(frame, labels),
        davies_bouldin=davies_bouldin(frame, labels),
        n_clusters_scored=int(np.unique(l).size),
        n_points_scored=int(x.shape[0]),
        noise_excluded=noise,
    )


def select_model(candidates: list[CandidateRun],
                 forced_k: int | None = None) -> CandidateRun:
    """Highest silhouette wins; ties fall to lower Davies-Bouldin, then fewer
    clusters, then lexicographic descriptor. forced_k restricts to candidates
    with that many scored clusters before ranking.
    """
    if not candidates:
        raise ConfigError("select_model needs at least one candidate")
    seen = set()
    for c in candidates:
        if c.descriptor in seen:
            raise ConfigError(f"duplicate candidate descriptor {c.descriptor!r}")
        seen.add(c.descriptor)
    pool = candidates
    if forced_k is not None:
        pool = [c for c in candidates if c.report.n_clusters_scored == forced_k]
        if not pool:
            raise DataError(f"no candidate has {forced_k} clusters")
    best = min(pool, key=lambda c: (
        -c.report.silhouette,
        c.report.davies_bouldin,
        c.report.n_clusters_scored,
        c.descriptor,
    ))
    return replace(best, forced=forced_k is not None)
