"""K-means (primary), DBSCAN and agglomerative baselines, elbow-based k suggestion."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigError, DataError
from .frame import ObservationFrame

ALGORITHMS = ("kmeans", "dbscan", "agglomerative")
LINKAGES = ("ward", "average", "complete")


@dataclass
class ClusterParams:
    algorithm: str = "kmeans"
    k: int = 3
    eps: float = 1.0
    min_samples: int = 2
    linkage: str = "ward"
    seed: int = 0
    max_iter: int = 300
    tol: float = 1e-6
    restarts: int = 10

    def validate(self) -> "ClusterParams":
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if self.k < 1:
            raise ConfigError("k must be >= 1")
        if self.eps <= 0:
            raise ConfigError("eps must be > 0")
        if self.min_samples < 1:
            raise ConfigError("min_samples must be >= 1")
        if self.linkage not in LINKAGES:
            raise ConfigError(f"unknown linkage {self.linkage!r}")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be >= 1")
        if self.tol < 0:
            raise ConfigError("tol must be >= 0")
        if self.restarts < 1:
            raise ConfigError("restarts must be >= 1")
        return self


@dataclass
class ClusterModel:
    params: ClusterParams
    entity_ids: list[str]
    labels: np.ndarray           # per-entity; -1 marks dbscan noise
    centroids: np.ndarray        # (n_clusters, n_features)
    wcss: float
    iterations_run: int
    wcss_curve: list[float] = field(default_factory=list)

    @property
    def n_clusters(self) -> int:
        return int((np.unique(self.labels) >= 0).sum())

    def members(self, cluster: int) -> list[str]:
        return [e for e, l in zip(self.entity_ids, self.labels) if l == cluster]

    def to_dict(self) -> dict:
        return {
            "params": asdict(self.params),
            "labels": {e: int(l) for e, l in zip(self.entity_ids, self.labels)},
            "entity_ids": list(self.entity_ids),
            "centroids": self.centroids.tolist(),
            "wcss": self.wcss,
            "iterations_run": self.iterations_run,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, payload: dict) -> "ClusterModel":
        entity_ids = list(payload["entity_ids"])
        labels = np.array([payload["labels"][e] for e in entity_ids], dtype=int)
        return cls(
            params=ClusterParams(**payload["params"]),
            entity_ids=entity_ids,
            labels=labels,
            centroids=np.array(payload["centroids"], dtype=float),
            wcss=float(payload["wcss"]),
            iterations_run=int(payload["iterations_run"]),
        )


def _points(frame: ObservationFrame) -> np.ndarray:
    if frame.missing_mask.any():
        raise DataError("clustering requires a frame without missing values")
    x = frame.values
    if not np.isfinite(x).all():
        raise DataError("clustering requires finite values")
    if x.shape[0] == 0:
        raise DataError("clustering requires at least one entity")
    return x


def _sq_dists(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _means(x: np.ndarray, labels: np.ndarray, k: int) -> np.ndarray:
    sums = np.zeros((k, x.shape[1]))
    np.add.at(sums, labels, x)
    counts = np.bincount(labels, minlength=k).astype(float)
    return sums / counts[:, None]


def _kmeanspp(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[int(rng.integers(n))]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            idx = int(rng.integers(n))
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers[i] = x[idx]
        d2 = np.minimum(d2, ((x - x[idx]) ** 2).sum(axis=1))
    return centers


def _repair_empty(x, centroids, d2, labels, k):
    """Reseed each empty cluster to the point farthest from its own centroid."""
    taken: set[int] = set()
    for _ in range(len(labels) + 1):
        counts = np.bincount(labels, minlength=k)
        empties = np.flatnonzero(counts == 0)
        if empties.size == 0:
            return centroids, d2, labels
        own = d2[np.arange(len(labels)), labels].copy()
        own[list(taken)] = -np.inf
        donor = int(np.argmax(own))
        if donor in taken:
            break
        taken.add(donor)
        centroids[empties[0]] = x[donor]
        d2 = _sq_dists(x, centroids)
        labels = d2.argmin(axis=1)
    raise DataError("could not repair an empty cluster; too few distinct points")


def _lloyd(x, k, rng, max_iter, tol):
    """One seeded k-means run; returns labels, centroids, wcss, curve, iterations."""
    centroids = _kmeanspp(x, k, rng)
    prev_labels = None
    curve: list[float] = []
    iterations = 0
    for iterations in range(1, max_iter + 1):
        d2 = _sq_dists(x, centroids)
        labels = d2.argmin(axis=1)
        centroids, d2, labels = _repair_empty(x, centroids, d2, labels, k)
        objective = float(d2[np.arange(len(labels)), labels].sum())
        # Lloyd objective never increases; violations indicate a bug
        assert not curve or objective <= curve[-1] * (1 + 1e-12) + 1e-9, (
            f"wcss increased: {curve[-1]} -> {objective}"
        )
        curve.append(objective)
        if prev_labels is not None and np.array_equal(labels, prev_labels):
            break
        prev_labels = labels
        new_centroids = _means(x, labels, k)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol:
            break
    wcss = float(((x - centroids[labels]) ** 2).sum())
    return labels, centroids, wcss, curve, iterations


def _canonicalize(labels: np.ndarray, centroids: np.ndarray):
    """Renumber clusters by ascending centroid L2 norm (stable on ties)."""
    norms = np.sqrt((centroids ** 2).sum(axis=1))
    order = np.argsort(norms, kind="stable")
    perm = np.empty(len(order), dtype=int)
    perm[order] = np.arange(len(order))
    relabeled = np.where(labels >= 0, perm[np.maximum(labels, 0)], -1)
    return relabeled, centroids[order]


def kmeans(frame: ObservationFrame, params: ClusterParams) -> ClusterModel:
    """k-means++ seeded Lloyd iterations, best of ``restarts`` by lowest wcss.

    Restart ``r`` uses seed ``params.seed + r``, so parallel and serial
    execution of the restart loop would agree. Labels are renumbered by
    ascending centroid norm.
    """
    params.validate()
    x = _points(frame)
    k = params.k
    distinct = np.unique(x, axis=0).shape[0]
    if k > distinct:
        raise DataError(f"k={k} exceeds the {distinct} distinct rows")
    best = None
    for r in range(params.restarts):
        rng = np.random.default_rng(params.seed + r)
        labels, centroids, wcss, curve, iterations = _lloyd(
            x, k, rng, params.max_iter, params.tol)
        if best is None or wcss < best[0]:
            best = (wcss, labels, centroids, curve, iterations)
    wcss, labels, centroids, curve, iterations = best
    labels, centroids = _canonicalize(labels, centroids)
    return ClusterModel(
        params=params,
        entity_ids=list(frame.entity_ids),
        labels=labels,
        centroids=centroids,
        wcss=wcss,
        iterations_run=iterations,
        wcss_curve=curve,
    )


def dbscan(frame: ObservationFrame, params: ClusterParams) -> ClusterModel:
    """Density-reachability clustering; unreachable points labeled -1.

    A point is core iff at least ``min_samples`` points (itself included)
    lie within ``eps``. Cluster ids follow first-core-point scan order.
    """
    params.validate()
    x = _points(frame)
    n = x.shape[0]
    d2 = _sq_dists(x, x)
    within = d2 <= params.eps ** 2
    neighbor_lists = [np.flatnonzero(within[i]) for i in range(n)]
    core = np.array([len(nb) >= params.min_samples for nb in neighbor_lists])
    labels = np.full(n, -1, dtype=int)
    cid = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cid
        queue = deque(neighbor_lists[i])
        while queue:
            j = queue.popleft()
            if labels[j] == -1:
                labels[j] = cid
                if core[j]:
                    queue.extend(neighbor_lists[j])
        cid += 1
    centroids = (
        np.vstack([x[labels == c].mean(axis=0) for c in range(cid)])
        if cid else np.empty((0, x.shape[1]))
    )
    member = labels >= 0
    wcss = float(((x[member] - centroids[labels[member]]) ** 2).sum()) if cid else 0.0
    return ClusterModel(
        params=params,
        entity_ids=list(frame.entity_ids),
        labels=labels,
        centroids=centroids,
        wcss=wcss,
        iterations_run=0,
    )


def _lance_williams(linkage, d_im, d_jm, d_ij, si, sj, sm):
    if linkage == "ward":
        return ((si + sm) * d_im + (sj + sm) * d_jm - sm * d_ij) / (si + sj + sm)
    if linkage == "average":
        return (si * d_im + sj * d_jm) / (si + sj)
    return max(d_im, d_jm)  # complete


def agglomerative(frame: ObservationFrame, params: ClusterParams) -> ClusterModel:
    """Bottom-up merging under the chosen linkage until k clusters remain.

    Ward works on squared Euclidean dissimilarities, average/complete on
    plain distances. Ties merge the pair with the lowest (i, j) indices,
    where a cluster's index is the smallest row index of its members.
    """
    params.validate()
    x = _points(frame)
    n, k = x.shape[0], params.k
    if k > n:
        raise DataError(f"k={k} exceeds the {n} rows")
    d2 = _sq_dists(x, x)
    diss = d2 if params.linkage == "ward" else np.sqrt(np.maximum(d2, 0.0))
    diss = diss.astype(float)
    np.fill_diagonal(diss, np.inf)
    sizes = np.ones(n)
    members: dict[int, list[int]] = {i: [i] for i in range(n)}
    heights: list[float] = []
    work = diss.copy()
    while len(members) > k:
        # row-major argmin picks the lowest (i, j) pair among equals
        flat = int(np.argmin(work))
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        d_ij = work[i, j]
        heights.append(float(d_ij))
        for m in list(members):
            if m == i or m == j:
                continue
            updated = _lance_williams(
                params.linkage, work[i, m], work[j, m], d_ij,
                sizes[i], sizes[j], sizes[m])
            work[i, m] = work[m, i] = updated
        sizes[i] += sizes[j]
        members[i].extend(members[j])
        del members[j]
        work[j, :] = np.inf
        work[:, j] = np.inf
    labels = np.empty(n, dtype=int)
    order = sorted(members)  # ascending cluster index = min member row
    for cluster_id, rep in enumerate(order):
        labels[members[rep]] = cluster_id
    centroids = np.vstack([x[labels == c].mean(axis=0) for c in range(len(order))])
    labels, centroids = _canonicalize(labels, centroids)
    wcss = float(((x - centroids[labels]) ** 2).sum())
    model = ClusterModel(
        params=params,
        entity_ids=list(frame.entity_ids),
        labels=labels,
        centroids=centroids,
        wcss=wcss,
        iterations_run=n - len(order),
    )
    model.merge_heights = heights  # type: ignore[attr-defined]
    return model


@dataclass
class ElbowResult:
    ks: list[int]
    wcss: list[float]
    suggested_k: int


def elbow(frame: ObservationFrame, k_range: tuple[int, int], seed: int,
          *, restarts: int = 10, max_iter: int = 300, tol: float = 1e-6) -> ElbowResult:
    """WCSS curve over an inclusive k range plus the max-distance-to-chord knee."""
    k_lo, k_hi = k_range
    if k_lo > k_hi:
        raise ConfigError(f"empty k range {k_range}")
    if k_lo < 1 or k_hi > frame.n_entities:
        raise ConfigError(f"k range {k_range} outside [1, {frame.n_entities}]")
    ks = list(range(k_lo, k_hi + 1))
    wcss = []
    for k in ks:
        model = kmeans(frame, ClusterParams(
            algorithm="kmeans", k=k, seed=seed, restarts=restarts,
            max_iter=max_iter, tol=tol))
        wcss.append(model.wcss)
    if len(ks) == 1:
        return ElbowResult(ks, wcss, ks[0])
    x1, y1 = float(ks[0]), wcss[0]
    x2, y2 = float(ks[-1]), wcss[-1]
    chord = np.hypot(x2 - x1, y2 - y1)
    dists = [
        abs((y2 - y1) * k - (x2 - x1) * w + x2 * y1 - y2 * x1) / chord if chord > 0 else 0.0
        for k, w in zip(ks, wcss)
    ]
    return ElbowResult(ks, wcss, ks[int(np.argmax(dists))])
