"""Principal component analysis via Jacobi eigendecomposition of the covariance."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .frame import ObservationFrame

JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def jacobi_eigh(matrix: np.ndarray, tol: float = JACOBI_TOL,
                max_sweeps: int = JACOBI_MAX_SWEEPS) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues/vectors of a symmetric matrix by cyclic Jacobi rotations.

    Deterministic fixed sweep order; returns eigenvalues descending with
    eigenvectors in matching columns.
    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ConfigError("jacobi_eigh needs a square matrix")
    v = np.eye(n)
    prev_fro = np.inf
    for _ in range(max_sweeps):
        off_diag = a - np.diag(np.diag(a))
        off = np.abs(off_diag).max() if n > 1 else 0.0
        # the Frobenius off-norm shrinks every sweep until the float noise
        # floor; the max entry alone is not monotone
        fro = float(np.sqrt((off_diag ** 2).sum()))
        if off <= tol or fro >= prev_fro:
            break
        prev_fro = fro
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                # rotations below float noise would only churn the matrix
                if abs(apq) <= 1e-30 + 1e-18 * (abs(a[p, p]) + abs(a[q, q])):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                rot_p = c * a[:, p] - s * a[:, q]
                rot_q = s * a[:, p] + c * a[:, q]
                a[:, p], a[:, q] = rot_p, rot_q
                a[p, :], a[q, :] = c * a[p, :] - s * a[q, :], s * a[p, :] + c * a[q, :]
                a[p, q] = a[q, p] = 0.0
                vp = c * v[:, p] - s * v[:, q]
                vq = s * v[:, p] + c * v[:, q]
                v[:, p], v[:, q] = vp, vq
    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


@dataclass
class Projection:
    """Fitted basis: standardization parameters plus principal directions."""

    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray  # (n_components, n_features), rows orthonormal
    eigenvalues: np.ndarray  # descending, >= 0
    explained_variance_ratio: np.ndarray
    feature_names: list[str]

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    def to_json(self) -> str:
        return json.dumps({
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "components": self.components.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "explained_variance_ratio": self.explained_variance_ratio.tolist(),
            "feature_names": self.feature_names,
        }, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Projection":
        payload = json.loads(text)
        return cls(
            mean=np.array(payload["mean"], dtype=float),
            scale=np.array(payload["scale"], dtype=float),
            components=np.array(payload["components"], dtype=float),
            eigenvalues=np.array(payload["eigenvalues"], dtype=float),
            explained_variance_ratio=np.array(
                payload["explained_variance_ratio"], dtype=float),
            feature_names=list(payload["feature_names"]),
        )


def _check_no_missing(frame: ObservationFrame, op: str) -> None:
    if frame.missing_mask.any():
        raise DataError(f"{op}: frame has missing values; resolve the mask first")


def fit_pca(frame: ObservationFrame, n_components: int,
            standardize: bool = True) -> Projection:
    """Top eigenvectors of the (standardized) sample covariance (divisor n-1).

    Sign convention: each component's largest-magnitude loading is positive.
    """
    _check_no_missing(frame, "fit_pca")
    x = frame.values
    n, d = x.shape
    limit = min(n - 1, d)
    if not 1 <= n_components <= limit:
        raise ConfigError(
            f"n_components {n_components} out of range [1, {limit}] "
            f"for a {n}x{d} frame"
        )
    mean = x.mean(axis=0)
    if standardize:
        scale = x.std(axis=0, ddof=1)
        flat = np.flatnonzero(scale == 0.0)
        if flat.size:
            names = [frame.feature_names[i] for i in flat]
            raise DataError(f"constant columns cannot be standardized: {names}")
    else:
        scale = np.ones(d)
    z = (x - mean) / scale
    cov = z.T @ z / (n - 1)
    eigenvalues, vectors = jacobi_eigh(cov)
    eigenvalues = np.maximum(eigenvalues, 0.0)
    total = eigenvalues.sum()
    ratios = eigenvalues / total if total > 0 else np.zeros_like(eigenvalues)
    components = vectors[:, :n_components].T.copy()
    for row in components:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1.0
    return Projection(
        mean=mean,
        scale=scale,
        components=components,
        eigenvalues=eigenvalues[:n_components],
        explained_variance_ratio=ratios[:n_components],
        feature_names=list(frame.feature_names),
    )


def transform(projection: Projection, frame: ObservationFrame) -> ObservationFrame:
    """Project entities onto the fitted basis; features become PC1..PCk."""
    _check_no_missing(frame, "transform")
    fitted = set(projection.feature_names)
    given = set(frame.feature_names)
    if fitted != given:
        diff = sorted(fitted.symmetric_difference(given))
        raise DataError(f"feature mismatch with fitted projection: {diff}")
    aligned = frame.select_features(projection.feature_names)
    z = (aligned.values - projection.mean) / projection.scale
    out = z @ projection.components.T
    names = [f"PC{i + 1}" for i in range(projection.n_components)]
    return ObservationFrame(list(frame.entity_ids), names, out)


def inverse_transform(projection: Projection, frame: ObservationFrame) -> ObservationFrame:
    """Map projected coordinates back to the original feature space."""
    _check_no_missing(frame, "inverse_transform")
    x = frame.values @ projection.components * projection.scale + projection.mean
    return ObservationFrame(list(frame.entity_ids), list(projection.feature_names), x)
