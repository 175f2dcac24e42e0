import math

import numpy as np
import pytest

from geocluster import (
    ObservationFrame, QualityReport, CandidateRun,
    silhouette, davies_bouldin, score_report, select_model,
    ConfigError, DataError,
)


def frame_of(values):
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values.reshape(-1, 1)
    return ObservationFrame(
        [f"e{i}" for i in range(values.shape[0])],
        [f"f{j}" for j in range(values.shape[1])],
        values,
    )


# ---------------------------------------------------------------------------
# oracles: plain-python recomputation, no shared code with the engine

def silhouette_oracle(x, labels):
    pts = [tuple(p) for p in np.asarray(x, dtype=float)]
    labels = list(labels)
    scored = [(p, l) for p, l in zip(pts, labels) if l >= 0]
    clusters = sorted({l for _, l in scored})

    def dist(a, b):
        return math.sqrt(sum((u - v) ** 2 for u, v in zip(a, b)))

    total = 0.0
    for p, l in scored:
        own = [q for q, m in scored if m == l and q is not p]
        own_all = [q for q, m in scored if m == l]
        if len(own_all) == 1:
            continue  # contributes 0
        a = sum(dist(p, q) for q, m in scored if m == l) / (len(own_all) - 1)
        b = min(
            sum(dist(p, q) for q, m in scored if m == other) /
            sum(1 for _, m in scored if m == other)
            for other in clusters if other != l
        )
        if max(a, b) > 0:
            total += (b - a) / max(a, b)
    return total / len(scored)


def davies_bouldin_oracle(x, labels):
    x = np.asarray(x, dtype=float)
    labels = np.asarray(labels)
    clusters = sorted({l for l in labels if l >= 0})
    cents, scats = [], []
    for c in clusters:
        pts = x[labels == c]
        cent = [sum(col) / len(pts) for col in pts.T]
        cents.append(cent)
        scats.append(sum(
            math.sqrt(sum((p[j] - cent[j]) ** 2 for j in range(x.shape[1])))
            for p in pts) / len(pts))
    total = 0.0
    for i in range(len(clusters)):
        worst = 0.0
        for j in range(len(clusters)):
            if i == j:
                continue
            m = math.sqrt(sum((cents[i][d] - cents[j][d]) ** 2 for d in range(x.shape[1])))
            worst = max(worst, (scats[i] + scats[j]) / m)
        total += worst
    return total / len(clusters)


# ---------------------------------------------------------------------------
# silhouette

def test_silhouette_perfect_duplicated_clusters():
    x = np.array([[0.0, 0.0], [0.0, 0.0], [9.0, 9.0], [9.0, 9.0]])
    assert silhouette(frame_of(x), [0, 0, 1, 1]) == 1.0


def test_silhouette_matches_oracle_on_two_blobs():
    x = np.array([0.0, 1.0, 2.0, 10.0, 11.0, 12.0])
    labels = [0, 0, 0, 1, 1, 1]
    got = silhouette(frame_of(x), labels)
    assert got == pytest.approx(silhouette_oracle(x.reshape(-1, 1), labels), abs=1e-12)


def test_silhouette_all_singletons_is_zero():
    x = np.arange(5, dtype=float)
    assert silhouette(frame_of(x), [0, 1, 2, 3, 4]) == 0.0


def test_silhouette_single_cluster_rejected():
    with pytest.raises(DataError):
        silhouette(frame_of(np.arange(4, dtype=float)), [0, 0, 0, 0])


def test_silhouette_all_noise_rejected():
    with pytest.raises(DataError):
        silhouette(frame_of(np.arange(3, dtype=float)), [-1, -1, -1])


def test_silhouette_excludes_noise():
    x = np.array([0.0, 1.0, 10.0, 11.0, 500.0])
    with_noise = silhouette(frame_of(x), [0, 0, 1, 1, -1])
    without = silhouette(frame_of(x[:4]), [0, 0, 1, 1])
    assert with_noise == pytest.approx(without, abs=1e-12)


# ---------------------------------------------------------------------------
# davies-bouldin

def test_db_zero_scatter_far_apart():
    x = np.array([[0.0], [0.0], [9.0], [9.0]])
    assert davies_bouldin(frame_of(x), [0, 0, 1, 1]) == 0.0


def test_db_hand_formula_two_clusters():
    x = np.array([0.0, 2.0, 10.0, 12.0])
    assert davies_bouldin(frame_of(x), [0, 0, 1, 1]) == pytest.approx(0.2, abs=1e-12)


def test_db_matches_oracle_on_random_blobs():
    rng = np.random.default_rng(21)
    x = np.vstack([rng.normal(size=(10, 2)) + c for c in ([0, 0], [8, 0], [0, 8])])
    labels = [0] * 10 + [1] * 10 + [2] * 10
    got = davies_bouldin(frame_of(x), labels)
    assert got == pytest.approx(davies_bouldin_oracle(x, labels), abs=1e-12)


def test_db_coincident_centroids_rejected():
    x = np.array([[-1.0], [1.0], [-2.0], [2.0]])
    with pytest.raises(DataError):
        davies_bouldin(frame_of(x), [0, 0, 1, 1])


# ---------------------------------------------------------------------------
# shared invariances

@pytest.fixture
def random_clustering():
    rng = np.random.default_rng(22)
    x = np.vstack([rng.normal(size=(8, 3)) + c for c in ([0, 0, 0], [6, 0, 0], [0, 6, 0])])
    labels = np.array([0] * 8 + [1] * 8 + [2] * 8)
    return x, labels


def test_scores_invariant_under_label_permutation(random_clustering):
    x, labels = random_clustering
    swapped = np.array([{0: 2, 1: 0, 2: 1}[l] for l in labels])
    f = frame_of(x)
    assert silhouette(f, labels) == pytest.approx(silhouette(f, swapped), abs=1e-12)
    assert davies_bouldin(f, labels) == pytest.approx(davies_bouldin(f, swapped), abs=1e-12)


def test_scores_invariant_under_row_permutation(random_clustering):
    x, labels = random_clustering
    rng = np.random.default_rng(23)
    perm = rng.permutation(len(x))
    assert silhouette(frame_of(x[perm]), labels[perm]) == \
        pytest.approx(silhouette(frame_of(x), labels), abs=1e-12)
    assert davies_bouldin(frame_of(x[perm]), labels[perm]) == \
        pytest.approx(davies_bouldin(frame_of(x), labels), abs=1e-12)


def test_scores_invariant_under_rigid_motion(random_clustering):
    x, labels = random_clustering
    theta = 0.7
    rot = np.array([
        [np.cos(theta), -np.sin(theta), 0],
        [np.sin(theta), np.cos(theta), 0],
        [0, 0, 1.0],
    ])
    moved = x @ rot.T + np.array([5.0, -3.0, 2.0])
    assert silhouette(frame_of(moved), labels) == \
        pytest.approx(silhouette(frame_of(x), labels), abs=1e-9)
    assert davies_bouldin(frame_of(moved), labels) == \
        pytest.approx(davies_bouldin(frame_of(x), labels), abs=1e-9)


def test_silhouette_invariant_under_uniform_scaling(random_clustering):
    x, labels = random_clustering
    assert silhouette(frame_of(x * 37.0), labels) == \
        pytest.approx(silhouette(frame_of(x), labels), abs=1e-9)


def test_small_random_instances_match_oracles():
    rng = np.random.default_rng(24)
    for trial in range(20):
        n = int(rng.integers(4, 13))
        d = int(rng.integers(1, 4))
        c = int(rng.integers(2, 5))
        x = rng.normal(size=(n, d)) * 3
        labels = rng.integers(0, c, size=n)
        while len(set(labels.tolist())) < 2:
            labels = rng.integers(0, c, size=n)
        f = frame_of(x)
        assert silhouette(f, labels) == \
            pytest.approx(silhouette_oracle(x, labels), abs=1e-12)
        try:
            got_db = davies_bouldin(f, labels)
        except DataError:
            continue  # coincident centroids in a random draw
        assert got_db == pytest.approx(davies_bouldin_oracle(x, labels), abs=1e-12)


# ---------------------------------------------------------------------------
# score_report

def test_score_report_counts_noise():
    x = np.array([0.0, 1.0, 10.0, 11.0, 500.0])
    report = score_report(frame_of(x), [0, 0, 1, 1, -1])
    assert report.noise_excluded == 1
    assert report.n_points_scored == 4
    assert report.n_clusters_scored == 2
    assert -1 <= report.silhouette <= 1
    assert report.davies_bouldin >= 0


# ---------------------------------------------------------------------------
# selection rule

def grid(scores):
    """scores: descriptor -> (silhouette, db, k)"""
    return [
        CandidateRun(d, None, QualityReport(s, db, k, 100, 0))
        for d, (s, db, k) in scores.items()
    ]


def test_selection_business_demography_grid():
    candidates = grid({
        "PCA=2, k=2": (0.73, 0.60, 2),
        "PCA=2, k=3": (0.703, 0.62, 3),
        "PCA=2, k=4": (0.6, 0.70, 4),
        "PCA=3, k=3": (0.69, 0.65, 3),
    })
    assert select_model(candidates).descriptor == "PCA=2, k=2"
    forced = select_model(candidates, forced_k=3)
    assert forced.descriptor == "PCA=2, k=3"
    assert forced.forced


def test_selection_loan_grid_forced_three():
    candidates = grid({
        "k=2": (0.64, 0.57, 2),
        "k=3": (0.56, 0.56, 3),
        "k=4": (0.53, 0.54, 4),
        "k=5": (0.52, 0.53, 5),
    })
    assert select_model(candidates).descriptor == "k=2"
    assert select_model(candidates, forced_k=3).descriptor == "k=3"


def test_selection_tie_breaks():
    candidates = grid({
        "b": (0.7, 0.5, 3),
        "a": (0.7, 0.5, 3),
        "fewer": (0.7, 0.5, 2),
        "low-db": (0.7, 0.4, 4),
    })
    assert select_model(candidates).descriptor == "low-db"
    no_db = grid({"b": (0.7, 0.5, 3), "a": (0.7, 0.5, 3), "fewer": (0.7, 0.5, 2)})
    assert select_model(no_db).descriptor == "fewer"
    lex = grid({"b": (0.7, 0.5, 3), "a": (0.7, 0.5, 3)})
    assert select_model(lex).descriptor == "a"


def test_selection_forced_k_without_match_rejected():
    with pytest.raises(DataError):
        select_model(grid({"k=2": (0.6, 0.5, 2)}), forced_k=4)


def test_selection_duplicate_descriptors_rejected():
    candidates = grid({"k=2": (0.6, 0.5, 2)}) * 2
    with pytest.raises(ConfigError):
        select_model(candidates)


def test_selection_empty_rejected():
    with pytest.raises(ConfigError):
        select_model([])
