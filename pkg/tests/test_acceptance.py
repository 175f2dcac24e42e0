"""Acceptance gate: every criterion at its stated tolerance, one line each."""

import hashlib
import logging
import time
from pathlib import Path

import numpy as np
import pytest

from geocluster import (
    ObservationFrame, ClusterParams, CandidateRun, QualityReport,
    kmeans, elbow, fit_pca, transform, inverse_transform,
    silhouette, davies_bouldin, select_model,
    load_registry, load_mappings, load_aggregation, resolve, resolve_all,
    aggregate, rag_table, detect_discrepancies,
    net_growth_series, trough_years,
    UnmappedLocation,
)
from geocluster.config import load_config
from geocluster.demo import write_demo_inputs
from geocluster.pipeline import run_pipeline, stage_ingest

import test_compare
from test_clustering import partitions_up_to_k
from test_quality import silhouette_oracle, davies_bouldin_oracle

DATA = Path(__file__).resolve().parents[1] / "src" / "geocluster" / "data"


def _pass(name: str, detail: str = ""):
    suffix = f" ({detail})" if detail else ""
    print(f"\nACCEPTANCE PASS: {name}{suffix}")


def frame_of(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x.reshape(-1, 1)
    return ObservationFrame([f"e{i}" for i in range(x.shape[0])],
                            [f"f{j}" for j in range(x.shape[1])], x)


@pytest.fixture(scope="module")
def demo_workspace(tmp_path_factory):
    target = tmp_path_factory.mktemp("acceptance-demo")
    config_path = write_demo_inputs(target, seed=7)
    return target, load_config(config_path)


# ---------------------------------------------------------------------------

def test_validity_index_oracle_equivalence():
    """200 random instances, both indices within 1e-12 of brute force, < 5 s."""
    rng = np.random.default_rng(501)
    t0 = time.perf_counter()
    checked_sil = checked_db = 0
    for trial in range(200):
        n = int(rng.integers(4, 13))
        d = int(rng.integers(1, 4))
        c = int(rng.integers(2, 5))
        x = rng.normal(size=(n, d)) * rng.uniform(0.5, 4)
        labels = rng.integers(0, c, size=n)
        while np.unique(labels).size < 2:
            labels = rng.integers(0, c, size=n)
        frame = frame_of(x)
        got = silhouette(frame, labels)
        want = silhouette_oracle(x, labels)
        assert abs(got - want) <= 1e-12, f"trial {trial}: {got} vs {want}"
        checked_sil += 1
        got_db = davies_bouldin(frame, labels)
        want_db = davies_bouldin_oracle(x, labels)
        assert abs(got_db - want_db) <= 1e-12, f"trial {trial}: {got_db} vs {want_db}"
        checked_db += 1
    elapsed = time.perf_counter() - t0
    assert elapsed < 5.0, f"took {elapsed:.2f}s"
    assert checked_sil == checked_db == 200
    _pass("validity-index oracle equivalence", f"200 instances in {elapsed:.2f}s")


def _brute_force_wcss(x, k):
    best = np.inf
    for labels in partitions_up_to_k(len(x), k):
        arr = np.asarray(labels)
        w = 0.0
        for c in range(k):
            members = x[arr == c]
            if len(members):
                w += ((members - members.mean(axis=0)) ** 2).sum()
        if w < best:
            best = w
    return best


def test_kmeans_small_n_optimality():
    """100 random instances: 100-restart kmeans wcss equals the brute-force
    partition-enumeration optimum within 1e-9, < 30 s."""
    rng = np.random.default_rng(101)
    t0 = time.perf_counter()
    for trial in range(100):
        n = int(rng.integers(3, 11))
        d = int(rng.integers(1, 4))
        k = int(rng.integers(1, 4))
        x = rng.normal(size=(n, d)) * rng.uniform(0.5, 3)
        k = min(k, np.unique(x, axis=0).shape[0])
        model = kmeans(frame_of(x), ClusterParams(k=k, seed=trial, restarts=100))
        optimum = _brute_force_wcss(x, k)
        assert abs(model.wcss - optimum) <= 1e-9, (
            f"trial {trial}: engine {model.wcss} vs optimum {optimum}")
    elapsed = time.perf_counter() - t0
    assert elapsed < 30.0, f"took {elapsed:.2f}s"
    _pass("k-means small-n optimality", f"100 instances in {elapsed:.2f}s")


def test_lloyd_monotonicity():
    """Per-iteration wcss never increases (also asserted inside the loop)."""
    rng = np.random.default_rng(77)
    curves = 0
    for trial in range(50):
        n = int(rng.integers(10, 60))
        d = int(rng.integers(1, 5))
        k = int(rng.integers(2, 6))
        x = rng.normal(size=(n, d)) * rng.uniform(0.5, 5)
        model = kmeans(frame_of(x), ClusterParams(k=k, seed=trial, restarts=2))
        curve = model.wcss_curve
        assert curve, "no iterations recorded"
        for a, b in zip(curve, curve[1:]):
            assert b <= a * (1 + 1e-12) + 1e-9, f"wcss increased: {a} -> {b}"
        curves += 1
    _pass("Lloyd monotonicity", f"{curves} runs, every curve non-increasing")


def test_pca_planted_rank2():
    """382x18 rank-2 + 4% noise: two components explain >= 0.95 (0.96 +/- 0.02);
    projected covariance off-diagonals < 1e-8; reconstruction < 1e-8; < 1 s."""
    rng = np.random.default_rng(42)
    n, d = 382, 18
    signal = rng.normal(size=(n, 2)) @ rng.normal(size=(2, d))
    noise = rng.normal(size=(n, d)) * np.sqrt(
        signal.var(axis=0, ddof=1) * 0.04 / 0.96)
    frame = frame_of(signal + noise)
    t0 = time.perf_counter()
    projection = fit_pca(frame, 2, standardize=True)
    cum = float(projection.explained_variance_ratio.sum())
    assert cum >= 0.95, f"two components explain only {cum:.4f}"
    assert abs(cum - 0.96) <= 0.02, f"{cum:.4f} not within 0.96 +/- 0.02"
    projected = transform(projection, frame)
    cov = np.cov(projected.values, rowvar=False)
    off = float(np.abs(cov - np.diag(np.diag(cov))).max())
    assert off < 1e-8, f"projected covariance off-diagonal {off}"
    full = fit_pca(frame, min(n - 1, d), standardize=True)
    recon = inverse_transform(full, transform(full, frame))
    err = float(np.abs(recon.values - frame.values).max())
    assert err < 1e-8, f"reconstruction error {err}"
    elapsed = time.perf_counter() - t0
    assert elapsed < 1.0, f"took {elapsed:.2f}s"
    _pass("PCA planted rank-2",
          f"cum ratio {cum:.4f}, off-diag {off:.1e}, recon {err:.1e}, {elapsed:.2f}s")


def test_elbow_three_blobs_deterministic():
    """Three planted blobs: suggested_k == 3 on all 10 reruns."""
    rng = np.random.default_rng(314)
    pts = np.vstack([
        center + rng.normal(scale=1.0, size=(25, 2))
        for center in ([0, 0], [14, 0], [0, 14])
    ])
    frame = frame_of(pts)
    suggestions = [elbow(frame, (1, 8), seed=314).suggested_k for _ in range(10)]
    assert suggestions == [3] * 10, suggestions
    _pass("elbow knee detection", "suggested_k == 3 across 10 reruns")


def test_selection_rule_on_reported_grids():
    """The documented score grids select the documented models."""
    def grid(scores):
        return [CandidateRun(d, None, QualityReport(s, db, k, 100, 0))
                for d, (s, db, k) in scores.items()]

    demography = grid({
        "PCA=2, k=2": (0.73, 0.6, 2),
        "PCA=2, k=3": (0.703, 0.62, 3),
        "PCA=2, k=4": (0.6, 0.7, 4),
        "PCA=3, k=3": (0.69, 0.65, 3),
    })
    assert select_model(demography).descriptor == "PCA=2, k=2"
    assert select_model(demography, forced_k=3).descriptor == "PCA=2, k=3"

    sectors = grid({
        "PCA=1, k=2": (0.71, 0.55, 2),
        "PCA=1, k=3": (0.68, 0.48, 3),
        "PCA=2, k=2": (0.66, 0.74, 2),
        "PCA=2, k=3": (0.61, 0.72, 3),
    })
    assert select_model(sectors).descriptor == "PCA=1, k=2"
    assert select_model(sectors, forced_k=3).descriptor == "PCA=1, k=3"

    loan_grid = grid({
        "k=2": (0.64, 0.57, 2),
        "k=3": (0.56, 0.56, 3),
        "k=4": (0.53, 0.54, 4),
        "k=5": (0.52, 0.53, 5),
    })
    assert select_model(loan_grid).descriptor == "k=2"
    forced = select_model(loan_grid, forced_k=3)
    assert forced.descriptor == "k=3" and forced.forced
    _pass("selection rule on reported grids",
          "unforced k=2 picks, forced k=3 overrides")


def test_geocode_corrections():
    """All 14 name remaps + 18 coordinate rows resolve; 10 corrupted names
    fail strict and are excluded-with-warning permissive."""
    registry = load_registry(DATA / "registry.csv")
    mappings = load_mappings(DATA / "name_mappings.csv")
    name_maps = [m for m in mappings if m.mapped_name is not None]
    coord_maps = [m for m in mappings if m.coords is not None]
    assert len(name_maps) == 14
    assert len(coord_maps) == 18
    for m in name_maps:
        entity = resolve(m.original, registry, mappings)
        assert entity.code in registry.by_code
    for m in coord_maps:
        entity = resolve(m.original, registry, mappings)
        assert entity.centroid == m.coords
    belfast = resolve("Belfast East", registry, mappings)
    assert belfast.centroid == (54.5999976, -5.858829898)

    corrupted = [m.original + "xx" for m in name_maps[:5]] + \
                [m.original + "xx" for m in coord_maps[:5]]
    assert len(corrupted) == 10
    for name in corrupted:
        with pytest.raises(UnmappedLocation):
            resolve(name, registry, mappings)
    resolved, excluded = resolve_all(corrupted, registry, mappings, strict=False)
    assert resolved == {}
    assert excluded == corrupted
    _pass("geocode corrections",
          "14 remaps + 18 coordinates resolve; 10 corruptions handled both modes")


def test_rag_discrepancy_reproduction():
    """The color matrix yields the exact documented gap sets."""
    table = rag_table(test_compare.london_labelings())
    at2 = detect_discrepancies(table, 2)
    assert at2 == [("Harrow", 2), ("Redbridge", 2), ("Westminster", -2)]

    at1 = dict(detect_discrepancies(table, 1))
    # every non-extreme row in the matrix is amber-over-green or red-over-amber
    expected = {area: 1 for area in test_compare.LONDON_MATRIX}
    expected.update({"Harrow": 2, "Redbridge": 2, "Westminster": -2})
    assert at1 == expected
    listed = {"Harrow", "Redbridge", "Westminster",
              "Camden", "City of London", "Hackney",
              "Barnet", "Bexley", "Brent", "Croydon", "Ealing", "Enfield",
              "Havering", "Hillingdon", "Hounslow"}
    assert listed <= set(at1)
    outer_amber = [a for a in ("Barnet", "Bexley", "Brent", "Croydon", "Ealing",
                               "Enfield", "Havering", "Hillingdon", "Hounslow")
                   if at1[a] == 1]
    assert len(outer_amber) == 9
    _pass("RAG discrepancy reproduction",
          f"threshold 2 -> 3 areas, threshold 1 -> {len(at1)} areas")


def test_trough_detection(demo_workspace):
    """Bundled London-shaped fixture: top-2 trough years are 2009 and 2017."""
    _, config = demo_workspace
    ingest = stage_ingest(config)
    demography = next(b for b in ingest.bundles.values() if b.kind == "demography")
    for area in ("E09000033", "E09000007", "E09000002"):
        series = net_growth_series(demography.records, area)
        assert trough_years(series, 2) == [2009, 2017], area
    _pass("trough detection", "[2009, 2017] on the bundled fixture")


def test_aggregation_conservation():
    """73 -> 33 sum aggregation preserves every column total exactly."""
    agg_map = load_aggregation(DATA / "constituency_boroughs.csv")
    assert len(agg_map.assignments) == 73
    assert len(set(agg_map.assignments.values())) == 33
    rng = np.random.default_rng(929)
    codes = sorted(agg_map.assignments)
    values = rng.integers(0, 100_000, size=(73, 3)).astype(float)
    frame = ObservationFrame(codes, ["a", "b", "c"], values)
    out = aggregate(frame, agg_map, "sum")
    assert out.n_entities == 33
    assert np.array_equal(out.values.sum(axis=0), values.sum(axis=0))
    # per-target oracle: direct summation
    for target in set(agg_map.assignments.values()):
        members = [i for i, c in enumerate(codes)
                   if agg_map.assignments[c] == target]
        expected = values[members].sum(axis=0)
        got = out.values[out.entity_ids.index(target)]
        assert np.array_equal(got, expected)
    _pass("aggregation conservation", "73 -> 33 integer totals exact")


def test_end_to_end_determinism(demo_workspace, tmp_path):
    """Identical config + inputs produce byte-identical artifacts, < 10 s."""
    target, _ = demo_workspace

    def run_into(out_dir: Path) -> dict[str, str]:
        config = load_config(target / "config.yaml")
        config.output_dir = out_dir
        t0 = time.perf_counter()
        run_pipeline(config)
        elapsed = time.perf_counter() - t0
        assert elapsed < 10.0, f"pipeline took {elapsed:.2f}s"
        return {
            p.relative_to(out_dir).as_posix():
                hashlib.sha256(p.read_bytes()).hexdigest()
            for p in sorted(out_dir.rglob("*")) if p.is_file()
        }

    a = run_into(tmp_path / "run_a")
    b = run_into(tmp_path / "run_b")
    assert set(a) == set(b)
    different = [k for k in a if a[k] != b[k]]
    assert not different, f"artifacts differ: {different}"
    assert any(k.endswith(".png") for k in a), "figures missing from artifacts"
    _pass("end-to-end determinism",
          f"{len(a)} artifacts byte-identical across reruns")
