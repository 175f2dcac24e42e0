import numpy as np
import pytest

from geocluster import (
    ObservationFrame, Projection, fit_pca, transform, inverse_transform,
    ConfigError, DataError,
)
from geocluster.pca import jacobi_eigh


def frame_of(values, prefix="f"):
    values = np.asarray(values, dtype=float)
    return ObservationFrame(
        [f"e{i}" for i in range(values.shape[0])],
        [f"{prefix}{j}" for j in range(values.shape[1])],
        values,
    )


def oracle_projection(x, k):
    """Independent route: dense symmetric eigendecomposition via LAPACK."""
    mean = x.mean(axis=0)
    z = x - mean
    cov = z.T @ z / (x.shape[0] - 1)
    w, v = np.linalg.eigh(cov)
    order = np.argsort(-w)
    comps = v[:, order[:k]].T.copy()
    for row in comps:
        j = int(np.argmax(np.abs(row)))
        if row[j] < 0:
            row *= -1
    return z @ comps.T, comps, w[order]


def eig2x2_oracle(cov):
    """Characteristic polynomial roots for a 2x2 symmetric matrix."""
    a, b, c = cov[0, 0], cov[0, 1], cov[1, 1]
    disc = np.sqrt((a - c) ** 2 + 4 * b * b)
    return np.array([(a + c + disc) / 2, (a + c - disc) / 2])


# ---------------------------------------------------------------------------
# the eigensolver itself

def test_jacobi_matches_lapack_on_random_symmetric():
    rng = np.random.default_rng(3)
    for n in (2, 5, 9, 18):
        m = rng.normal(size=(n, n))
        sym = (m + m.T) / 2
        w_j, v_j = jacobi_eigh(sym)
        w_l = np.sort(np.linalg.eigvalsh(sym))[::-1]
        assert np.allclose(w_j, w_l, atol=1e-10)
        # eigenvector property: A v = w v
        assert np.allclose(sym @ v_j, v_j * w_j, atol=1e-9)


def test_jacobi_large_scale_covariance_converges():
    # absolute threshold is unreachable at this scale; the sweep loop must
    # still stop at the float noise floor with accurate results
    rng = np.random.default_rng(77)
    x = rng.normal(size=(90, 30)) * 1e7
    cov = np.cov(x, rowvar=False)
    w, v = jacobi_eigh(cov)
    w_ref = np.sort(np.linalg.eigvalsh(cov))[::-1]
    assert np.allclose(w, w_ref, rtol=1e-10)
    assert np.allclose(v.T @ v, np.eye(30), atol=1e-10)


def test_jacobi_deterministic():
    rng = np.random.default_rng(4)
    m = rng.normal(size=(6, 6))
    sym = m + m.T
    w1, v1 = jacobi_eigh(sym)
    w2, v2 = jacobi_eigh(sym)
    assert np.array_equal(w1, w2)
    assert np.array_equal(v1, v2)


# ---------------------------------------------------------------------------
# fit

def test_five_point_eigenvalues_match_hand_oracle():
    pts = np.array([(2, 0), (0, 1), (-2, 0), (0, -1), (0, 0)], dtype=float)
    cov = (pts - pts.mean(0)).T @ (pts - pts.mean(0)) / (len(pts) - 1)
    expected = eig2x2_oracle(cov)
    assert np.allclose(expected, [2.0, 0.5], atol=1e-12)
    proj = fit_pca(frame_of(pts), 2, standardize=False)
    assert np.allclose(proj.eigenvalues, [2.0, 0.5], atol=1e-12)


def test_rank_one_line_explains_everything():
    t = np.linspace(-3, 3, 11)
    pts = np.stack([t, t], axis=1)
    proj = fit_pca(frame_of(pts), 2, standardize=False)
    assert proj.explained_variance_ratio[0] == pytest.approx(1.0, abs=1e-9)
    assert proj.explained_variance_ratio[1] == pytest.approx(0.0, abs=1e-9)


def test_components_orthonormal_and_sorted():
    rng = np.random.default_rng(7)
    frame = frame_of(rng.normal(size=(40, 6)))
    proj = fit_pca(frame, 6, standardize=True)
    gram = proj.components @ proj.components.T
    assert np.allclose(gram, np.eye(6), atol=1e-9)
    assert all(a >= b - 1e-12 for a, b in zip(proj.eigenvalues, proj.eigenvalues[1:]))
    assert (proj.eigenvalues >= 0).all()


def test_ratios_sum_to_one_over_full_rank():
    rng = np.random.default_rng(8)
    frame = frame_of(rng.normal(size=(30, 5)))
    proj = fit_pca(frame, 5, standardize=True)
    assert proj.explained_variance_ratio.sum() == pytest.approx(1.0, abs=1e-9)
    # short-and-wide frame: rank limited by rows - 1
    wide = frame_of(rng.normal(size=(4, 6)))
    proj = fit_pca(wide, 3, standardize=False)
    assert proj.explained_variance_ratio.sum() == pytest.approx(1.0, abs=1e-9)


def test_constant_column_named_in_error():
    values = np.ones((10, 3))
    values[:, 0] = np.arange(10)
    values[:, 2] = np.arange(10) ** 2
    with pytest.raises(DataError) as err:
        fit_pca(frame_of(values), 2, standardize=True)
    assert "f1" in str(err.value)
    # raw covariance handles constants fine
    proj = fit_pca(frame_of(values), 2, standardize=False)
    assert proj.n_components == 2


def test_n_components_out_of_range():
    frame = frame_of(np.random.default_rng(0).normal(size=(5, 3)))
    with pytest.raises(ConfigError):
        fit_pca(frame, 4)
    with pytest.raises(ConfigError):
        fit_pca(frame, 0)


def test_missing_values_rejected():
    values = np.array([[1.0, np.nan], [2.0, 3.0]])
    with pytest.raises(DataError):
        fit_pca(frame_of(values), 1)


def test_fit_deterministic_bit_identical():
    rng = np.random.default_rng(9)
    frame = frame_of(rng.normal(size=(25, 7)))
    a = fit_pca(frame, 3)
    b = fit_pca(frame, 3)
    assert a.to_json() == b.to_json()


# ---------------------------------------------------------------------------
# transform

def test_transform_centers_training_mean_to_zero():
    rng = np.random.default_rng(10)
    frame = frame_of(rng.normal(size=(12, 4)) * 3 + 5)
    proj = fit_pca(frame, 2)
    mean_row = frame_of(frame.values.mean(axis=0, keepdims=True))
    mean_row.feature_names = list(frame.feature_names)
    out = transform(proj, mean_row)
    assert np.allclose(out.values, 0.0, atol=1e-12)


def test_full_rank_reconstruction():
    rng = np.random.default_rng(11)
    frame = frame_of(rng.normal(size=(20, 5)))
    proj = fit_pca(frame, 5, standardize=True)
    recon = inverse_transform(proj, transform(proj, frame))
    assert np.abs(recon.values - frame.values).max() < 1e-8


def test_transform_matches_eigh_oracle():
    rng = np.random.default_rng(12)
    x = rng.normal(size=(10, 4))
    frame = frame_of(x)
    proj = fit_pca(frame, 2, standardize=False)
    out = transform(proj, frame)
    expected, comps, _ = oracle_projection(x, 2)
    assert np.allclose(out.values, expected, atol=1e-8)
    assert out.feature_names == ["PC1", "PC2"]
    assert out.entity_ids == frame.entity_ids


def test_projected_columns_uncorrelated():
    rng = np.random.default_rng(13)
    frame = frame_of(rng.normal(size=(50, 6)) @ rng.normal(size=(6, 6)))
    proj = fit_pca(frame, 4)
    out = transform(proj, frame)
    cov = np.cov(out.values, rowvar=False)
    off = cov - np.diag(np.diag(cov))
    assert np.abs(off).max() < 1e-8
    # variances sorted descending
    variances = np.diag(cov)
    assert all(a >= b - 1e-10 for a, b in zip(variances, variances[1:]))


def test_transform_feature_mismatch_lists_difference():
    rng = np.random.default_rng(14)
    frame = frame_of(rng.normal(size=(8, 3)))
    proj = fit_pca(frame, 2)
    other = ObservationFrame(frame.entity_ids, ["f0", "f1", "zzz"], frame.values)
    with pytest.raises(DataError) as err:
        transform(proj, other)
    assert "f2" in str(err.value) and "zzz" in str(err.value)


def test_projection_json_roundtrip():
    rng = np.random.default_rng(15)
    frame = frame_of(rng.normal(size=(9, 3)))
    proj = fit_pca(frame, 2)
    back = Projection.from_json(proj.to_json())
    assert back.to_json() == proj.to_json()
    out_a = transform(proj, frame)
    out_b = transform(back, frame)
    assert np.array_equal(out_a.values, out_b.values)
