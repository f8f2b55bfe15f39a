import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from newsmsi.ca import (
    compute_msi,
    msi_outlets,
    msi_users,
    normalize_and_orient,
    standardized_residuals,
    truncated_svd,
)
from newsmsi.errors import NumericalError
from newsmsi.ingest import BipartiteCounts

from oracles import chi_square, dense_ca_msi, dense_residuals, random_counts

BLOCK = [[3, 0], [3, 0], [0, 3], [0, 3]]


def counts(Y, **kw):
    return BipartiteCounts.from_dense(Y, **kw)


def test_independent_table_has_zero_residuals():
    S = standardized_residuals(counts([[1, 1], [1, 1]]))
    assert np.array_equal(S.toarray(), np.zeros((2, 2)))
    dec = truncated_svd(S, k=1)
    assert dec.singular_values[0] <= 1e-12
    with pytest.raises(NumericalError, match="independent"):
        msi_users(dec)


def test_diagonal_residuals_value():
    S = standardized_residuals(counts([[2, 0], [0, 2]]))
    np.testing.assert_allclose(S.toarray(), [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    np.testing.assert_allclose(S.matmat(np.eye(2)), [[0.5, -0.5], [-0.5, 0.5]], atol=1e-15)
    dec = truncated_svd(S, k=1)
    assert dec.singular_values[0] == pytest.approx(1.0, abs=1e-12)


def test_inertia_equals_chi_square_over_n():
    rng = np.random.default_rng(7)
    Y = rng.integers(1, 9, size=(6, 4))
    S = standardized_residuals(counts(Y))
    expected = chi_square(Y) / Y.sum()
    assert (S.toarray() ** 2).sum() == pytest.approx(expected, rel=1e-12)
    assert S.total_inertia() == pytest.approx(expected, rel=1e-10)


def test_masses_sum_to_one_and_null_space():
    rng = np.random.default_rng(3)
    for _ in range(20):
        Y = random_counts(rng)
        S = standardized_residuals(counts(Y))
        assert S.row_masses.sum() == pytest.approx(1.0, abs=1e-12)
        assert S.col_masses.sum() == pytest.approx(1.0, abs=1e-12)
        assert np.abs(S.rmatmat(S.sqrt_r)).max() <= 1e-10
        assert np.abs(S.matmat(S.sqrt_c)).max() <= 1e-10


def test_svd_matches_dense_oracle():
    rng = np.random.default_rng(11)
    for trial in range(30):
        Y = random_counts(rng)
        S = standardized_residuals(counts(Y))
        full = np.linalg.svd(dense_residuals(Y), compute_uv=False)
        k = min(Y.shape) - 1
        dec = truncated_svd(S, k=k, seed=trial)
        np.testing.assert_allclose(dec.singular_values, full[:k], rtol=1e-9, atol=1e-12)
        assert (dec.singular_values <= 1 + 1e-9).all()
        assert (np.diff(dec.singular_values) <= 1e-12).all()
        assert (dec.principal_inertias.sum()) == pytest.approx(dec.total_inertia, abs=1e-8)
        live = dec.singular_values > 1e-8
        U, V = dec.left_vectors[:, live], dec.right_vectors[:, live]
        np.testing.assert_allclose(U.T @ U, np.eye(live.sum()), atol=1e-8)
        np.testing.assert_allclose(V.T @ V, np.eye(live.sum()), atol=1e-8)


def test_svd_is_deterministic_given_seed():
    Y = random_counts(np.random.default_rng(5), min_rows=20, min_cols=8)
    S = standardized_residuals(counts(Y))
    a, b = truncated_svd(S, k=2, seed=4), truncated_svd(S, k=2, seed=4)
    assert np.array_equal(a.left_vectors, b.left_vectors)
    assert np.array_equal(a.singular_values, b.singular_values)


def test_svd_rejects_bad_k():
    S = standardized_residuals(counts([[2, 0], [0, 2]]))
    with pytest.raises(ValueError):
        truncated_svd(S, k=2)


def test_svd_non_convergence_reports_residual():
    from newsmsi.errors import ConvergenceError

    rng = np.random.default_rng(0)
    Y = rng.poisson(3, size=(300, 60)) + 1
    S = standardized_residuals(counts(Y))
    with pytest.raises(ConvergenceError) as info:
        truncated_svd(S, k=1, tol=1e-14, max_iter=1, oversample=0)
    assert info.value.residual > 0


def test_block_matrix_raw_and_normalized():
    c = counts(BLOCK)
    dec = truncated_svd(standardized_residuals(c), k=1)
    raw = msi_users(dec)
    assert len(np.unique(np.round(raw, 12))) == 2
    assert raw[0] == raw[1] and raw[2] == raw[3]
    scores = normalize_and_orient(raw, c)
    np.testing.assert_allclose(scores.user_values, [1, 1, -1, -1], atol=1e-12)
    assert scores.sign_reference == "o0"
    np.testing.assert_allclose(scores.outlet_values, [1, -1], atol=1e-12)
    # oracle agreement for the paper-literal exponent too
    lit = msi_users(dec, "paper_literal")
    z, _ = dense_ca_msi(BLOCK, "paper_literal")
    np.testing.assert_allclose(np.abs(normalize_and_orient(lit, c).user_values), np.abs(z), atol=1e-12)


def test_normalize_hand_example_and_fixed_points():
    c = counts(BLOCK)
    out = normalize_and_orient(np.array([2.0, 2.0, 0.0, 0.0]), c)
    np.testing.assert_allclose(out.user_values, [1, 1, -1, -1], atol=1e-15)
    again = normalize_and_orient(out.user_values, c)
    np.testing.assert_allclose(again.user_values, out.user_values, atol=1e-15)
    flipped = normalize_and_orient(-np.array([2.0, 2.0, 0.0, 0.0]), c)
    np.testing.assert_allclose(flipped.user_values, out.user_values, atol=1e-15)
    other = normalize_and_orient(np.array([2.0, 2.0, 0.0, 0.0]), c, sign_reference="o1")
    np.testing.assert_allclose(other.user_values, [-1, -1, 1, 1], atol=1e-15)
    with pytest.raises(NumericalError):
        normalize_and_orient(np.ones(4), c)


def test_outlet_msi_examples():
    c = counts(BLOCK)
    assert msi_outlets(np.array([1.0, 1.0, -1.0, -1.0]), c) == {"o0": 1.0, "o1": -1.0}
    c2 = counts([[1, 2], [0, 3], [4, 0]])
    z = np.array([0.3, -1.2, 0.9])
    assert msi_outlets(z, c2)["o0"] == pytest.approx((0.3 + 4 * 0.9) / 5)
    # outlet shared once by a single user copies that user's score
    lone = counts([[1, 2], [0, 5]])
    assert msi_outlets(np.array([0.25, -0.5]), lone)["o0"] == 0.25


def test_default_sign_reference_largest_mass():
    c = counts([[5, 1, 0], [0, 1, 4], [1, 7, 1]], outlet_ids=["x", "y", "z"])
    scores, _ = compute_msi(c)
    assert scores.sign_reference == "y"
    assert scores.outlet_msi["y"] > 0


def test_oracle_equivalence_random():
    rng = np.random.default_rng(2024)
    for _ in range(25):
        Y = random_counts(rng)
        scores, _ = compute_msi(counts(Y))
        z, a = dense_ca_msi(Y)
        if a[0] - a[1] < 1e-6:
            continue
        sign = np.sign(z @ scores.user_values)
        assert np.abs(scores.user_values - sign * z).max() <= 1e-6
        assert scores.user_values.mean() == pytest.approx(0, abs=1e-9)
        assert scores.user_values.std() == pytest.approx(1, abs=1e-9)
        lo, hi = scores.user_values.min(), scores.user_values.max()
        assert (scores.outlet_values >= lo - 1e-12).all() and (scores.outlet_values <= hi + 1e-12).all()
        assert scores.outlet_msi[scores.sign_reference] > 0


def test_permutation_equivariance():
    rng = np.random.default_rng(8)
    Y = random_counts(rng, min_rows=10, min_cols=5)
    base, _ = compute_msi(counts(Y))
    rows = rng.permutation(Y.shape[0])
    cols = rng.permutation(Y.shape[1])
    ids_u = [f"u{i}" for i in range(Y.shape[0])]
    ids_o = [f"o{j}" for j in range(Y.shape[1])]
    perm, _ = compute_msi(
        counts(Y[rows][:, cols], user_ids=[ids_u[i] for i in rows], outlet_ids=[ids_o[j] for j in cols])
    )
    for uid, v in perm.user_msi.items():
        assert v == pytest.approx(base.user_msi[uid], abs=1e-10)
    for oid, v in perm.outlet_msi.items():
        assert v == pytest.approx(base.outlet_msi[oid], abs=1e-10)


def test_scale_invariance_and_duplicate_rows():
    rng = np.random.default_rng(9)
    Y = random_counts(rng, min_rows=10, min_cols=5)
    base, _ = compute_msi(counts(Y))
    scaled, _ = compute_msi(counts(Y * 7))
    np.testing.assert_allclose(scaled.user_values, base.user_values, atol=1e-9)
    dup = np.vstack([Y, Y[:1]])
    s, _ = compute_msi(counts(dup))
    assert s.user_values[0] == s.user_values[-1]


def test_identical_rows_get_identical_scores():
    Y = np.array([[4, 1, 0], [4, 1, 0], [0, 2, 5], [1, 1, 1], [4, 1, 0]])
    s, _ = compute_msi(counts(Y))
    assert s.user_values[0] == s.user_values[1] == s.user_values[4]


count_matrices = arrays(np.int64, st.tuples(st.integers(3, 12), st.integers(3, 6)), elements=st.integers(0, 9))


@settings(max_examples=60, deadline=None)
@given(count_matrices)
def test_property_null_space_and_bounds(Y):
    if (Y.sum(axis=1) == 0).any() or (Y.sum(axis=0) == 0).any():
        return
    S = standardized_residuals(counts(Y))
    assert np.abs(S.rmatmat(S.sqrt_r)).max() <= 1e-10
    dec = truncated_svd(S, k=min(Y.shape) - 1)
    assert dec.singular_values.max() <= 1 + 1e-9
    assert dec.total_inertia == pytest.approx(chi_square(Y) / Y.sum(), rel=1e-8, abs=1e-12)
