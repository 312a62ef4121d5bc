"""Cosine matrix and slide-score tests against hand and brute-force oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slidesim import (
    EmptySlideError,
    SimilarityMatrix,
    compare_slides,
    cosine,
    similarity_matrix,
    slide_similarity,
    write_matrix,
)
from slidesim.similarity import aggregate_values

from helpers import make_embeddings, naive_aggregate, naive_cosine_matrix


class TestCosine:
    def test_identical_direction(self):
        assert cosine([1.0, 0.0], [1.0, 0.0]) == 1.0

    def test_orthogonal(self):
        assert cosine([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_value(self):
        # dot = 2 + 2 + 4 = 8, norms 3 * 3 = 9
        assert cosine([1.0, 2.0, 2.0], [2.0, 1.0, 2.0]) == pytest.approx(8.0 / 9.0, abs=1e-12)

    def test_opposite(self):
        assert cosine([1.0, 0.0], [-1.0, 0.0]) == -1.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            cosine([1.0, 2.0], [1.0, 2.0, 3.0])

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            cosine([0.0, 0.0], [0.0, 0.0])

    def test_result_clamped(self, rng):
        for _ in range(200):
            u = rng.standard_normal(8)
            v = rng.standard_normal(8)
            assert -1.0 <= cosine(u, v) <= 1.0


class TestSimilarityMatrix:
    def test_self_diagonal_is_exactly_one(self, rng):
        embs = make_embeddings("a", rng.standard_normal((6, 16)))
        matrix = similarity_matrix(embs, embs)
        assert np.all(np.diag(matrix.values) == 1.0)

    def test_unit_vector_pairs(self):
        q = make_embeddings("q", [[1.0, 0.0], [0.0, 1.0]])
        r = make_embeddings("r", [[1.0, 0.0]])
        matrix = similarity_matrix(q, r)
        assert matrix.values.shape == (2, 1)
        assert matrix.values[0, 0] == 1.0
        assert matrix.values[1, 0] == 0.0

    def test_against_double_loop_oracle(self, rng):
        q_arr = rng.standard_normal((5, 12)).astype(np.float32)
        r_arr = rng.standard_normal((7, 12)).astype(np.float32)
        matrix = similarity_matrix(make_embeddings("q", q_arr), make_embeddings("r", r_arr))
        expected = naive_cosine_matrix(q_arr, r_arr)
        np.testing.assert_allclose(matrix.values, expected, atol=1e-9)

    def test_dimensions_named_from_inputs(self, rng):
        q = make_embeddings("slide-q", rng.standard_normal((3, 4)))
        r = make_embeddings("slide-r", rng.standard_normal((2, 4)))
        matrix = similarity_matrix(q, r)
        assert (matrix.query_id, matrix.reference_id) == ("slide-q", "slide-r")
        assert (matrix.n_q, matrix.n_r) == (3, 2)

    def test_empty_side_rejected(self, rng):
        embs = make_embeddings("a", rng.standard_normal((3, 4)))
        with pytest.raises(EmptySlideError):
            similarity_matrix([], embs)
        with pytest.raises(EmptySlideError):
            similarity_matrix(embs, [])

    def test_dim_mismatch_rejected(self, rng):
        q = make_embeddings("q", rng.standard_normal((2, 4)))
        r = make_embeddings("r", rng.standard_normal((2, 5)))
        with pytest.raises(ValueError):
            similarity_matrix(q, r)

    def test_range_validation_on_construction(self):
        with pytest.raises(ValueError):
            SimilarityMatrix("q", "r", np.array([[1.5]]))
        with pytest.raises(ValueError):
            SimilarityMatrix("q", "r", np.array([[np.nan]]))


class TestSlideSimilarity:
    def test_permutation_matched_patches(self):
        m = SimilarityMatrix("q", "r", np.array([[1.0, 0.0], [0.0, 1.0]]))
        assert slide_similarity(m).value == 1.0

    def test_hand_evaluated_tall_matrix(self):
        # column term: 1/1 * 1.0; row term: (1.0 + 0.0) / 2
        m = SimilarityMatrix("q", "r", np.array([[1.0], [0.0]]))
        assert slide_similarity(m).value == 0.75

    def test_all_zeros(self):
        m = SimilarityMatrix("q", "r", np.zeros((3, 4)))
        assert slide_similarity(m).value == 0.0

    @given(
        n_q=st.integers(1, 8),
        n_r=st.integers(1, 8),
        data=st.data(),
    )
    @settings(max_examples=200, deadline=None)
    def test_exact_oracle_on_coarse_grid(self, n_q, n_r, data):
        # Entries are multiples of 1/8, so every intermediate sum is exact
        # and the oracle's loop arithmetic must agree bitwise.
        cells = data.draw(
            st.lists(st.integers(0, 8), min_size=n_q * n_r, max_size=n_q * n_r)
        )
        values = np.array(cells, dtype=np.float64).reshape(n_q, n_r) / 8.0
        m = SimilarityMatrix("q", "r", values)
        assert slide_similarity(m).value == naive_aggregate(values)

    def test_transpose_symmetry_is_exact(self, rng):
        for _ in range(50):
            values = rng.uniform(-1.0, 1.0, size=(rng.integers(1, 9), rng.integers(1, 9)))
            assert aggregate_values(values) == aggregate_values(values.T)


class TestCompareSlides:
    def test_self_comparison_is_exactly_one(self, rng):
        embs = make_embeddings("a", rng.standard_normal((10, 32)))
        assert compare_slides(embs, embs).value == 1.0

    def test_symmetry(self, rng):
        a = make_embeddings("a", rng.standard_normal((6, 24)))
        b = make_embeddings("b", rng.standard_normal((9, 24)))
        assert compare_slides(a, b).value == pytest.approx(
            compare_slides(b, a).value, abs=1e-12
        )

    def test_permutation_invariance_is_exact(self, rng):
        a_arr = rng.standard_normal((7, 16)).astype(np.float32)
        b_arr = rng.standard_normal((5, 16)).astype(np.float32)
        a = make_embeddings("a", a_arr)
        b = make_embeddings("b", b_arr)
        baseline = compare_slides(a, b).value
        for _ in range(20):
            qp = [a[i] for i in rng.permutation(len(a))]
            rp = [b[i] for i in rng.permutation(len(b))]
            assert compare_slides(qp, rp).value == baseline

    def test_duplicating_reference_patch_keeps_unique_maxima(self, rng):
        a_arr = rng.standard_normal((4, 8)).astype(np.float32)
        b_arr = rng.standard_normal((3, 8)).astype(np.float32)
        a = make_embeddings("a", a_arr)
        b = make_embeddings("b", b_arr)
        b_dup = make_embeddings("b", np.vstack([b_arr, b_arr[1:2]]))
        plain = similarity_matrix(a, b).values
        dup = similarity_matrix(a, b_dup).values
        # The duplicated column reproduces its source exactly; per-column
        # maxima over unique patches are untouched.
        np.testing.assert_array_equal(dup[:, :3], plain)
        np.testing.assert_array_equal(dup[:, 3], plain[:, 1])

    def test_nonnegative_embeddings_give_unit_interval(self, rng):
        a = make_embeddings("a", rng.uniform(0.0, 1.0, size=(8, 16)))
        b = make_embeddings("b", rng.uniform(0.0, 1.0, size=(6, 16)))
        matrix = similarity_matrix(a, b)
        assert matrix.values.min() >= 0.0
        assert matrix.values.max() <= 1.0
        value = slide_similarity(matrix).value
        assert 0.0 <= value <= 1.0

    def test_signed_embeddings_stay_in_wide_interval(self, rng):
        a = make_embeddings("a", rng.standard_normal((8, 4)))
        b = make_embeddings("b", rng.standard_normal((6, 4)))
        value = compare_slides(a, b).value
        assert -1.0 <= value <= 1.0


def test_write_matrix_roundtrip(tmp_path, rng):
    values = np.clip(rng.standard_normal((3, 5)), -1.0, 1.0)
    matrix = SimilarityMatrix("q", "r", values)
    path = tmp_path / "matrix.bin"
    write_matrix(matrix, path)
    blob = path.read_bytes()
    n_q, n_r = np.frombuffer(blob[:8], dtype="<u4")
    assert (n_q, n_r) == (3, 5)
    decoded = np.frombuffer(blob[8:], dtype="<f4").reshape(3, 5)
    np.testing.assert_allclose(decoded, values, atol=1e-6)
