"""Feature statistics and selection against loop-based oracles."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from slidesim import (
    ReductionError,
    compute_stats,
    load_stats,
    reduce_embeddings,
    reduce_store,
    save_stats,
)
from slidesim.store import EmbeddingStore

from helpers import MAG_1X, brute_force_selection, make_embeddings, two_pass_stats


class TestComputeStats:
    def test_hand_arithmetic_case(self):
        embs = make_embeddings("a", [[1.0, 2.0], [3.0, 2.0]])
        stats = compute_stats(embs, n_f=1)
        np.testing.assert_allclose(stats.mean, [2.0, 2.0])
        np.testing.assert_allclose(stats.std, [1.0, 0.0])
        np.testing.assert_allclose(stats.cv, [0.5, 0.0])
        assert stats.selected_indices.tolist() == [0]

    def test_identical_embeddings_select_first_indices(self):
        embs = make_embeddings("a", np.tile([[3.0, 5.0, 7.0, 9.0]], (4, 1)))
        stats = compute_stats(embs, n_f=2)
        np.testing.assert_allclose(stats.std, 0.0)
        np.testing.assert_allclose(stats.cv, 0.0)
        # all coefficients tie at zero; the tie rule keeps the lowest indices
        assert stats.selected_indices.tolist() == [0, 1]

    def test_zero_mean_guard_never_beats_finite(self):
        embs = make_embeddings("a", [[0.0, 4.0], [0.0, 6.0]])
        stats = compute_stats(embs, n_f=1)
        assert stats.cv[0] == -np.inf
        assert stats.selected_indices.tolist() == [1]

    def test_against_two_pass_oracle(self, rng):
        matrix = rng.normal(5.0, 2.0, size=(17, 23))
        embs = make_embeddings("a", matrix)
        stats = compute_stats(embs, n_f=23)
        mean, std = two_pass_stats(np.asarray(matrix, dtype=np.float32))
        np.testing.assert_allclose(stats.mean, mean, atol=1e-9)
        np.testing.assert_allclose(stats.std, std, atol=1e-9)

    def test_selection_matches_brute_force(self, rng):
        matrix = rng.normal(3.0, 1.0, size=(12, 40))
        embs = make_embeddings("a", matrix)
        stats = compute_stats(embs, n_f=16)
        expected = brute_force_selection(stats.cv, 16)
        assert stats.selected_indices.tolist() == expected

    def test_scaling_leaves_selection_unchanged(self, rng):
        matrix = rng.normal(4.0, 1.5, size=(10, 32)).astype(np.float32)
        base = compute_stats(make_embeddings("a", matrix), n_f=8)
        for lam in (0.25, 3.0, 117.0):
            scaled = compute_stats(make_embeddings("a", matrix * lam), n_f=8)
            assert scaled.selected_indices.tolist() == base.selected_indices.tolist()
            np.testing.assert_allclose(scaled.mean, base.mean * lam, rtol=1e-6)
            np.testing.assert_allclose(scaled.std, base.std * lam, rtol=1e-6, atol=1e-6)

    def test_too_few_embeddings(self):
        embs = make_embeddings("a", [[1.0, 2.0]])
        with pytest.raises(ReductionError):
            compute_stats(embs, n_f=1)

    def test_length_mismatch(self):
        embs = make_embeddings("a", [[1.0, 2.0], [3.0, 4.0]])
        embs += make_embeddings("b", [[1.0, 2.0, 3.0]])
        with pytest.raises(ReductionError):
            compute_stats(embs, n_f=1)

    def test_n_f_bounds(self):
        embs = make_embeddings("a", [[1.0, 2.0], [3.0, 4.0]])
        with pytest.raises(ReductionError):
            compute_stats(embs, n_f=3)
        with pytest.raises(ReductionError):
            compute_stats(embs, n_f=0)

    @given(seed=st.integers(0, 2**31 - 1), n_f=st.integers(1, 20))
    @settings(max_examples=60, deadline=None)
    def test_selection_optimality_property(self, seed, n_f):
        rng = np.random.default_rng(seed)
        matrix = rng.normal(2.0, 1.0, size=(6, 20))
        stats = compute_stats(make_embeddings("a", matrix), n_f=n_f)
        selected = set(stats.selected_indices.tolist())
        finite = {j for j in range(20) if np.isfinite(stats.cv[j])}
        for j in selected & finite:
            for k in finite - selected:
                assert stats.cv[j] >= stats.cv[k]


class TestReduce:
    def test_coordinate_projection(self):
        embs = make_embeddings("a", [[5.0, 7.0, 9.0], [5.0, 7.0, 9.0]])
        stats = compute_stats(embs, n_f=3)
        picked = stats.__class__(
            mean=stats.mean,
            std=stats.std,
            cv=stats.cv,
            selected_indices=np.array([0, 2]),
            n=stats.n,
            s_f=3,
            n_f=2,
            magnification=stats.magnification,
        )
        out = reduce_embeddings(embs, picked)
        assert out[0].vector.tolist() == [5.0, 9.0]

    def test_identity_selection_is_noop(self, rng):
        matrix = rng.normal(1.0, 0.3, size=(5, 8)).astype(np.float32)
        embs = make_embeddings("a", matrix)
        stats = compute_stats(embs, n_f=8)
        out = reduce_embeddings(embs, stats)
        for before, after in zip(embs, out):
            assert before.ref == after.ref
            np.testing.assert_array_equal(before.vector, after.vector)
        # applying the identity selection again changes nothing
        again = reduce_embeddings(out, compute_stats(out, n_f=8))
        for before, after in zip(out, again):
            np.testing.assert_array_equal(before.vector, after.vector)

    def test_full_width_reduction_to_128(self, rng):
        matrix = rng.normal(1.0, 0.2, size=(4, 2048))
        embs = make_embeddings("a", matrix)
        stats = compute_stats(embs, n_f=128)
        out = reduce_embeddings(embs, stats)
        assert all(rec.vector.shape == (128,) for rec in out)

    def test_order_and_refs_preserved(self, rng):
        matrix = rng.normal(1.0, 0.5, size=(6, 10))
        embs = make_embeddings("a", matrix)
        stats = compute_stats(embs, n_f=4)
        out = reduce_embeddings(embs, stats)
        assert [rec.ref for rec in out] == [rec.ref for rec in embs]

    def test_zero_norm_projection_rejected(self):
        embs = make_embeddings("a", [[0.0, 1.0], [0.0, 2.0]])
        stats = compute_stats(embs, n_f=2)
        chopped = stats.__class__(
            mean=stats.mean,
            std=stats.std,
            cv=stats.cv,
            selected_indices=np.array([0]),
            n=stats.n,
            s_f=2,
            n_f=1,
            magnification=stats.magnification,
        )
        with pytest.raises(ReductionError):
            reduce_embeddings(embs, chopped)

    def test_dimension_mismatch_rejected(self, rng):
        embs = make_embeddings("a", rng.normal(1.0, 0.5, size=(4, 6)))
        stats = compute_stats(embs, n_f=3)
        other = make_embeddings("b", rng.normal(1.0, 0.5, size=(2, 9)))
        with pytest.raises(ReductionError):
            reduce_embeddings(other, stats)

    def test_reduce_store(self, rng):
        matrix = rng.normal(2.0, 0.5, size=(6, 12)).astype(np.float32)
        store = EmbeddingStore(dim=12, magnification=MAG_1X)
        store.extend(make_embeddings("a", matrix[:3]) + make_embeddings("b", matrix[3:]))
        stats = compute_stats(store, n_f=5)
        reduced = reduce_store(store, stats)
        assert reduced.dim == 5
        assert len(reduced) == 6
        assert reduced.slide_ids() == ["a", "b"]


def test_stats_json_roundtrip(tmp_path, rng):
    embs = make_embeddings("a", [[0.0, 4.0, 1.0], [0.0, 6.0, 3.0]])
    stats = compute_stats(embs, n_f=2)
    assert stats.cv[0] == -np.inf  # sentinel survives the roundtrip as null
    path = tmp_path / "stats.json"
    save_stats(stats, path)
    assert "Infinity" not in path.read_text()  # strict JSON only
    loaded = load_stats(path)
    np.testing.assert_array_equal(loaded.selected_indices, stats.selected_indices)
    np.testing.assert_allclose(loaded.mean, stats.mean)
    np.testing.assert_allclose(loaded.std, stats.std)
    assert loaded.cv[0] == -np.inf
    assert (loaded.n, loaded.s_f, loaded.n_f) == (stats.n, stats.s_f, stats.n_f)
    assert loaded.magnification == stats.magnification
