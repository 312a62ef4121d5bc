"""Synthetic corpus generation: bookkeeping, determinism, separability."""

import numpy as np
import pytest
from PIL import Image

from slidesim import CorpusSpec, CorpusSpecError, generate_synthetic_corpus, load_manifest


def two_class_spec(levels=None):
    return CorpusSpec(
        classes=("red-ish", "blue-ish"),
        slides_per_class=3,
        levels=levels or {"1x": (448, 448)},
    )


class TestCorpusSpec:
    def test_zero_classes_rejected(self):
        with pytest.raises(CorpusSpecError):
            CorpusSpec(classes=(), slides_per_class=3, levels={"1x": (448, 448)})

    def test_single_class_rejected(self):
        with pytest.raises(CorpusSpecError):
            CorpusSpec(classes=("only",), slides_per_class=3, levels={"1x": (448, 448)})

    def test_single_slide_rejected(self):
        with pytest.raises(CorpusSpecError):
            CorpusSpec(classes=("a", "b"), slides_per_class=1, levels={"1x": (448, 448)})

    def test_no_levels_rejected(self):
        with pytest.raises(CorpusSpecError):
            CorpusSpec(classes=("a", "b"), slides_per_class=2, levels={})

    def test_degenerate_level_rejected(self):
        with pytest.raises(CorpusSpecError):
            CorpusSpec(classes=("a", "b"), slides_per_class=2, levels={"1x": (0, 448)})

    def test_from_json(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text(
            '{"classes": ["a", "b"], "slides_per_class": 2, "levels": {"1x": [224, 224]}}'
        )
        spec = CorpusSpec.from_json(path)
        assert spec.classes == ("a", "b")
        assert spec.levels == {"1x": (224, 224)}

    def test_from_json_malformed(self, tmp_path):
        path = tmp_path / "spec.json"
        path.write_text('{"classes": ["a", "b"]}')
        with pytest.raises(CorpusSpecError):
            CorpusSpec.from_json(path)


class TestGeneration:
    def test_row_and_file_counts(self, tmp_path):
        manifest = generate_synthetic_corpus(two_class_spec(), tmp_path, seed=3)
        records = load_manifest(manifest)
        assert len(records) == 6
        labels = {r.label for r in records}
        assert labels == {"red-ish", "blue-ish"}
        for record in records:
            assert len(record.levels) == 1
            assert record.levels[0].image_path.is_file()

    def test_same_seed_is_byte_identical(self, tmp_path):
        first = tmp_path / "run1"
        second = tmp_path / "run2"
        generate_synthetic_corpus(two_class_spec(), first, seed=9)
        generate_synthetic_corpus(two_class_spec(), second, seed=9)
        for png in sorted(first.rglob("*.png")):
            twin = second / png.relative_to(first)
            assert png.read_bytes() == twin.read_bytes()
        assert (first / "manifest.csv").read_text() == (second / "manifest.csv").read_text()

    def test_different_seeds_differ(self, tmp_path):
        first = tmp_path / "s1"
        second = tmp_path / "s2"
        generate_synthetic_corpus(two_class_spec(), first, seed=1)
        generate_synthetic_corpus(two_class_spec(), second, seed=2)
        names = sorted(p.relative_to(first) for p in first.rglob("*.png"))
        assert any((first / n).read_bytes() != (second / n).read_bytes() for n in names)

    def test_levels_render_the_same_scene(self, tmp_path):
        spec = two_class_spec(levels={"1x": (224, 224), "2.5x": (560, 560)})
        manifest = generate_synthetic_corpus(spec, tmp_path, seed=5)
        record = load_manifest(manifest)[0]
        small = np.asarray(Image.open(record.levels[0].image_path), dtype=np.float64)
        big = np.asarray(Image.open(record.levels[1].image_path), dtype=np.float64)
        # mean color agreement is loose but catches unrelated scenes
        assert abs(small.mean() - big.mean()) < 8.0

    def test_classes_statistically_separable(self, tmp_path):
        manifest = generate_synthetic_corpus(two_class_spec(), tmp_path, seed=7)
        records = load_manifest(manifest)
        by_label = {}
        for record in records:
            img = np.asarray(Image.open(record.levels[0].image_path), dtype=np.float64)
            tissue = img[np.any(img != 255, axis=2)]
            by_label.setdefault(record.label, []).append(tissue.mean(axis=0))
        means = {label: np.mean(vals, axis=0) for label, vals in by_label.items()}
        gap = np.linalg.norm(means["red-ish"] - means["blue-ish"])
        assert gap > 30.0  # class colors are far apart in RGB space

    def test_background_is_pure_white(self, tmp_path):
        manifest = generate_synthetic_corpus(two_class_spec(), tmp_path, seed=2)
        record = load_manifest(manifest)[0]
        img = np.asarray(Image.open(record.levels[0].image_path))
        corners = np.stack([img[0, 0], img[0, -1], img[-1, 0], img[-1, -1]])
        assert np.all(corners == 255)
