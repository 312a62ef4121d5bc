"""Luminance histogram binning and background detection."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from slidesim import (
    FilterConfig,
    filter_patches,
    histogram3,
    is_background,
    load_manifest,
    luminance,
)
from slidesim.tissue import MODE_LITERAL_RATIO

CFG = FilterConfig()  # a=85, b=170, threshold 0.8, bright-fraction mode


def uniform_patch(r, g=None, b=None, side=224):
    g = r if g is None else g
    b = r if b is None else b
    patch = np.empty((side, side, 3), dtype=np.uint8)
    patch[..., 0], patch[..., 1], patch[..., 2] = r, g, b
    return patch


class TestFilterConfig:
    def test_defaults_are_valid(self):
        assert CFG.a == 85 and CFG.b == 170
        assert CFG.bright_fraction_threshold == 0.8

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"a": 0},
            {"a": 170, "b": 170},
            {"b": 255},
            {"bright_fraction_threshold": 1.5},
            {"mode": "magic"},
            {"literal_ratio_constant": 0.0},
        ],
    )
    def test_invalid_configs_rejected(self, kwargs):
        with pytest.raises(ValueError):
            FilterConfig(**kwargs)


class TestLuminance:
    def test_white_maps_to_max(self):
        assert np.all(luminance(uniform_patch(255)) == 255)

    def test_black_maps_to_min(self):
        assert np.all(luminance(uniform_patch(0)) == 0)

    def test_pure_red(self):
        # round(0.299 * 255) = round(76.245) = 76
        assert np.all(luminance(uniform_patch(255, 0, 0)) == 76)

    def test_output_dtype_and_shape(self):
        out = luminance(uniform_patch(100, side=16))
        assert out.dtype == np.uint8
        assert out.shape == (16, 16)


class TestHistogram3:
    def test_all_bright(self):
        hist = histogram3(uniform_patch(255), CFG)
        assert (hist.dark, hist.mid, hist.bright) == (0, 0, 50176)

    def test_all_dark(self):
        hist = histogram3(uniform_patch(0), CFG)
        assert (hist.dark, hist.mid, hist.bright) == (50176, 0, 0)

    def test_half_mid_half_bright(self):
        patch = uniform_patch(100)
        patch[:112] = 200  # top half luminance 200, bottom half 100
        hist = histogram3(patch, CFG)
        assert (hist.dark, hist.mid, hist.bright) == (0, 25088, 25088)

    def test_bin_boundaries_are_inclusive_on_the_right(self):
        assert histogram3(uniform_patch(85), CFG).dark == 50176  # at a -> dark
        assert histogram3(uniform_patch(86), CFG).mid == 50176
        assert histogram3(uniform_patch(170), CFG).mid == 50176  # at b -> mid
        assert histogram3(uniform_patch(171), CFG).bright == 50176

    @given(seed=st.integers(0, 2**31 - 1), side=st.integers(1, 64))
    @settings(max_examples=60, deadline=None)
    def test_counts_partition_the_patch(self, seed, side):
        patch = np.random.default_rng(seed).integers(0, 256, size=(side, side, 3), dtype=np.uint8)
        hist = histogram3(patch, CFG)
        assert hist.dark + hist.mid + hist.bright == side * side
        assert hist.total == side * side


class TestIsBackground:
    def test_all_white_is_background(self):
        assert is_background(uniform_patch(255), CFG) is True

    def test_mid_gray_is_tissue(self):
        assert is_background(uniform_patch(100), CFG) is False

    def test_ninety_percent_bright_is_background(self):
        patch = uniform_patch(100)
        flat = patch.reshape(-1, 3)
        n_bright = int(0.9 * len(flat))
        flat[:n_bright] = 255
        assert is_background(patch, CFG) is True  # fraction 0.9 > 0.8

    def test_literal_ratio_mode_removes_dark_heavy(self):
        cfg = FilterConfig(mode=MODE_LITERAL_RATIO, literal_ratio_constant=1.0)
        # bright/dark below the constant: removed under the literal rule
        assert is_background(uniform_patch(0), cfg) is True
        # all-bright: ratio bright/max(dark,1) huge, kept by the literal rule
        assert is_background(uniform_patch(255), cfg) is False

    @given(seed=st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_brightening_a_background_patch_keeps_it_background(self, seed):
        rng = np.random.default_rng(seed)
        patch = uniform_patch(255, side=32)
        n_tissue = int(rng.integers(0, 0.15 * 32 * 32))  # stays above threshold
        flat = patch.reshape(-1, 3)
        flat[:n_tissue] = 100
        assert is_background(patch, CFG)
        i = int(rng.integers(0, 32 * 32))
        flat[i] = 255
        assert is_background(patch, CFG)


class TestFilterPatches:
    def build_slide(self, tmp_path, image):
        pyramid = tmp_path / "s"
        pyramid.mkdir()
        Image.fromarray(image).save(pyramid / "level.png")
        meta = [{
            "magnification": "1x",
            "width": image.shape[1],
            "height": image.shape[0],
            "file": "level.png",
        }]
        (pyramid / "levels.json").write_text(json.dumps(meta))
        manifest = tmp_path / "manifest.csv"
        manifest.write_text("slide_id,label,pyramid_dir\ns,X,s\n")
        (record,) = load_manifest(manifest)
        return record

    def test_entirely_white_slide(self, tmp_path):
        slide = self.build_slide(tmp_path, np.full((448, 448, 3), 255, dtype=np.uint8))
        kept, dropped = filter_patches(slide, "1x", CFG)
        assert kept == []
        assert dropped == 4

    def test_entirely_mid_gray_slide(self, tmp_path):
        slide = self.build_slide(tmp_path, np.full((448, 448, 3), 120, dtype=np.uint8))
        kept, dropped = filter_patches(slide, "1x", CFG)
        assert len(kept) == 4
        assert dropped == 0

    def test_three_tissue_one_white_quadrant(self, tmp_path):
        image = np.full((448, 448, 3), 110, dtype=np.uint8)
        image[:224, :224] = 255  # top-left quadrant is blank
        slide = self.build_slide(tmp_path, image)
        kept, dropped = filter_patches(slide, "1x", CFG)
        assert len(kept) == 3
        assert dropped == 1
        assert (0, 0) not in [(r.row, r.col) for r in kept]

    def test_partition_and_order(self, tmp_path, rng):
        image = rng.integers(0, 256, size=(448, 672, 3), dtype=np.uint8)
        slide = self.build_slide(tmp_path, image)
        kept, dropped = filter_patches(slide, "1x", CFG)
        assert len(kept) + dropped == 2 * 3
        rows_cols = [(r.row, r.col) for r in kept]
        assert rows_cols == sorted(rows_cols)
