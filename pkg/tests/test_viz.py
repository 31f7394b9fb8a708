"""Visualization raster and figure-emitter tests."""

import numpy as np
import numpy.testing as npt
import pytest

from panorad.errors import ConfigError, DataError
from panorad.evaluation import confusion_from_pairs
from panorad.image_io import GrayImage
from panorad.nn import InitSpec, build_4layer
from panorad.nn.train import TrainHistory
from panorad.plots import save_confusion_plot, save_curve_plot, save_history_plot
from panorad.viz import (
    HOG_BINS,
    cell_orientation_histograms,
    conv_weight_tiles,
    hog_glyph,
    layer_activations,
    normalize_tile,
    tile_grid,
)


def stripe_image(size=32, period=8):
    """Vertical stripes: gradients point horizontally."""
    xs = np.arange(size)
    row = ((xs // (period // 2)) % 2).astype(np.float32)
    return GrayImage(np.tile(row, (size, 1)))


class TestCellHistograms:
    def test_shape(self):
        hists = cell_orientation_histograms(stripe_image(40), cell=8)
        assert hists.shape == (5, 5, HOG_BINS)

    def test_constant_image_all_zero(self):
        hists = cell_orientation_histograms(GrayImage(np.full((16, 16), 0.4, np.float32)))
        npt.assert_array_equal(hists, 0.0)

    def test_vertical_stripes_vote_horizontal_orientation(self):
        # Horizontal gradients have orientation angle 0 (bin 0) in the
        # uncentered convention, i.e. votes land at theta = 0.
        hists = cell_orientation_histograms(stripe_image(32), cell=8)
        totals = hists.sum(axis=(0, 1))
        assert totals.argmax() == 0

    def test_cell_too_small(self):
        with pytest.raises(ConfigError):
            cell_orientation_histograms(stripe_image(32), cell=1)

    def test_image_smaller_than_cell(self):
        with pytest.raises(DataError):
            cell_orientation_histograms(GrayImage(np.zeros((4, 4), np.float32)), cell=8)


class TestHogGlyph:
    def test_dimensions(self):
        g = hog_glyph(stripe_image(32), cell=8, scale=1)
        assert (g.height, g.width) == (32, 32)
        g2 = hog_glyph(stripe_image(32), cell=8, scale=3)
        assert (g2.height, g2.width) == (96, 96)

    def test_constant_image_black(self):
        g = hog_glyph(GrayImage(np.full((16, 16), 0.7, np.float32)))
        npt.assert_array_equal(g.pixels, 0.0)

    def test_vertical_stripes_render_horizontal_lines(self):
        # Bin 0 (theta = 0) draws along +x, so lit pixels should spread
        # across columns within a tile row rather than down rows.
        g = hog_glyph(stripe_image(32), cell=8, scale=2)
        tile = g.pixels[:16, 16:32]  # one interior tile
        lit_rows = (tile > 0.5).any(axis=1).sum()
        lit_cols = (tile > 0.5).any(axis=0).sum()
        assert lit_cols > lit_rows * 3

    def test_values_in_unit_range(self):
        g = hog_glyph(stripe_image(40), cell=8)
        assert g.pixels.min() >= 0.0 and g.pixels.max() <= 1.0

    def test_bad_scale(self):
        with pytest.raises(ConfigError):
            hog_glyph(stripe_image(32), scale=0)


class TestTileGrid:
    def test_normalize_rescales(self):
        out = normalize_tile(np.array([[1.0, 3.0], [2.0, 5.0]]))
        npt.assert_allclose(out, [[0.0, 0.5], [0.25, 1.0]])

    def test_normalize_flat_is_mid_gray(self):
        npt.assert_array_equal(normalize_tile(np.full((3, 3), 9.0)), 0.5)

    def test_grid_geometry_32_tiles(self):
        tiles = np.random.default_rng(0).normal(size=(32, 5, 5))
        grid = tile_grid(tiles, pad=1)
        # 32 tiles -> 6x6 grid with separators: 6*(5+1)+1 = 37 per side.
        assert (grid.height, grid.width) == (37, 37)

    def test_separators_black_and_blanks_empty(self):
        tiles = np.random.default_rng(1).normal(size=(32, 5, 5))
        grid = tile_grid(tiles, pad=1).pixels
        npt.assert_array_equal(grid[0, :], 0.0)  # top border
        npt.assert_array_equal(grid[:, 6], 0.0)  # first separator column
        # Tiles 32..35 of the 6x6 grid are absent: bottom-right cell blank.
        npt.assert_array_equal(grid[31:36, 31:36], 0.0)

    def test_single_tile(self):
        grid = tile_grid(np.ones((1, 4, 4)))
        assert (grid.height, grid.width) == (6, 6)
        npt.assert_array_equal(grid.pixels[1:5, 1:5], 0.5)  # flat tile

    def test_bad_shape(self):
        with pytest.raises(DataError):
            tile_grid(np.zeros((3, 3)))


class TestNetworkViews:
    def test_conv_weight_tiles_averages_input_channels(self):
        w = np.stack([np.full((2, 3, 3), 1.0), np.full((2, 3, 3), 5.0)])
        tiles = conv_weight_tiles(w)
        assert tiles.shape == (2, 3, 3)
        npt.assert_array_equal(tiles[0], 1.0)
        npt.assert_array_equal(tiles[1], 5.0)

    def test_conv_weight_tiles_bad_rank(self):
        with pytest.raises(DataError):
            conv_weight_tiles(np.zeros((3, 3)))

    def test_layer_activations_match_forward(self):
        net = build_4layer((1, 16, 16), 4, init=InitSpec(seed=2))
        x = np.random.default_rng(3).normal(size=(2, 1, 16, 16)).astype(np.float32)
        acts = layer_activations(net, x)
        assert len(acts) == len(net.layers)
        out, _ = net.forward(x)
        npt.assert_array_equal(acts[-1], out)
        # Pool output halves the conv spatial dims.
        assert acts[4].shape == (2, 32, 8, 8)


class TestFigureFiles:
    def test_history_plot(self, tmp_path):
        hist = TrainHistory(
            loss=(1.0, 0.5, 0.25),
            train_acc=(0.3, 0.6, 0.9),
            eval_acc=(float("nan"), 0.5, 0.8),
        )
        path = tmp_path / "hist.png"
        save_history_plot(path, hist)
        assert path.stat().st_size > 500

    def test_curve_plot(self, tmp_path):
        path = tmp_path / "curve.png"
        save_curve_plot(
            path, [100, 200, 500], {"sift": [0.8, 0.85, 0.9]}, xlabel="dictionary size"
        )
        assert path.stat().st_size > 500

    def test_curve_plot_length_mismatch(self, tmp_path):
        with pytest.raises(DataError):
            save_curve_plot(tmp_path / "c.png", [1, 2], {"a": [0.5]}, xlabel="x")

    def test_confusion_plot(self, tmp_path):
        cm = confusion_from_pairs(2, [0, 0, 1, 1], [0, 1, 1, 1])
        path = tmp_path / "cm.png"
        save_confusion_plot(path, cm, names=["M", "F"])
        assert path.stat().st_size > 500
