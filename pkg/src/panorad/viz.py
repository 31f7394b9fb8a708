"""Visualization rasters: oriented-histogram glyphs and filter/activation grids.

Everything renders to GrayImage so the CLI can write PNG or PGM with the
same codecs as the rest of the pipeline.
"""

import numpy as np

from .errors import ConfigError, DataError
from .features import _vote_planes, gradients
from .image_io import GrayImage

HOG_BINS = 9


def cell_orientation_histograms(img: GrayImage, cell=8):
    """(cells_y, cells_x, 9) magnitude-weighted orientation histograms."""
    if cell < 2:
        raise ConfigError(f"cell must be at least 2, got {cell}")
    h, w = img.height, img.width
    cy, cx = h // cell, w // cell
    if cy < 1 or cx < 1:
        raise DataError(f"image {w}x{h} smaller than one {cell}px cell")
    planes = _vote_planes(gradients(img), HOG_BINS, centered=False)
    planes = planes[:, : cy * cell, : cx * cell]
    cells = planes.reshape(HOG_BINS, cy, cell, cx, cell).sum(axis=(2, 4))
    return cells.transpose(1, 2, 0)


def hog_glyph(img: GrayImage, cell=8, scale=1) -> GrayImage:
    """Oriented-line glyph per cell; line brightness follows the bin weight.

    Each cell renders as an (8*scale)-pixel tile, so the output measures
    exactly cells x 8 x scale per side. A constant image yields all-black
    output (no gradient mass anywhere).
    """
    if scale < 1:
        raise ConfigError(f"scale must be at least 1, got {scale}")
    hists = cell_orientation_histograms(img, cell)
    cy, cx, _ = hists.shape
    tile = 8 * scale
    peak = hists.max()
    canvas = np.zeros((cy * tile, cx * tile), dtype=np.float32)
    if peak <= 0:
        return GrayImage(canvas)
    weights = hists / peak
    half = tile / 2.0
    span = np.arange(-(half - 1.0), half - 1.0 + 0.25, 0.5)
    for gy in range(cy):
        for gx in range(cx):
            for b in range(HOG_BINS):
                wgt = float(weights[gy, gx, b])
                if wgt <= 0:
                    continue
                theta = b * np.pi / HOG_BINS
                xs = np.round(gx * tile + half - 0.5 + span * np.cos(theta)).astype(int)
                ys = np.round(gy * tile + half - 0.5 + span * np.sin(theta)).astype(int)
                current = canvas[ys, xs]
                canvas[ys, xs] = np.maximum(current, wgt)
    return GrayImage(canvas)


def normalize_tile(tile):
    """Min-max to [0, 1]; a flat tile maps to uniform mid-gray."""
    tile = np.asarray(tile, dtype=np.float64)
    lo, hi = tile.min(), tile.max()
    if hi - lo <= 0:
        return np.full(tile.shape, 0.5, dtype=np.float32)
    return ((tile - lo) / (hi - lo)).astype(np.float32)


def tile_grid(tiles, pad=1) -> GrayImage:
    """Tiles on a ceil(sqrt(n)) grid with black separators; extras stay blank."""
    tiles = np.asarray(tiles, dtype=np.float64)
    if tiles.ndim != 3 or tiles.shape[0] == 0:
        raise DataError(f"expected (n, h, w) tiles, got shape {tiles.shape}")
    n, th, tw = tiles.shape
    cols = int(np.ceil(np.sqrt(n)))
    rows = int(np.ceil(n / cols))
    canvas = np.zeros((rows * (th + pad) + pad, cols * (tw + pad) + pad),
                      dtype=np.float32)
    for i in range(n):
        r, c = divmod(i, cols)
        y0 = pad + r * (th + pad)
        x0 = pad + c * (tw + pad)
        canvas[y0:y0 + th, x0:x0 + tw] = normalize_tile(tiles[i])
    return GrayImage(canvas)


def conv_weight_tiles(weights):
    """(out, kh, kw) summary of a conv weight tensor, averaging input channels."""
    weights = np.asarray(weights)
    if weights.ndim != 4:
        raise DataError(f"expected (out, in, kh, kw) weights, got shape {weights.shape}")
    return weights.mean(axis=1)


def layer_activations(net, x):
    """Per-layer output tensors for one forward pass."""
    acts = []
    cur = np.asarray(x, dtype=net.dtype)
    for layer, params in zip(net.layers, net.params):
        cur, _ = layer.forward(cur, params)
        acts.append(cur)
    return acts
