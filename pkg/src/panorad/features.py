"""Dense local descriptors: SIFT, HOG (2x2 / 3x3 blocks), and color names.

All extractors walk a regular grid of square patches and return a
DescriptorSet whose entries carry the patch center (normalized to [0,1)^2)
alongside the descriptor vector. Gradient-based descriptors share one
gradient field per image: central differences with edge replication,
orientations folded to the unsigned range [0, pi).
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .image_io import GrayImage, RgbImage

# Fixed RGB prototypes for the 11 basic color terms, ordered to match the
# histogram bins. Values are conventional sRGB anchors on the unit scale.
COLOR_NAMES = (
    "black", "blue", "brown", "grey", "green", "orange",
    "pink", "purple", "red", "white", "yellow",
)
COLOR_PROTOTYPES = np.array(
    [
        [0.0, 0.0, 0.0],                      # black
        [0.0, 0.0, 1.0],                      # blue
        [139 / 255, 69 / 255, 19 / 255],      # brown
        [0.5, 0.5, 0.5],                      # grey
        [0.0, 0.5, 0.0],                      # green
        [1.0, 165 / 255, 0.0],                # orange
        [1.0, 192 / 255, 203 / 255],          # pink
        [0.5, 0.0, 0.5],                      # purple
        [1.0, 0.0, 0.0],                      # red
        [1.0, 1.0, 1.0],                      # white
        [1.0, 1.0, 0.0],                      # yellow
    ],
    dtype=np.float64,
)

SIFT_DIM = 128
_SIFT_SPATIAL_BINS = 4
_SIFT_ORI_BINS = 8
_HOG_BINS = 9
_CLIP = 0.2


@dataclass(frozen=True)
class GradientField:
    """Per-pixel gradient magnitude and unsigned orientation in [0, pi)."""

    magnitude: np.ndarray
    orientation: np.ndarray


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid: patch side and stride, both in pixels."""

    patch: int
    stride: int

    def __post_init__(self):
        if self.patch < 4:
            raise ConfigError(f"patch must be at least 4 px, got {self.patch}")
        if not 1 <= self.stride <= self.patch:
            raise ConfigError(f"stride must be in [1, patch], got {self.stride}")


@dataclass(frozen=True)
class DescriptorSet:
    """Positioned descriptors: centers (n, 2) in [0,1)^2 and vectors (n, dim)."""

    dim: int
    centers: np.ndarray
    vectors: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.centers, dtype=np.float64).reshape(-1, 2)
        v = np.asarray(self.vectors, dtype=np.float32).reshape(-1, self.dim)
        if c.shape[0] != v.shape[0]:
            raise DataError(f"{c.shape[0]} centers vs {v.shape[0]} vectors")
        if c.size and (c.min() < 0.0 or c.max() >= 1.0):
            raise DataError("descriptor centers must lie in [0, 1)^2")
        object.__setattr__(self, "centers", c)
        object.__setattr__(self, "vectors", v)

    def __len__(self):
        return self.vectors.shape[0]


def gradients(img: GrayImage) -> GradientField:
    """Central differences [-1, 0, 1] with edge replication."""
    if img.width < 3 or img.height < 3:
        raise DataError(f"image too small for gradients: {img.width}x{img.height} (need 3x3)")
    p = img.pixels.astype(np.float64)
    px = np.pad(p, ((0, 0), (1, 1)), mode="edge")
    py = np.pad(p, ((1, 1), (0, 0)), mode="edge")
    gx = px[:, 2:] - px[:, :-2]
    gy = py[2:, :] - py[:-2, :]
    mag = np.hypot(gx, gy)
    ori = np.mod(np.arctan2(gy, gx), np.pi)
    ori[ori >= np.pi] = 0.0
    return GradientField(magnitude=mag, orientation=ori)


def _grid_positions(w, h, grid: GridSpec):
    if grid.patch > w or grid.patch > h:
        raise DataError(f"patch {grid.patch} exceeds image {w}x{h}")
    xs = np.arange(0, w - grid.patch + 1, grid.stride)
    ys = np.arange(0, h - grid.patch + 1, grid.stride)
    return xs, ys


def _patch_centers(xs, ys, patch, w, h):
    """Normalized (cx, cy) for every (y, x) grid position, row-major."""
    cx = (xs + patch / 2.0) / w
    cy = (ys + patch / 2.0) / h
    gx, gy = np.meshgrid(cx, cy)
    return np.column_stack([gx.ravel(), gy.ravel()])


def _vote_planes(field: GradientField, nbins, centered):
    """Per-pixel orientation votes split linearly between adjacent bins.

    With ``centered`` the bin centers sit at (i + 0.5) * pi/nbins (an
    orientation of 0 splits between the first and last bin); otherwise
    centers sit at i * pi/nbins (0 lands wholly in bin 0). Wrap-around is
    circular in both cases because orientations are unsigned.
    """
    h, w = field.magnitude.shape
    width = np.pi / nbins
    pos = field.orientation / width - (0.5 if centered else 0.0)
    low = np.floor(pos)
    frac = pos - low
    i0 = (low.astype(np.int64)) % nbins
    i1 = (i0 + 1) % nbins
    planes = np.zeros((nbins, h, w), dtype=np.float64)
    flat = np.arange(h * w)
    pf = planes.reshape(nbins, -1)
    pf[i0.ravel(), flat] += (field.magnitude * (1.0 - frac)).ravel()
    pf[i1.ravel(), flat] += (field.magnitude * frac).ravel()
    return planes


def _clip_renorm(vecs, clip=_CLIP):
    """L2-normalize rows, clip at ``clip``, re-L2-normalize; zero rows stay zero."""
    out = np.asarray(vecs, dtype=np.float64).copy()
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    nz = norms[:, 0] > 0
    out[nz] /= norms[nz]
    np.minimum(out, clip, out=out)
    norms = np.linalg.norm(out, axis=1, keepdims=True)
    out[nz] /= norms[nz]
    return out


def _spatial_weights(patch, nbins):
    """Bilinear weight of each pixel offset toward each spatial bin center."""
    size = patch / nbins
    w = np.zeros((nbins, patch), dtype=np.float64)
    for u in range(patch):
        pos = (u + 0.5) / size - 0.5
        j = int(np.floor(pos))
        fr = pos - j
        if 0 <= j < nbins:
            w[j, u] += 1.0 - fr
        if 0 <= j + 1 < nbins:
            w[j + 1, u] += fr
    return w


def dense_sift(img: GrayImage, grid: GridSpec) -> DescriptorSet:
    """Dense SIFT: 4x4 spatial bins x 8 orientation bins per patch.

    Votes are weighted bilinearly toward spatial bin centers and linearly
    between the two nearest orientation bins; each descriptor gets the
    standard clipped renormalization (L2, clip 0.2, L2).
    """
    if img.width < 3 or img.height < 3:
        raise DataError(f"image too small: {img.width}x{img.height}")
    if grid.patch < 8 or grid.patch % 4 != 0:
        raise ConfigError(f"patch must be >= 8 and divisible by 4, got {grid.patch}")
    xs, ys = _grid_positions(img.width, img.height, grid)
    field = gradients(img)
    votes = _vote_planes(field, _SIFT_ORI_BINS, centered=True)
    sw = _spatial_weights(grid.patch, _SIFT_SPATIAL_BINS)
    descs = np.empty((len(ys) * len(xs), SIFT_DIM), dtype=np.float64)
    i = 0
    for y0 in ys:
        for x0 in xs:
            block = votes[:, y0:y0 + grid.patch, x0:x0 + grid.patch]
            d = np.einsum("jv,ku,ovu->jko", sw, sw, block)
            descs[i] = d.reshape(-1)
            i += 1
    centers = _patch_centers(xs, ys, grid.patch, img.width, img.height)
    return DescriptorSet(SIFT_DIM, centers, _clip_renorm(descs))


def _integral(planes):
    nb, h, w = planes.shape
    out = np.zeros((nb, h + 1, w + 1), dtype=np.float64)
    np.cumsum(np.cumsum(planes, axis=1), axis=2, out=out[:, 1:, 1:])
    return out


def _box_sum(integral, x0, y0, size):
    return (
        integral[:, y0 + size, x0 + size]
        - integral[:, y0, x0 + size]
        - integral[:, y0 + size, x0]
        + integral[:, y0, x0]
    )


def hog(img: GrayImage, cell: int, block_cells: int, grid: GridSpec = None) -> DescriptorSet:
    """HOG over square blocks of ``block_cells`` x ``block_cells`` cells.

    Nine unsigned orientation bins per cell (centers at multiples of 20
    degrees), cell histograms concatenated row-major, then the block vector
    is normalized with the same clipped-renorm scheme as SIFT.
    """
    if cell < 2:
        raise ConfigError(f"cell must be at least 2 px, got {cell}")
    if block_cells not in (2, 3):
        raise ConfigError(f"block_cells must be 2 or 3, got {block_cells}")
    patch = cell * block_cells
    if grid is None:
        grid = GridSpec(patch=patch, stride=cell)
    if grid.patch != patch:
        raise ConfigError(f"grid patch {grid.patch} != block side {patch}")
    xs, ys = _grid_positions(img.width, img.height, grid)
    field = gradients(img)
    votes = _integral(_vote_planes(field, _HOG_BINS, centered=False))
    dim = _HOG_BINS * block_cells * block_cells
    descs = np.empty((len(ys) * len(xs), dim), dtype=np.float64)
    i = 0
    for y0 in ys:
        for x0 in xs:
            hists = [
                _box_sum(votes, x0 + cx * cell, y0 + cy * cell, cell)
                for cy in range(block_cells)
                for cx in range(block_cells)
            ]
            descs[i] = np.concatenate(hists)
            i += 1
    centers = _patch_centers(xs, ys, patch, img.width, img.height)
    return DescriptorSet(dim, centers, _clip_renorm(descs))


def color_names(img: RgbImage, grids) -> DescriptorSet:
    """Histogram of nearest color-name prototypes per patch, L1-normalized.

    Multiple grids (patch sizes) pool into one set; ties in the nearest-
    prototype assignment go to the lower bin index.
    """
    grids = list(grids)
    if not grids:
        raise ConfigError("color_names requires at least one grid")
    pix = img.pixels.astype(np.float64)
    d2 = ((pix[:, :, None, :] - COLOR_PROTOTYPES[None, None, :, :]) ** 2).sum(axis=3)
    nearest = np.argmin(d2, axis=2)
    onehot = np.zeros((len(COLOR_NAMES),) + nearest.shape, dtype=np.float64)
    oh = onehot.reshape(len(COLOR_NAMES), -1)
    oh[nearest.ravel(), np.arange(nearest.size)] = 1.0
    counts = _integral(onehot)

    all_centers = []
    all_vecs = []
    for grid in grids:
        xs, ys = _grid_positions(img.width, img.height, grid)
        area = float(grid.patch * grid.patch)
        for y0 in ys:
            for x0 in xs:
                all_vecs.append(_box_sum(counts, x0, y0, grid.patch) / area)
        all_centers.append(_patch_centers(xs, ys, grid.patch, img.width, img.height))
    return DescriptorSet(
        len(COLOR_NAMES), np.concatenate(all_centers), np.array(all_vecs)
    )
