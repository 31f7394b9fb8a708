"""Graph-based grayscale segmentation with an adaptive merge threshold.

Pixels are graph nodes; edges connect 4- or 8-neighbors and weigh the
absolute smoothed-intensity difference. Components merge, in ascending
weight order, while the joining edge is no heavier than each side's
internal difference plus k/|C|; undersized components are then absorbed
across their lightest boundary edge. ``k`` is quoted on the conventional
0-255 intensity scale and rescaled internally to the [0, 1] samples.
"""

import colorsys
import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .image_io import CropRect, GrayImage, RgbImage


@dataclass(frozen=True)
class SegmentationConfig:
    """Merge-threshold scale, minimum component size, smoothing, topology."""

    k: float = 300.0
    min_size: int = 50
    sigma: float = 0.8
    connectivity: int = 8

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigError(f"k must be positive, got {self.k}")
        if self.min_size < 1:
            raise ConfigError(f"min_size must be >= 1, got {self.min_size}")
        if self.sigma < 0:
            raise ConfigError(f"sigma must be non-negative, got {self.sigma}")
        if self.connectivity not in (4, 8):
            raise ConfigError(f"connectivity must be 4 or 8, got {self.connectivity}")


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel segment ids, compact from 0; one id per connected region."""

    labels: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.labels)
        if a.ndim != 2 or a.size == 0:
            raise DataError(f"expected a nonempty (h, w) label array, got shape {a.shape}")
        a = np.ascontiguousarray(a.astype(np.intp))
        ids = np.unique(a)
        if ids[0] != 0 or ids[-1] != ids.size - 1:
            raise DataError("segment ids must be contiguous from 0")
        object.__setattr__(self, "labels", a)

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def segment_count(self):
        return int(self.labels.max()) + 1

    def sizes(self):
        """Pixel count per segment id."""
        return np.bincount(self.labels.ravel(), minlength=self.segment_count)


class DisjointSet:
    """Union-find over pixel ids with union by rank and path compression."""

    def __init__(self, n):
        self.parent = list(range(n))
        self.rank = [0] * n
        self.size = [1] * n

    def find(self, a):
        parent = self.parent
        root = a
        while parent[root] != root:
            root = parent[root]
        while parent[a] != root:
            parent[a], a = root, parent[a]
        return root

    def union(self, a, b):
        """Merge the components rooted at ``a`` and ``b``; returns the new root."""
        if self.rank[a] < self.rank[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        if self.rank[a] == self.rank[b]:
            self.rank[a] += 1
        return a


def _gaussian_smooth(plane, sigma):
    """Separable Gaussian blur with edge replication; identity for sigma=0."""
    plane = plane.astype(np.float64)
    if sigma <= 0:
        return plane
    radius = max(1, int(np.ceil(3.0 * sigma)))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    taps = np.exp(-0.5 * (xs / sigma) ** 2)
    taps /= taps.sum()
    for axis in (0, 1):
        padded = np.pad(plane, [(radius, radius) if ax == axis else (0, 0) for ax in (0, 1)],
                        mode="edge")
        acc = np.zeros_like(plane)
        for t, tap in enumerate(taps):
            sl = [slice(None), slice(None)]
            sl[axis] = slice(t, t + plane.shape[axis])
            acc += tap * padded[tuple(sl)]
        plane = acc
    return plane


def _edges(plane, connectivity):
    """(u, v, weight) arrays over neighbor pairs, u/v as flat pixel ids."""
    h, w = plane.shape
    ids = np.arange(h * w, dtype=np.intp).reshape(h, w)
    pairs = [
        (ids[:, :-1], ids[:, 1:]),
        (ids[:-1, :], ids[1:, :]),
    ]
    if connectivity == 8:
        pairs += [
            (ids[:-1, :-1], ids[1:, 1:]),
            (ids[:-1, 1:], ids[1:, :-1]),
        ]
    flat = plane.ravel()
    u = np.concatenate([a.ravel() for a, _ in pairs])
    v = np.concatenate([b.ravel() for _, b in pairs])
    return u, v, np.abs(flat[u] - flat[v])


def fh_segment(img: GrayImage, cfg: SegmentationConfig = None) -> LabelMap:
    """Segment a grayscale image; returns a compact per-pixel label map."""
    cfg = cfg or SegmentationConfig()
    h, w = img.height, img.width
    if h < 2 or w < 2:
        raise DataError(f"segmentation needs at least 2x2 pixels, got {w}x{h}")
    plane = _gaussian_smooth(img.pixels, cfg.sigma)
    u, v, wt = _edges(plane, cfg.connectivity)
    order = np.lexsort((v, u, wt))
    us = u[order].tolist()
    vs = v[order].tolist()
    ws = wt[order].tolist()

    n = h * w
    k_eff = cfg.k / 255.0
    dsu = DisjointSet(n)
    internal = [0.0] * n
    size = dsu.size
    find = dsu.find
    for eu, ev, ew in zip(us, vs, ws):
        a = find(eu)
        b = find(ev)
        if a == b:
            continue
        if ew <= internal[a] + k_eff / size[a] and ew <= internal[b] + k_eff / size[b]:
            internal[dsu.union(a, b)] = ew

    min_size = min(cfg.min_size, n)
    for eu, ev in zip(us, vs):
        a = find(eu)
        b = find(ev)
        if a != b and (size[a] < min_size or size[b] < min_size):
            dsu.union(a, b)

    roots = np.fromiter((find(i) for i in range(n)), dtype=np.intp, count=n)
    uniq, first_idx, inverse = np.unique(roots, return_index=True, return_inverse=True)
    remap = np.empty(uniq.size, dtype=np.intp)
    remap[np.argsort(first_idx, kind="stable")] = np.arange(uniq.size)
    return LabelMap(remap[inverse].reshape(h, w))


def _bounding_boxes(label_map: LabelMap):
    """Per-segment (x0, y0, x1, y1) inclusive bounds, indexed by id."""
    labels = label_map.labels
    s = label_map.segment_count
    ys, xs = np.indices(labels.shape)
    flat = labels.ravel()
    x0 = np.full(s, label_map.width, dtype=np.intp)
    y0 = np.full(s, label_map.height, dtype=np.intp)
    x1 = np.full(s, -1, dtype=np.intp)
    y1 = np.full(s, -1, dtype=np.intp)
    np.minimum.at(x0, flat, xs.ravel())
    np.minimum.at(y0, flat, ys.ravel())
    np.maximum.at(x1, flat, xs.ravel())
    np.maximum.at(y1, flat, ys.ravel())
    return x0, y0, x1, y1


def roi_rects(label_map: LabelMap, min_area: int = 1):
    """Bounding boxes of segments with at least ``min_area`` pixels.

    Sorted by descending pixel count; equal-sized segments keep id order.
    """
    sizes = label_map.sizes()
    x0, y0, x1, y1 = _bounding_boxes(label_map)
    picked = [s for s in range(label_map.segment_count) if sizes[s] >= min_area]
    picked.sort(key=lambda s: (-sizes[s], s))
    return [
        CropRect(int(x0[s]), int(y0[s]), int(x1[s] - x0[s] + 1), int(y1[s] - y0[s] + 1))
        for s in picked
    ]


def write_segment_csv(path, label_map: LabelMap):
    """One row per segment: id, pixel count, bounding box."""
    sizes = label_map.sizes()
    x0, y0, x1, y1 = _bounding_boxes(label_map)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["segment", "size", "x0", "y0", "w", "h"])
        for s in range(label_map.segment_count):
            writer.writerow([s, int(sizes[s]), int(x0[s]), int(y0[s]),
                             int(x1[s] - x0[s] + 1), int(y1[s] - y0[s] + 1)])


def label_colors(label_map: LabelMap) -> RgbImage:
    """False-color rendering: golden-ratio hue walk gives distinct segment colors."""
    s = label_map.segment_count
    palette = np.empty((s, 3), dtype=np.float32)
    for i in range(s):
        palette[i] = colorsys.hsv_to_rgb((0.12 + i * 0.618033988749895) % 1.0, 0.65, 0.95)
    return RgbImage(palette[label_map.labels])
