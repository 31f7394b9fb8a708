"""Synthetic datasets: glyph classification, scale-shifted rings, fold fixtures.

Real radiographs are private, so the pipelines are exercised on generated
data: ten procedurally drawn glyph shapes with jittered geometry, and a
binary ring/disc task whose test split is scale-shifted relative to its
training split (which is what zoom augmentation is meant to absorb).
"""

import os

import numpy as np

from .errors import ConfigError
from .evaluation import SEX_LABELS, SampleRecord, fdi_names
from .image_io import GrayImage, write_pgm
from .manifest import write_manifest

GLYPH_CLASS_COUNT = 10


def _glyph_mask(cls, size, cx, cy, r, t):
    yy, xx = np.indices((size, size), dtype=np.float64)
    dx = xx - cx
    dy = yy - cy
    ax, ay = np.abs(dx), np.abs(dy)
    dist = np.hypot(dx, dy)
    box = (ax <= r) & (ay <= r)
    if cls == 0:  # horizontal bar
        return (ay <= t) & (ax <= r)
    if cls == 1:  # vertical bar
        return (ax <= t) & (ay <= r)
    if cls == 2:  # plus
        return ((ay <= t) & (ax <= r)) | ((ax <= t) & (ay <= r))
    if cls == 3:  # two diagonals
        return ((np.abs(dy - dx) <= t) | (np.abs(dy + dx) <= t)) & box
    if cls == 4:  # ring
        return np.abs(dist - r) <= t
    if cls == 5:  # filled disc
        return dist <= r
    if cls == 6:  # square outline
        side = np.maximum(ax, ay)
        return (side <= r) & (side >= r - 1.8 * t)
    if cls == 7:  # filled triangle, apex up
        return (dy >= -r) & (dy <= r) & (ax <= (dy + r) * 0.5)
    if cls == 8:  # diamond outline
        l1 = ax + ay
        return (l1 <= r * 1.2) & (l1 >= r * 1.2 - 1.8 * t)
    if cls == 9:  # diagonal stripes
        return box & ((xx + yy) % 8.0 < 4.0)
    raise ConfigError(f"glyph class must be 0-{GLYPH_CLASS_COUNT - 1}, got {cls}")


def glyph_image(cls, rng, size=64):
    """One jittered rendering of a glyph class on a noisy dark background."""
    unit = size / 64.0
    bg = rng.uniform(0.05, 0.12)
    img = rng.normal(bg, 0.03, (size, size))
    cx = size / 2 + rng.uniform(-4.0, 4.0) * unit
    cy = size / 2 + rng.uniform(-4.0, 4.0) * unit
    r = 13.0 * unit * rng.uniform(0.8, 1.15)
    t = rng.uniform(2.2, 3.5) * unit
    mask = _glyph_mask(cls, size, cx, cy, r, t)
    fg = rng.uniform(0.65, 0.95)
    img[mask] = fg + rng.normal(0.0, 0.02, int(mask.sum()))
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def glyph_dataset(train_per_class=50, test_per_class=20, size=64, seed=0,
                  n_classes=GLYPH_CLASS_COUNT):
    """(train_x, train_y, test_x, test_y); images are (n, 1, size, size)."""
    if not 2 <= n_classes <= GLYPH_CLASS_COUNT:
        raise ConfigError(f"n_classes must be 2-{GLYPH_CLASS_COUNT}, got {n_classes}")
    rng = np.random.default_rng(seed)
    splits = []
    for per_class in (train_per_class, test_per_class):
        xs, ys = [], []
        for cls in range(n_classes):
            for _ in range(per_class):
                xs.append(glyph_image(cls, rng, size))
                ys.append(cls)
        splits += [np.stack(xs)[:, None], np.array(ys, dtype=np.intp)]
    return tuple(splits)


def ring_disc_image(cls, rng, size=32, scale_range=(0.3, 0.3)):
    """Binary shapes: 0 = ring, 1 = disc, radius drawn from scale_range*size."""
    img = rng.normal(0.08, 0.05, (size, size))
    cx = size / 2 + rng.uniform(-2.0, 2.0)
    cy = size / 2 + rng.uniform(-2.0, 2.0)
    r = size * rng.uniform(*scale_range)
    yy, xx = np.indices((size, size), dtype=np.float64)
    dist = np.hypot(xx - cx, yy - cy)
    mask = np.abs(dist - r) <= 2.0 if cls == 0 else dist <= r
    img[mask] = rng.uniform(0.7, 0.95)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def ring_disc_dataset(train_per_class=50, test_per_class=50, size=32, seed=0):
    """Train at a fixed shape scale; test over a wider scale spread."""
    rng = np.random.default_rng(seed)
    out = []
    for per_class, scales in ((train_per_class, (0.29, 0.31)),
                              (test_per_class, (0.20, 0.40))):
        xs, ys = [], []
        for cls in (0, 1):
            for _ in range(per_class):
                xs.append(ring_disc_image(cls, rng, size, scales))
                ys.append(cls)
        out += [np.stack(xs)[:, None], np.array(ys, dtype=np.intp)]
    return tuple(out)


def _write_split(base, arrays, labels, names, split, records):
    for i, (arr, y) in enumerate(zip(arrays, labels)):
        rel = os.path.join("images", f"{split}_{i:04d}.pgm")
        write_pgm(os.path.join(base, rel), GrayImage(arr[0]))
        # Manifest paths stay relative to the manifest so the tree relocates.
        records.append(SampleRecord(path=rel, label=names[y],
                                    patient_id=f"{split}{i:04d}", split=split))


def write_glyph_fixture(out_dir, train_per_class=50, test_per_class=20, size=64,
                        seed=0, n_classes=GLYPH_CLASS_COUNT):
    """PGM images + manifest.csv for the glyph task; labels reuse tooth names."""
    train_x, train_y, test_x, test_y = glyph_dataset(
        train_per_class, test_per_class, size, seed, n_classes)
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    names = fdi_names()[:n_classes]
    records = []
    _write_split(out_dir, train_x, train_y, names, "train", records)
    _write_split(out_dir, test_x, test_y, names, "test", records)
    manifest_path = os.path.join(out_dir, "manifest.csv")
    write_manifest(manifest_path, records)
    return manifest_path


def write_ring_disc_fixture(out_dir, train_per_class=50, test_per_class=50,
                            size=32, seed=0):
    """PGM images + manifest.csv for the binary task; labels are sex codes."""
    train_x, train_y, test_x, test_y = ring_disc_dataset(
        train_per_class, test_per_class, size, seed)
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    records = []
    _write_split(out_dir, train_x, train_y, SEX_LABELS, "train", records)
    _write_split(out_dir, test_x, test_y, SEX_LABELS, "test", records)
    manifest_path = os.path.join(out_dir, "manifest.csv")
    write_manifest(manifest_path, records)
    return manifest_path


def fold_fixture_records(n_patients=140, images_each=28):
    """Manifest rows for fold arithmetic: every patient owns one image per class."""
    if n_patients < 1 or images_each < 1:
        raise ConfigError(
            f"need at least one patient and one image, got {n_patients}/{images_each}"
        )
    names = fdi_names()
    return [
        SampleRecord(path=f"images/p{p:03d}_t{i:02d}.pgm", label=names[i % len(names)],
                     patient_id=f"p{p:03d}")
        for p in range(n_patients)
        for i in range(images_each)
    ]
