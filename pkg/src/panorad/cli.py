"""Command-line interface.

Subcommands: extract | train | eval | sweep | viz-hog | viz-filters |
segment | fixtures. Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numeric failure.
"""

import argparse
import dataclasses
import os
import sys

from .config import PipelineConfig, load_config
from .errors import ConfigError, DataError, NumericError, ToolError
from .fixtures import write_glyph_fixture, write_ring_disc_fixture
from .image_io import RgbImage, read_image, resize_bilinear, to_gray, write_png
from .manifest import read_manifest
from .nn.layers import Conv2d
from .pipeline import (
    DEFAULT_SWEEP_VALUES,
    SWEEP_AXES,
    CnnModel,
    load_model,
    run_eval,
    run_extract,
    run_sweep,
    run_train,
)
from .segment import SegmentationConfig, fh_segment, label_colors, write_segment_csv
from .viz import conv_weight_tiles, hog_glyph, layer_activations, tile_grid

EXIT_CODES = ((ConfigError, 2), (DataError, 3), (NumericError, 4))


def _resolve_threads(args_threads, cfg_threads):
    """Precedence: --threads flag, then environment, then the config value."""
    if args_threads is not None:
        return args_threads
    env = os.environ.get("PANORAD_THREADS")
    if env:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"PANORAD_THREADS must be an integer, got {env!r}") from exc
    return cfg_threads


def _load_pipeline_config(args, manifest_path=None):
    task = None
    if manifest_path:
        task = read_manifest(manifest_path).task
    if args.config:
        cfg = load_config(args.config, task=task)
    else:
        cfg = PipelineConfig() if task != "sex" else PipelineConfig(input_size=640)
    if getattr(args, "seed", None) is not None:
        cfg = dataclasses.replace(cfg, seed=args.seed)
    return cfg


def cmd_extract(args):
    cfg = _load_pipeline_config(args, args.manifest)
    threads = _resolve_threads(args.threads, cfg.threads)
    run_extract(args.manifest, cfg, args.out, threads=threads)
    return 0


def cmd_train(args):
    cfg = _load_pipeline_config(args, args.manifest)
    threads = _resolve_threads(args.threads, cfg.threads)
    run_train(args.manifest, cfg, args.out, threads=threads)
    return 0


def cmd_eval(args):
    threads = _resolve_threads(args.threads, 1)
    run_eval(args.manifest, args.model, args.out, kfold=args.kfold, threads=threads)
    return 0


def _parse_sweep_values(axis, text):
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise ConfigError("--values must list at least one number")
    try:
        if axis == "train_size":
            return [float(p) for p in parts]
        return [int(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"bad --values entry for axis {axis}: {exc}") from exc


def cmd_sweep(args):
    cfg = _load_pipeline_config(args, args.manifest)
    threads = _resolve_threads(args.threads, cfg.threads)
    if args.axis not in SWEEP_AXES:
        raise ConfigError(f"axis must be one of {SWEEP_AXES}, got {args.axis!r}")
    values = (
        _parse_sweep_values(args.axis, args.values)
        if args.values
        else list(DEFAULT_SWEEP_VALUES[args.axis])
    )
    run_sweep(args.manifest, cfg, args.axis, values, args.out, threads=threads)
    return 0


def cmd_viz_hog(args):
    img = read_image(args.image)
    if isinstance(img, RgbImage):
        img = to_gray(img)
    glyph = hog_glyph(img, cell=args.cell, scale=args.scale)
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "hog_glyph.png")
    write_png(out_path, glyph)
    print(f"glyph written: {out_path} ({glyph.width}x{glyph.height})")
    return 0


def _nth_conv(net, n):
    convs = [
        (i, layer) for i, layer in enumerate(net.layers) if isinstance(layer, Conv2d)
    ]
    if not 1 <= n <= len(convs):
        raise ConfigError(
            f"layer must be in [1, {len(convs)}] (convolution stages), got {n}"
        )
    return convs[n - 1][0]


def cmd_viz_filters(args):
    model = load_model(args.model)
    if not isinstance(model, CnnModel):
        raise DataError("filter visualization requires a convolutional model")
    net = model.net
    idx = _nth_conv(net, args.layer)
    os.makedirs(args.out, exist_ok=True)
    if args.input:
        img = read_image(args.input)
        if isinstance(img, RgbImage):
            img = to_gray(img)
        size = model.config.input_size
        if (img.width, img.height) != (size, size):
            img = resize_bilinear(img, size, size)
        acts = layer_activations(net, img.pixels[None, None])
        grid = tile_grid(acts[idx][0])
        out_path = os.path.join(args.out, f"activations_layer{args.layer}.png")
    else:
        grid = tile_grid(conv_weight_tiles(net.params[idx]["w"]))
        out_path = os.path.join(args.out, f"filters_layer{args.layer}.png")
    write_png(out_path, grid)
    print(f"grid written: {out_path} ({grid.width}x{grid.height})")
    return 0


def cmd_segment(args):
    img = read_image(args.image)
    if isinstance(img, RgbImage):
        img = to_gray(img)
    cfg = SegmentationConfig(
        k=args.k, min_size=args.min_size, sigma=args.sigma,
        connectivity=args.connectivity,
    )
    labels = fh_segment(img, cfg)
    os.makedirs(args.out, exist_ok=True)
    write_png(os.path.join(args.out, "segments.png"), label_colors(labels))
    write_segment_csv(os.path.join(args.out, "segments.csv"), labels)
    print(
        f"{labels.segment_count} segments written: "
        f"{os.path.join(args.out, 'segments.png')}"
    )
    return 0


def cmd_fixtures(args):
    if args.action != "generate":
        raise ConfigError(f"unknown fixtures action {args.action!r}")
    glyph_manifest = write_glyph_fixture(
        os.path.join(args.out, "glyphs"),
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        size=args.size,
        seed=args.seed or 0,
    )
    ring_manifest = write_ring_disc_fixture(
        os.path.join(args.out, "ring_disc"),
        train_per_class=args.train_per_class,
        test_per_class=args.test_per_class,
        size=max(32, args.size // 2),
        seed=args.seed or 0,
    )
    print(f"glyph manifest: {glyph_manifest}")
    print(f"ring-disc manifest: {ring_manifest}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="panorad",
        description="Dental radiograph classification pipelines "
        "(bag-of-words and convolutional).",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, manifest=True, config=True):
        if manifest:
            p.add_argument("--manifest", required=True, help="dataset CSV")
        if config:
            p.add_argument("--config", help="pipeline JSON config")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--threads", type=int, help="worker thread count")

    p = sub.add_parser("extract", help="write per-image descriptor files")
    common(p)
    p.set_defaults(fn=cmd_extract)

    p = sub.add_parser("train", help="train a model on the train split")
    common(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="score a model and write report CSVs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="model container file")
    p.add_argument("--out", required=True)
    p.add_argument("--kfold", type=int, help="patient-level k-fold retraining")
    p.add_argument("--threads", type=int)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("sweep", help="accuracy curve over one hyperparameter")
    common(p)
    p.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p.add_argument("--values", help="comma-separated axis values")
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("viz-hog", help="oriented-gradient glyph image")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--cell", type=int, default=8)
    p.add_argument("--scale", type=int, default=1)
    p.set_defaults(fn=cmd_viz_hog)

    p = sub.add_parser("viz-filters", help="convolution weight/activation grids")
    p.add_argument("--model", required=True)
    p.add_argument("--layer", type=int, required=True, choices=(1, 2))
    p.add_argument("--input", help="image whose activations to render")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_viz_filters)

    p = sub.add_parser("segment", help="graph-based segmentation map + regions CSV")
    p.add_argument("image")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=float, default=300.0)
    p.add_argument("--min-size", type=int, default=50)
    p.add_argument("--sigma", type=float, default=0.8)
    p.add_argument("--connectivity", type=int, default=8, choices=(4, 8))
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("fixtures", help="generate synthetic datasets")
    p.add_argument("action", nargs="?", default="generate", choices=("generate",))
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--size", type=int, default=64)
    p.add_argument("--train-per-class", type=int, default=50)
    p.add_argument("--test-per-class", type=int, default=20)
    p.set_defaults(fn=cmd_fixtures)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ToolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        for kind, code in EXIT_CODES:
            if isinstance(exc, kind):
                return code
        return 1


if __name__ == "__main__":
    sys.exit(main())
