"""Image decode/encode and geometric preprocessing.

Raster containers hold float32 samples in [0, 1]. Supported codecs are
binary PGM (P5) and PPM (P6) at 8 bits, plus 8-bit grayscale/RGB PNG.
PGM/PPM are parsed and written here so the 8-bit round trip is exact;
PNG goes through Pillow.
"""

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image as PilImage

from .errors import ConfigError, DataError

# Rec.601 luma weights for RGB -> gray conversion.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float64)


def _as_samples(pixels, channels):
    a = np.asarray(pixels, dtype=np.float32)
    want = 2 if channels == 1 else 3
    if a.ndim != want or (channels == 3 and a.shape[2] != 3):
        raise DataError(f"expected {'(h, w)' if channels == 1 else '(h, w, 3)'} array, got shape {a.shape}")
    if a.size == 0:
        raise DataError("empty image")
    if not np.all(np.isfinite(a)):
        raise DataError("image contains non-finite samples")
    lo, hi = float(a.min()), float(a.max())
    if lo < -1e-6 or hi > 1 + 1e-6:
        raise DataError(f"samples outside [0, 1]: min={lo}, max={hi}")
    return np.ascontiguousarray(np.clip(a, 0.0, 1.0))


@dataclass(frozen=True)
class GrayImage:
    """Single-channel raster, float32 in [0, 1], row-major (h, w)."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_samples(self.pixels, 1))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def data(self):
        """Row-major flat view, length width*height."""
        return self.pixels.reshape(-1)


@dataclass(frozen=True)
class RgbImage:
    """Three-channel raster, float32 in [0, 1], shape (h, w, 3)."""

    pixels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "pixels", _as_samples(self.pixels, 3))

    @property
    def width(self):
        return self.pixels.shape[1]

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def data(self):
        """Interleaved R,G,B flat view, length 3*width*height."""
        return self.pixels.reshape(-1)


@dataclass(frozen=True)
class CropRect:
    """Axis-aligned crop window; must lie fully inside its source image."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self):
        if self.w < 1 or self.h < 1:
            raise ConfigError(f"crop window must be at least 1x1, got {self.w}x{self.h}")
        if self.x0 < 0 or self.y0 < 0:
            raise ConfigError(f"crop origin must be non-negative, got ({self.x0}, {self.y0})")


@dataclass(frozen=True)
class AugmentConfig:
    """Random-transform settings for the sex-study augmentation modes.

    mode "none" passes images through; "zoom" scales about the center by a
    factor drawn from zoom_range; "shear" applies a horizontal shear with a
    factor drawn from [-shear_range, +shear_range]. Resampling is bilinear
    and out-of-frame pixels are filled with 0 (radiograph background).
    """

    mode: str = "none"
    shear_range: float = 0.2
    zoom_range: tuple = (0.8, 1.2)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("none", "shear", "zoom"):
            raise ConfigError(f"unknown augment mode {self.mode!r}")
        if not np.isfinite(self.shear_range):
            raise ConfigError("shear_range must be finite")
        lo, hi = self.zoom_range
        if not (0 < lo <= hi) or not np.isfinite(hi):
            raise ConfigError(f"zoom_range must be a positive interval, got {self.zoom_range}")


# ---------------------------------------------------------------------------
# Decode / encode
# ---------------------------------------------------------------------------

def _parse_pnm_header(data, magic):
    """Parse a P5/P6 header, returning (width, height, maxval, payload offset)."""
    pos = 2
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise DataError(f"malformed {magic} header: ran out of bytes")
        c = data[pos:pos + 1]
        if c.isspace():
            pos += 1
        elif c == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise DataError(f"malformed {magic} header: unterminated comment")
            pos = nl + 1
        elif c.isdigit():
            start = pos
            while pos < len(data) and data[pos:pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise DataError(f"malformed {magic} header: unexpected byte {c!r}")
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise DataError(f"malformed {magic} header: missing whitespace after maxval")
    pos += 1
    w, h, maxval = fields
    if w < 1 or h < 1:
        raise DataError(f"malformed {magic} header: bad dimensions {w}x{h}")
    if maxval != 255:
        raise DataError(f"unsupported bit depth: maxval {maxval} (only 8-bit, maxval 255)")
    return w, h, maxval, pos


def _decode_pnm(data):
    magic = data[:2].decode("ascii", "replace")
    channels = 1 if magic == "P5" else 3
    w, h, _, offset = _parse_pnm_header(data, magic)
    need = w * h * channels
    payload = data[offset:offset + need]
    if len(payload) < need:
        raise DataError(f"truncated {magic} payload: expected {need} bytes, got {len(payload)}")
    raw = np.frombuffer(payload, dtype=np.uint8).astype(np.float32) / 255.0
    if channels == 1:
        return GrayImage(raw.reshape(h, w))
    return RgbImage(raw.reshape(h, w, 3))


def _decode_png(data):
    try:
        img = PilImage.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise DataError(f"malformed PNG: {exc}") from exc
    if img.mode == "P":
        img = img.convert("RGB")
    if img.mode == "L":
        raw = np.asarray(img, dtype=np.uint8).astype(np.float32) / 255.0
        return GrayImage(raw)
    if img.mode == "RGB":
        raw = np.asarray(img, dtype=np.uint8).astype(np.float32) / 255.0
        return RgbImage(raw)
    raise DataError(f"unsupported bit depth or mode for PNG: {img.mode!r} (only 8-bit gray/RGB)")


def decode(data: bytes):
    """Decode PGM (P5), PPM (P6) or PNG bytes into a Gray/RgbImage.

    8-bit samples map to [0, 1] as v/255.
    """
    if len(data) < 2:
        raise DataError("malformed header: fewer than 2 bytes")
    if data[:2] == b"P5" or data[:2] == b"P6":
        return _decode_pnm(data)
    if data[:8] == b"\x89PNG\r\n\x1a\n":
        return _decode_png(data)
    raise DataError(f"malformed header: unrecognized magic {data[:2]!r}")


def read_image(path):
    try:
        with open(path, "rb") as fh:
            return decode(fh.read())
    except OSError as exc:
        raise DataError(f"cannot read image {path}: {exc}") from exc


def _quantize(pixels):
    return np.clip(np.rint(pixels.astype(np.float64) * 255.0), 0, 255).astype(np.uint8)


def encode_pgm(img: GrayImage) -> bytes:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + _quantize(img.pixels).tobytes()


def encode_ppm(img: RgbImage) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + _quantize(img.pixels).tobytes()


def write_pgm(path, img: GrayImage):
    with open(path, "wb") as fh:
        fh.write(encode_pgm(img))


def write_png(path, img):
    """Write a Gray/RgbImage as 8-bit PNG."""
    raw = _quantize(img.pixels)
    mode = "L" if isinstance(img, GrayImage) else "RGB"
    PilImage.fromarray(raw, mode=mode).save(path, format="PNG")


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------

def to_gray(img: RgbImage) -> GrayImage:
    """Rec.601 luma conversion: y = 0.299 R + 0.587 G + 0.114 B."""
    y = img.pixels.astype(np.float64) @ _LUMA
    return GrayImage(np.clip(y, 0.0, 1.0).astype(np.float32))


def to_rgb(img: GrayImage) -> RgbImage:
    """Promote a grayscale image by replicating the channel."""
    return RgbImage(np.repeat(img.pixels[:, :, None], 3, axis=2))


def _bilinear_sample(plane, xs, ys):
    """Sample a 2-d float array at float coords with edge clamping."""
    h, w = plane.shape
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0
    top = plane[y0, x0] * (1 - fx) + plane[y0, x1] * fx
    bot = plane[y1, x0] * (1 - fx) + plane[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def resize_bilinear(img, w: int, h: int):
    """Resize with bilinear interpolation (half-pixel centers, edge clamp)."""
    if w < 1 or h < 1:
        raise ConfigError(f"zero or negative output dimension {w}x{h}")
    if w == img.width and h == img.height:
        return img
    sx = img.width / w
    sy = img.height / h
    xs = (np.arange(w, dtype=np.float64) + 0.5) * sx - 0.5
    ys = (np.arange(h, dtype=np.float64) + 0.5) * sy - 0.5
    gx, gy = np.meshgrid(xs, ys)
    if isinstance(img, GrayImage):
        out = _bilinear_sample(img.pixels.astype(np.float64), gx, gy)
        return GrayImage(np.clip(out, 0.0, 1.0).astype(np.float32))
    planes = [_bilinear_sample(img.pixels[:, :, c].astype(np.float64), gx, gy) for c in range(3)]
    return RgbImage(np.clip(np.stack(planes, axis=2), 0.0, 1.0).astype(np.float32))


def crop(img, r: CropRect):
    """Exact pixel copy of the window; the rect must lie inside the image."""
    if r.x0 + r.w > img.width or r.y0 + r.h > img.height:
        raise DataError(
            f"crop out of bounds: rect ({r.x0},{r.y0},{r.w},{r.h}) vs image {img.width}x{img.height}"
        )
    window = np.ascontiguousarray(img.pixels[r.y0:r.y0 + r.h, r.x0:r.x0 + r.w])
    return GrayImage(window) if isinstance(img, GrayImage) else RgbImage(window)


def _affine_sample_zero_fill(plane, inv_map):
    """Inverse-map each output pixel through inv_map and sample bilinearly.

    Out-of-frame source coordinates contribute 0: the plane is padded with
    a one-pixel zero rim so border samples blend toward the fill value.
    """
    h, w = plane.shape
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64), np.arange(h, dtype=np.float64))
    sx, sy = inv_map(gx, gy)
    padded = np.pad(plane, 1, mode="constant")
    vals = _bilinear_sample(padded, sx + 1.0, sy + 1.0)
    inside = (sx > -1.0) & (sx < w) & (sy > -1.0) & (sy < h)
    return np.where(inside, vals, 0.0)


def augment(img: GrayImage, cfg: AugmentConfig) -> GrayImage:
    """Apply the configured random transform; pure in (img, cfg)."""
    if cfg.mode == "none":
        return img
    rng = np.random.default_rng(cfg.seed)
    plane = img.pixels.astype(np.float64)
    cx = (img.width - 1) / 2.0
    cy = (img.height - 1) / 2.0
    if cfg.mode == "zoom":
        z = rng.uniform(cfg.zoom_range[0], cfg.zoom_range[1])

        def inv_map(x, y):
            return (x - cx) / z + cx, (y - cy) / z + cy
    else:
        s = rng.uniform(-cfg.shear_range, cfg.shear_range)

        def inv_map(x, y):
            return x - s * (y - cy), y

    out = _affine_sample_zero_fill(plane, inv_map)
    return GrayImage(np.clip(out, 0.0, 1.0).astype(np.float32))
