"""Disk loading, resizing, and augmentation of (radiograph, mask) pairs.

Geometry conventions shared by resize and augmentation:

- sampling coordinates use pixel centers: output pixel (i, j) samples the
  input at ``src = (dst + 0.5) * in_size / out_size - 0.5`` for resize;
- radiographs are sampled bilinearly, masks with nearest neighbor
  (``floor(src + 0.5)``) — class ids are never interpolated;
- rotation angles are in degrees, positive = clockwise on screen
  (y axis points down); the transform order is rotate, flip, translate;
- samples falling outside the input are filled with class 0 / intensity 0.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidSpec, MissingMask
from .imageio import list_pngs, read_gray, read_rgb
from .palette import ClassPalette, encode_mask
from .phantom import SamplePair
from .rng import Stream, derive_seed

DEFAULT_ROTATIONS = (0.0, 5.0, -5.0, 10.0, -10.0, 90.0, 180.0, 270.0)


@dataclass(frozen=True)
class AugmentSpec:
    rotation_degrees: tuple[float, ...] = DEFAULT_ROTATIONS
    allow_hflip: bool = True
    allow_vflip: bool = True
    max_translate: int = 16
    intensity_delta: float = 0.1
    expansion_factor: int = 360

    def validate(self):
        if self.expansion_factor < 1:
            raise InvalidSpec(f"expansion_factor must be >= 1, got {self.expansion_factor}")
        if not 0.0 <= self.intensity_delta <= 1.0:
            raise InvalidSpec(f"intensity_delta must be in [0,1], got {self.intensity_delta}")
        if self.max_translate < 0:
            raise InvalidSpec(f"max_translate must be >= 0, got {self.max_translate}")


@dataclass(frozen=True)
class Transform:
    """One sampled augmentation: rotate, flip, translate, shift intensity."""

    angle: float = 0.0
    hflip: bool = False
    vflip: bool = False
    dx: int = 0
    dy: int = 0
    intensity_shift: float = 0.0  # on the [-1, 1] normalized scale


@dataclass(eq=False)
class Dataset:
    pairs: list
    input_size: int


def _source_coords(h: int, w: int, t: Transform):
    """Map output pixel centers back to input coordinates for transform t."""
    ys, xs = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    # undo translation
    xs = xs - t.dx
    ys = ys - t.dy
    # undo flips about the image center
    if t.hflip:
        xs = (w - 1) - xs
    if t.vflip:
        ys = (h - 1) - ys
    # undo rotation: forward rotates content clockwise by angle about center
    angle = t.angle % 360.0
    if angle != 0.0:
        # exact trig at quarter turns keeps them pure index permutations
        exact = {90.0: (0.0, 1.0), 180.0: (-1.0, 0.0), 270.0: (0.0, -1.0)}
        if angle in exact:
            c, s = exact[angle]
        else:
            theta = math.radians(angle)
            c, s = math.cos(theta), math.sin(theta)
        cx, cy = (w - 1) / 2.0, (h - 1) / 2.0
        rx, ry = xs - cx, ys - cy
        xs = cx + c * rx + s * ry
        ys = cy - s * rx + c * ry
    return xs, ys


def sample_bilinear(image: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill: float) -> np.ndarray:
    """Bilinear sampling with out-of-bounds fill; exact where weights are 0/1."""
    h, w = image.shape
    inside = (xs >= 0.0) & (xs <= w - 1.0) & (ys >= 0.0) & (ys <= h - 1.0)
    x0 = np.floor(xs)
    y0 = np.floor(ys)
    wx = xs - x0
    wy = ys - y0
    x0i = np.clip(x0.astype(np.int64), 0, w - 1)
    y0i = np.clip(y0.astype(np.int64), 0, h - 1)
    x1i = np.clip(x0i + 1, 0, w - 1)
    y1i = np.clip(y0i + 1, 0, h - 1)
    img = image.astype(np.float64)
    top = img[y0i, x0i] * (1.0 - wx) + img[y0i, x1i] * wx
    bot = img[y1i, x0i] * (1.0 - wx) + img[y1i, x1i] * wx
    out = top * (1.0 - wy) + bot * wy
    return np.where(inside, out, fill)


def sample_nearest(image: np.ndarray, xs: np.ndarray, ys: np.ndarray, fill) -> np.ndarray:
    """Nearest-neighbor sampling (round half up) with out-of-bounds fill."""
    h, w = image.shape
    xi = np.floor(xs + 0.5).astype(np.int64)
    yi = np.floor(ys + 0.5).astype(np.int64)
    inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out = image[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
    return np.where(inside, out, fill).astype(image.dtype)


def apply_transform(pair: SamplePair, t: Transform) -> SamplePair:
    """Apply the same geometric transform to radiograph (bilinear) and mask
    (nearest); the intensity shift touches the radiograph only."""
    h, w = pair.mask.shape
    xs, ys = _source_coords(h, w, t)
    radio = sample_bilinear(pair.radiograph, xs, ys, fill=0.0)
    radio = radio + t.intensity_shift * 127.5
    radio = np.floor(np.clip(radio, 0.0, 255.0) + 0.5).astype(np.uint8)
    mask = sample_nearest(pair.mask, xs, ys, fill=np.uint8(0))
    return SamplePair(pair.id, radio, mask)


def sample_transform(spec: AugmentSpec, pair_id: str, seed: int) -> Transform:
    """Draw one transform from the stream keyed by (seed, pair id)."""
    spec.validate()
    rng = Stream(derive_seed(seed, "augment", pair_id))
    angle = float(rng.choice(spec.rotation_degrees)) if spec.rotation_degrees else 0.0
    hflip = spec.allow_hflip and rng.chance(0.5)
    vflip = spec.allow_vflip and rng.chance(0.5)
    if spec.max_translate > 0:
        dx = rng.integer(-spec.max_translate, spec.max_translate + 1)
        dy = rng.integer(-spec.max_translate, spec.max_translate + 1)
    else:
        dx = dy = 0
    shift = float(rng.uniform(1, -spec.intensity_delta, spec.intensity_delta)[0]) if spec.intensity_delta > 0 else 0.0
    return Transform(angle=angle, hflip=hflip, vflip=vflip, dx=dx, dy=dy, intensity_shift=shift)


def augment(pair: SamplePair, spec: AugmentSpec, seed: int) -> SamplePair:
    """Deterministic augmented copy of a pair for (pair.id, seed)."""
    if spec.max_translate >= min(pair.mask.shape):
        raise InvalidSpec("max_translate must be smaller than the image size")
    return apply_transform(pair, sample_transform(spec, pair.id, seed))


def _resize_grid(h: int, w: int, size: int):
    ys = (np.arange(size, dtype=np.float64) + 0.5) * (h / size) - 0.5
    xs = (np.arange(size, dtype=np.float64) + 0.5) * (w / size) - 0.5
    return np.meshgrid(xs, ys)


def resize_gray(image: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of one grayscale byte image to size x size."""
    h, w = image.shape
    if (h, w) == (size, size):
        return image.copy()
    gx, gy = _resize_grid(h, w, size)
    out = sample_bilinear(image, gx, gy, fill=0.0)
    return np.floor(np.clip(out, 0.0, 255.0) + 0.5).astype(np.uint8)


def resize_mask(mask: np.ndarray, size: int) -> np.ndarray:
    """Nearest-neighbor resize of one class-id mask to size x size."""
    h, w = mask.shape
    if (h, w) == (size, size):
        return mask.copy()
    gx, gy = _resize_grid(h, w, size)
    return sample_nearest(mask, gx, gy, fill=np.uint8(0))


def resize_pair(pair: SamplePair, size: int) -> SamplePair:
    """Bilinear radiograph resize, nearest-neighbor mask resize."""
    if size < 32:
        raise InvalidSpec(f"target size must be >= 32, got {size}")
    return SamplePair(pair.id, resize_gray(pair.radiograph, size), resize_mask(pair.mask, size))


def load_pairs(image_dir, mask_dir, palette: ClassPalette) -> list[SamplePair]:
    """Load same-named image/mask PNGs, sorted by filename; masks decoded
    with zero tolerance."""
    if not os.path.isdir(image_dir):
        raise FileNotFoundError(f"image directory not found: {image_dir}")
    if not os.path.isdir(mask_dir):
        raise FileNotFoundError(f"mask directory not found: {mask_dir}")
    pairs = []
    for name in list_pngs(image_dir):
        mask_path = os.path.join(mask_dir, name)
        if not os.path.isfile(mask_path):
            raise MissingMask(name)
        radio = read_gray(os.path.join(image_dir, name))
        rgb = read_rgb(mask_path)
        if rgb.shape[:2] != radio.shape:
            raise DimensionMismatch(
                f"'{name}': image {radio.shape} vs mask {rgb.shape[:2]}"
            )
        mask = encode_mask(rgb, palette, tolerance=0)
        pairs.append(SamplePair(os.path.splitext(name)[0], radio, mask))
    return pairs


def expansion_variant(pairs: list[SamplePair], spec: AugmentSpec, seed: int, index: int) -> SamplePair:
    """Element `index` of the expanded dataset, computable independently.

    Variant (i, 0) is the identity copy of pairs[i]; variant (i, k > 0) is
    augment(pairs[i]) under a seed derived from (seed, i, k).
    """
    i, k = divmod(index, spec.expansion_factor)
    pair = pairs[i]
    if k == 0:
        return SamplePair(pair.id, pair.radiograph.copy(), pair.mask.copy())
    aug = augment(pair, spec, derive_seed(seed, "expand", i, k))
    return SamplePair(f"{pair.id}-aug{k}", aug.radiograph, aug.mask)


def expand_dataset(pairs: list[SamplePair], spec: AugmentSpec, seed: int) -> Dataset:
    """Expand by spec.expansion_factor (|pairs| * factor output pairs)."""
    spec.validate()
    sizes = {p.mask.shape for p in pairs}
    if len(sizes) > 1:
        raise DimensionMismatch(f"pairs have mixed sizes: {sorted(sizes)}")
    total = len(pairs) * spec.expansion_factor
    out = [expansion_variant(pairs, spec, seed, idx) for idx in range(total)]
    size = pairs[0].mask.shape[0] if pairs else 0
    return Dataset(out, size)


def prepare(pairs: list[SamplePair], size: int) -> Dataset:
    """Resize every pair to the network input size."""
    return Dataset([resize_pair(p, size) for p in pairs], size)
