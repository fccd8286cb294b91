"""Procedural phantom radiographs with known ground-truth masks.

Each phantom holds a row of teeth built from nested analytic shapes:
an enamel silhouette containing a dentin ellipse containing a pulp
ellipse, plus optional caries, crown, restoration, and root-canal
features.  The scene geometry is exposed so tests can assert containment
analytically.  All randomness comes from the counter-based stream in
``dentgan.rng``; identical (seed, spec) yields bit-identical pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import palette as pal
from .errors import InvalidSpec
from .rng import Stream, derive_seed

# rendered gray level per class: background darkest, enamel brightest,
# neighbors 20-45 levels apart so noise makes them overlap but not merge
BASE_INTENSITY = {
    pal.BACKGROUND: 12.0,
    pal.CARIES: 60.0,
    pal.PULP: 105.0,
    pal.DENTIN: 150.0,
    pal.CROWN: 180.0,
    pal.RESTORATION: 205.0,
    pal.ROOT_CANAL: 220.0,
    pal.ENAMEL: 240.0,
}

DEFAULT_CLASS_PROBABILITIES = {
    pal.CARIES: 0.7,
    pal.CROWN: 0.5,
    pal.RESTORATION: 0.4,
    pal.ROOT_CANAL: 0.6,
}


@dataclass(frozen=True)
class PhantomSpec:
    image_size: int = 256
    teeth_count_range: tuple[int, int] = (3, 6)
    class_probabilities: dict = field(default_factory=lambda: dict(DEFAULT_CLASS_PROBABILITIES))
    noise_sigma: float = 8.0
    blur_radius: int = 1

    def validate(self):
        if self.image_size < 32:
            raise InvalidSpec(f"image_size must be >= 32, got {self.image_size}")
        lo, hi = self.teeth_count_range
        if lo < 1 or hi < lo:
            raise InvalidSpec(f"bad teeth_count_range {self.teeth_count_range}")
        for cid, p in self.class_probabilities.items():
            if cid not in (pal.CARIES, pal.CROWN, pal.RESTORATION, pal.ROOT_CANAL):
                raise InvalidSpec(f"class_probabilities has non-optional class {cid}")
            if not 0.0 <= p <= 1.0:
                raise InvalidSpec(f"probability for class {cid} not in [0,1]: {p}")
        if self.noise_sigma < 0:
            raise InvalidSpec("noise_sigma must be >= 0")
        if self.blur_radius < 0:
            raise InvalidSpec("blur_radius must be >= 0")

    def probability(self, class_id: int) -> float:
        return float(self.class_probabilities.get(class_id, 0.0))


@dataclass(eq=False)
class SamplePair:
    """One (grayscale radiograph, class-index mask) pair with provenance id."""

    id: str
    radiograph: np.ndarray  # (H, W) uint8
    mask: np.ndarray        # (H, W) uint8 class ids

    def __post_init__(self):
        if self.radiograph.shape != self.mask.shape:
            raise ValueError(
                f"pair '{self.id}': radiograph {self.radiograph.shape} vs mask {self.mask.shape}"
            )


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    rx: float
    ry: float

    def grid_mask(self, h: int, w: int) -> np.ndarray:
        ys = np.arange(h, dtype=np.float64)[:, None]
        xs = np.arange(w, dtype=np.float64)[None, :]
        return ((xs - self.cx) / self.rx) ** 2 + ((ys - self.cy) / self.ry) ** 2 <= 1.0

    def contains_points(self, xs, ys) -> np.ndarray:
        return ((np.asarray(xs) - self.cx) / self.rx) ** 2 + (
            (np.asarray(ys) - self.cy) / self.ry
        ) ** 2 <= 1.0


@dataclass(frozen=True)
class Capsule:
    """Vertical segment (x, y0)-(x, y1) swept by radius r."""

    x: float
    y0: float
    y1: float
    r: float

    def grid_mask(self, h: int, w: int) -> np.ndarray:
        ys = np.arange(h, dtype=np.float64)[:, None]
        xs = np.arange(w, dtype=np.float64)[None, :]
        clamped = np.clip(ys, self.y0, self.y1)
        return (xs - self.x) ** 2 + (ys - clamped) ** 2 <= self.r ** 2


@dataclass(frozen=True)
class Tooth:
    enamel: Ellipse
    dentin: Ellipse
    pulp: Ellipse
    caries: Ellipse | None = None
    crown: Ellipse | None = None
    restoration: Ellipse | None = None
    root_canal: Capsule | None = None


def build_scene(seed: int, spec: PhantomSpec) -> list[Tooth]:
    """Sample the tooth geometry for one phantom; rendering-independent."""
    spec.validate()
    size = spec.image_size
    rng = Stream(derive_seed(seed, "scene"))
    lo, hi = spec.teeth_count_range
    count = rng.integer(lo, hi + 1)
    slot = size / count
    teeth = []
    for t in range(count):
        cx = (t + 0.5) * slot + rng.uniform(1, -0.06, 0.06)[0] * slot
        rx = slot * 0.5 * rng.uniform(1, 0.62, 0.80)[0]
        ry = size * rng.uniform(1, 0.26, 0.36)[0]
        cy = size * rng.uniform(1, 0.44, 0.56)[0]
        # keep the silhouette inside the frame
        ry = min(ry, cy - 1.0, size - 1.0 - cy)
        enamel = Ellipse(cx, cy, rx, ry)

        ds = rng.uniform(1, 0.70, 0.78)[0]
        dentin = Ellipse(cx + rng.uniform(1, -0.05, 0.05)[0] * rx, cy, rx * ds, ry * ds)
        ps = rng.uniform(1, 0.52, 0.66)[0]
        pulp = Ellipse(
            dentin.cx + rng.uniform(1, -0.05, 0.05)[0] * dentin.rx,
            cy,
            dentin.rx * ps,
            dentin.ry * ps,
        )

        caries = None
        if rng.chance(spec.probability(pal.CARIES)):
            side = 1.0 if rng.chance(0.5) else -1.0
            phi = rng.uniform(1, -0.8, 0.8)[0]
            s = rng.uniform(1, 0.78, 0.92)[0]
            r = max(rx * rng.uniform(1, 0.20, 0.32)[0], 1.2)
            caries = Ellipse(
                cx + side * rx * s * math.cos(phi), cy + ry * s * math.sin(phi) * 0.35, r, r
            )

        crown = None
        if rng.chance(spec.probability(pal.CROWN)):
            crown = Ellipse(
                cx,
                cy - ry * rng.uniform(1, 0.80, 0.92)[0],
                rx * rng.uniform(1, 0.95, 1.12)[0],
                ry * rng.uniform(1, 0.20, 0.30)[0],
            )

        restoration = None
        if rng.chance(spec.probability(pal.RESTORATION)):
            r = max(rx * rng.uniform(1, 0.16, 0.26)[0], 1.2)
            restoration = Ellipse(
                cx + rng.uniform(1, -0.30, 0.30)[0] * rx,
                cy - ry * rng.uniform(1, 0.30, 0.42)[0],
                r,
                r,
            )

        root_canal = None
        if rng.chance(spec.probability(pal.ROOT_CANAL)):
            root_canal = Capsule(
                pulp.cx,
                cy + ry * 0.05,
                cy + ry * rng.uniform(1, 0.30, 0.45)[0],
                max(rx * rng.uniform(1, 0.08, 0.14)[0], 1.0),
            )

        teeth.append(
            Tooth(
                enamel=enamel,
                dentin=dentin,
                pulp=pulp,
                caries=caries,
                crown=crown,
                restoration=restoration,
                root_canal=root_canal,
            )
        )
    return teeth


def render_mask(teeth: list[Tooth], size: int) -> np.ndarray:
    """Paint class ids; later features override earlier paint inside their clip."""
    mask = np.zeros((size, size), dtype=np.uint8)
    for tooth in teeth:
        silhouette = tooth.enamel.grid_mask(size, size)
        mask[silhouette] = pal.ENAMEL
        mask[tooth.dentin.grid_mask(size, size)] = pal.DENTIN
        pulp_px = tooth.pulp.grid_mask(size, size)
        mask[pulp_px] = pal.PULP
        if tooth.root_canal is not None:
            mask[tooth.root_canal.grid_mask(size, size) & pulp_px] = pal.ROOT_CANAL
        if tooth.caries is not None:
            mask[tooth.caries.grid_mask(size, size) & silhouette] = pal.CARIES
        if tooth.restoration is not None:
            mask[tooth.restoration.grid_mask(size, size) & silhouette] = pal.RESTORATION
        if tooth.crown is not None:
            mask[tooth.crown.grid_mask(size, size)] = pal.CROWN
    return mask


def _box_blur(image: np.ndarray, radius: int) -> np.ndarray:
    """Separable box blur with edge replication; exact at radius 0."""
    if radius == 0:
        return image
    k = 2 * radius + 1

    def blur_axis(arr, axis):
        padded = np.pad(arr, [(radius, radius) if a == axis else (0, 0) for a in range(2)], mode="edge")
        csum = np.cumsum(padded, axis=axis, dtype=np.float64)
        zero = np.zeros_like(np.take(csum, [0], axis=axis))
        csum = np.concatenate([zero, csum], axis=axis)
        n = arr.shape[axis]
        hi = np.take(csum, np.arange(k, k + n), axis=axis)
        lo = np.take(csum, np.arange(0, n), axis=axis)
        return (hi - lo) / k

    return blur_axis(blur_axis(image, 0), 1)


def render_radiograph(mask: np.ndarray, seed: int, spec: PhantomSpec) -> np.ndarray:
    """Class base intensities + Gaussian noise + box blur, quantized to bytes."""
    lut = np.zeros(pal.NUM_CLASSES, dtype=np.float64)
    for cid, value in BASE_INTENSITY.items():
        lut[cid] = value
    image = lut[mask]
    if spec.noise_sigma > 0:
        noise = Stream(derive_seed(seed, "noise")).normal(mask.size, 0.0, spec.noise_sigma)
        image = image + noise.reshape(mask.shape)
    image = _box_blur(image, spec.blur_radius)
    return np.floor(np.clip(image, 0.0, 255.0) + 0.5).astype(np.uint8)


def generate_phantom(seed: int, spec: PhantomSpec, pair_id: str | None = None) -> SamplePair:
    """One deterministic (radiograph, mask) pair for (seed, spec)."""
    spec.validate()
    teeth = build_scene(seed, spec)
    mask = render_mask(teeth, spec.image_size)
    radiograph = render_radiograph(mask, seed, spec)
    return SamplePair(pair_id or f"phantom-{seed}", radiograph, mask)


def dataset_pair(seed: int, spec: PhantomSpec, index: int) -> SamplePair:
    """Pair `index` of the (seed, spec) stream; independent of other indices."""
    return generate_phantom(derive_seed(seed, "pair", index), spec, pair_id=f"phantom-{seed}-{index}")


def generate_dataset(seed: int, spec: PhantomSpec, n: int) -> list[SamplePair]:
    """n pairs with ids "phantom-<seed>-<i>"; pair i depends only on (seed, i, spec)."""
    spec.validate()
    if n < 1:
        raise InvalidSpec(f"n must be >= 1, got {n}")
    return [dataset_pair(seed, spec, i) for i in range(n)]
