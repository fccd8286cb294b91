"""Class palette and conversions between RGB masks, index masks, and [-1,1] floats.

An index mask is a 2-D uint8 array of class ids (row-major, one byte per
pixel); RGB only appears at file boundaries and as network targets.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import UnknownColor

NUM_CLASSES = 8

CLASS_NAMES = (
    "background",
    "caries",
    "enamel",
    "dentin",
    "pulp",
    "crown",
    "restoration",
    "root_canal",
)

BACKGROUND, CARIES, ENAMEL, DENTIN, PULP, CROWN, RESTORATION, ROOT_CANAL = range(NUM_CLASSES)

_DEFAULT_COLORS = (
    (0, 0, 0),        # background
    (0, 0, 255),      # caries (blue)
    (0, 255, 0),      # enamel (green)
    (255, 255, 0),    # dentin (yellow)
    (255, 0, 0),      # pulp (red)
    (255, 224, 189),  # crown (skin)
    (255, 165, 0),    # restoration (orange)
    (0, 255, 255),    # root_canal (cyan)
)


@dataclass(frozen=True)
class PaletteEntry:
    class_id: int
    name: str
    rgb: tuple[int, int, int]


@dataclass(frozen=True)
class ClassPalette:
    entries: tuple[PaletteEntry, ...]

    def __post_init__(self):
        if len(self.entries) != NUM_CLASSES:
            raise ValueError(f"palette must have exactly {NUM_CLASSES} entries")
        for i, e in enumerate(self.entries):
            if e.class_id != i:
                raise ValueError("palette entries must be ordered by class_id 0..7")
        colors = {e.rgb for e in self.entries}
        if len(colors) != NUM_CLASSES:
            raise ValueError("palette RGB triples must be pairwise distinct")

    def colors(self) -> np.ndarray:
        """(8, 3) uint8 array of palette colors, indexed by class id."""
        return np.array([e.rgb for e in self.entries], dtype=np.uint8)

    def names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.entries)


def default_palette() -> ClassPalette:
    """The canonical 7-class + background palette."""
    entries = tuple(
        PaletteEntry(i, CLASS_NAMES[i], _DEFAULT_COLORS[i]) for i in range(NUM_CLASSES)
    )
    return ClassPalette(entries)


def _nearest_color(rgb_image: np.ndarray, palette: ClassPalette):
    """Per-pixel nearest palette entry (squared distances, ties -> lowest id)."""
    pixels = rgb_image.astype(np.int64)
    colors = palette.colors().astype(np.int64)  # (8, 3)
    # (H, W, 8) squared Euclidean distances
    diff = pixels[:, :, None, :] - colors[None, None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    ids = np.argmin(d2, axis=-1)  # argmin takes the first minimum: lowest class id
    min_d2 = np.take_along_axis(d2, ids[..., None], axis=-1)[..., 0]
    return ids.astype(np.uint8), min_d2


def encode_mask(rgb_image: np.ndarray, palette: ClassPalette, tolerance: int) -> np.ndarray:
    """Map an (H, W, 3) uint8 image to class ids by nearest palette color.

    Raises UnknownColor for the first pixel whose distance exceeds the
    tolerance (Euclidean, in RGB space).
    """
    rgb_image = np.asarray(rgb_image)
    if rgb_image.ndim != 3 or rgb_image.shape[2] != 3 or rgb_image.size == 0:
        raise ValueError(f"expected non-empty (H, W, 3) image, got shape {rgb_image.shape}")
    ids, min_d2 = _nearest_color(rgb_image, palette)
    bad = min_d2 > tolerance * tolerance
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise UnknownColor(int(x), int(y), rgb_image[y, x])
    return ids


def decode_mask(mask: np.ndarray, palette: ClassPalette) -> np.ndarray:
    """Map an (H, W) class-id mask to the exact palette colors."""
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.size == 0:
        raise ValueError(f"expected non-empty (H, W) mask, got shape {mask.shape}")
    if mask.max() >= NUM_CLASSES:
        raise ValueError(f"mask contains class id {int(mask.max())} >= {NUM_CLASSES}")
    return palette.colors()[mask]


def normalize(image: np.ndarray) -> np.ndarray:
    """8-bit values to floats in [-1, 1]: v -> v / 127.5 - 1."""
    return np.asarray(image, dtype=np.float64) / 127.5 - 1.0


def denormalize(image: np.ndarray) -> np.ndarray:
    """Floats in [-1, 1] back to bytes: clamp, then round half up."""
    v = np.clip(np.asarray(image, dtype=np.float64), -1.0, 1.0)
    return np.floor((v + 1.0) * 127.5 + 0.5).astype(np.uint8)


def quantize_output(generator_rgb: np.ndarray, palette: ClassPalette) -> np.ndarray:
    """Turn an (H, W, 3) float image in [-1, 1] into class decisions.

    Denormalizes, then assigns each pixel the nearest palette color with
    unlimited tolerance (ties broken by lowest class id).
    """
    rgb = denormalize(generator_rgb)
    ids, _ = _nearest_color(rgb, palette)
    return ids
