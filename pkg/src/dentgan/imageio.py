"""PNG readers/writers for the on-disk pair layout (images/ + masks/)."""

from __future__ import annotations

import os

import numpy as np
from PIL import Image


def read_gray(path) -> np.ndarray:
    """Read an 8-bit grayscale PNG as an (H, W) uint8 array."""
    with Image.open(path) as img:
        if img.mode != "L":
            img = img.convert("L")
        return np.asarray(img, dtype=np.uint8)


def write_gray(path, array: np.ndarray):
    array = np.asarray(array, dtype=np.uint8)
    Image.fromarray(array, mode="L").save(path, format="PNG")


def read_rgb(path) -> np.ndarray:
    """Read an 8-bit RGB PNG as an (H, W, 3) uint8 array."""
    with Image.open(path) as img:
        if img.mode != "RGB":
            img = img.convert("RGB")
        return np.asarray(img, dtype=np.uint8)


def write_rgb(path, array: np.ndarray):
    array = np.asarray(array, dtype=np.uint8)
    Image.fromarray(array, mode="RGB").save(path, format="PNG")


def list_pngs(directory) -> list[str]:
    """Sorted PNG filenames directly inside a directory."""
    return sorted(n for n in os.listdir(directory) if n.lower().endswith(".png"))
