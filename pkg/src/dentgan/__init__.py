"""Conditional-GAN semantic segmentation of dental bitewing radiographs."""

__version__ = "0.1.0"

from .network import ArchConfig
from .palette import ClassPalette, default_palette
from .phantom import PhantomSpec, SamplePair, generate_dataset, generate_phantom
from .pipeline import AugmentSpec, Dataset
from .trainer import TrainConfig, fit

__all__ = [
    "ArchConfig",
    "AugmentSpec",
    "ClassPalette",
    "Dataset",
    "PhantomSpec",
    "SamplePair",
    "TrainConfig",
    "default_palette",
    "fit",
    "generate_dataset",
    "generate_phantom",
    "__version__",
]
