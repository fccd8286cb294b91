from .graph import (
    ArchConfig,
    LayerSpec,
    NetworkGraph,
    backward,
    build_discriminator,
    build_generator,
    count_parameters,
    encoder_channels,
    forward,
    infer_shapes,
)

__all__ = [
    "ArchConfig",
    "LayerSpec",
    "NetworkGraph",
    "backward",
    "build_discriminator",
    "build_generator",
    "count_parameters",
    "encoder_channels",
    "forward",
    "infer_shapes",
]
