"""Exception types raised by the dentgan pipeline."""


class DentganError(Exception):
    """Base class for all pipeline errors."""


class UnknownColor(DentganError):
    """A mask pixel is farther from every palette color than the tolerance."""

    def __init__(self, x, y, rgb):
        self.x = x
        self.y = y
        self.rgb = tuple(int(v) for v in rgb)
        super().__init__(f"pixel ({x}, {y}) has color {self.rgb}, not within tolerance of any palette entry")


class MissingMask(DentganError):
    """An image file has no same-named mask file."""

    def __init__(self, name):
        self.name = name
        super().__init__(f"no mask found for image '{name}'")


class DimensionMismatch(DentganError):
    """Paired arrays do not share dimensions."""


class InvalidSpec(DentganError):
    """A phantom or augmentation spec violates its invariants."""


class InvalidConfig(DentganError):
    """A configuration value or key is not acceptable."""


class ShapeMismatch(DentganError):
    """A tensor fed to a network layer has the wrong shape."""

    def __init__(self, layer_index, message):
        self.layer_index = layer_index
        super().__init__(f"layer {layer_index}: {message}")


class NonFiniteActivation(DentganError):
    """A forward pass produced NaN or Inf."""

    def __init__(self, layer_index, layer_name):
        self.layer_index = layer_index
        self.layer_name = layer_name
        super().__init__(f"non-finite activation at layer {layer_index} ({layer_name})")


class EmptyDataset(DentganError):
    """Training requires at least one sample pair."""


class VersionMismatch(DentganError):
    """Checkpoint format version or configuration snapshot does not match."""


class CorruptChecksum(DentganError):
    """Checkpoint file is truncated or its checksum does not verify."""
