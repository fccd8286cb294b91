"""Layer graphs for the generator and discriminator.

The generator is an encoder/decoder with optional skip concatenations:
encoder convs e1..e{depth} with channel multipliers 1,2,4,8,8,... and
leaky-ReLU, decoder deconvs d1..d{depth} with ReLU, dropout 0.5 on d1-d3,
and skip concat [d_k, e_{depth-k}] for k < depth; the last stage is a
per-pixel affine + tanh emitting the RGB segmentation.  The discriminator
sees (radiograph, RGB mask) stacked on channels, applies four stride-2
convs with multipliers 1,2,4,8, flattens, and ends in one dense unit with
a sigmoid.

``forward`` evaluates a graph; with ``record=True`` it returns a tape that
``backward`` consumes to produce named parameter gradients and the input
gradient.  Batch-norm running statistics are updated in place on
train-mode forwards.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import InvalidConfig, NonFiniteActivation, ShapeMismatch
from ..rng import Stream, derive_seed
from . import ops

KERNEL = (5, 5)
STRIDE = (2, 2)
WEIGHT_INIT_STD = 0.02
ENCODER_MULTIPLIER_CAP = 8
DISCRIMINATOR_CONVS = 4


@dataclass(frozen=True)
class ArchConfig:
    image_size: int = 256
    depth: int = 8
    base_width: int = 64
    input_channels: int = 1
    output_channels: int = 3
    skip_connections: bool = True
    leaky_slope: float = 0.2

    def validate(self):
        size = self.image_size
        if size < 16 or (size & (size - 1)) != 0:
            raise InvalidConfig(f"image_size must be a power of two >= 16, got {size}")
        if self.depth < 4:
            raise InvalidConfig(f"depth must be >= 4, got {self.depth}")
        if size % (1 << self.depth) != 0:
            raise InvalidConfig(
                f"image_size {size} not divisible by 2^depth = {1 << self.depth}"
            )
        if self.base_width < 1:
            raise InvalidConfig("base_width must be >= 1")
        if self.input_channels < 1 or self.output_channels < 1:
            raise InvalidConfig("channel counts must be >= 1")
        if not 0.0 <= self.leaky_slope < 1.0:
            raise InvalidConfig("leaky_slope must be in [0, 1)")


@dataclass(frozen=True)
class LayerSpec:
    name: str
    kind: str                  # conv | deconv | fully_connected | flatten
    in_channels: int
    out_channels: int          # own output width, before any concatenation
    kernel: tuple[int, int] | None = None
    stride: tuple[int, int] | None = None
    batch_norm: bool = False
    activation: str = "none"
    dropout: float = 0.0
    skip_source: str | None = None  # encoder layer whose output is concatenated after this one
    skip_channels: int = 0
    remark: str = ""

    @property
    def width(self) -> int:
        """Output width including the concatenated skip channels."""
        return self.out_channels + self.skip_channels

    def channels_label(self) -> str:
        if self.skip_source is not None:
            return f"{self.out_channels}+{self.skip_channels}"
        return str(self.out_channels)


class NetworkGraph:
    """Ordered layer specs plus named parameter tensors."""

    def __init__(self, name: str, layers: list[LayerSpec], input_channels: int):
        self.name = name
        self.layers = list(layers)
        self.input_channels = input_channels
        self.params: dict[str, np.ndarray] = {}

    def param_names(self) -> list[str]:
        names = []
        for spec in self.layers:
            if spec.kind in ("conv", "deconv", "fully_connected"):
                names += [f"{spec.name}.w", f"{spec.name}.b"]
                if spec.batch_norm:
                    names += [f"{spec.name}.gamma", f"{spec.name}.beta"]
        return names

    def trainable(self) -> dict[str, np.ndarray]:
        return {n: self.params[n] for n in self.param_names()}

    def _weight_shape(self, spec: LayerSpec, flat_features: int | None = None):
        if spec.kind == "conv":
            return (spec.out_channels, spec.in_channels) + KERNEL
        if spec.kind == "deconv":
            return (spec.in_channels, spec.out_channels) + KERNEL
        if spec.kind == "fully_connected":
            return (spec.in_channels, spec.out_channels)
        return None

    def init_parameters(self, seed: int, dtype=np.float64):
        """Gaussian(0, 0.02) weights, zero biases, identity batch-norm."""
        params = {}
        for spec in self.layers:
            shape = self._weight_shape(spec)
            if shape is None:
                continue
            stream = Stream(derive_seed(seed, self.name, spec.name))
            params[f"{spec.name}.w"] = stream.normal(
                int(np.prod(shape)), 0.0, WEIGHT_INIT_STD
            ).reshape(shape).astype(dtype)
            params[f"{spec.name}.b"] = np.zeros(spec.out_channels, dtype=dtype)
            if spec.batch_norm:
                params[f"{spec.name}.gamma"] = np.ones(spec.out_channels, dtype=dtype)
                params[f"{spec.name}.beta"] = np.zeros(spec.out_channels, dtype=dtype)
                params[f"{spec.name}.run_mean"] = np.zeros(spec.out_channels, dtype=dtype)
                params[f"{spec.name}.run_var"] = np.ones(spec.out_channels, dtype=dtype)
        self.params = params
        return self


def encoder_channels(cfg: ArchConfig) -> list[int]:
    """Output widths of e1..e{depth}: base * (1,2,4,8,8,...)."""
    return [
        cfg.base_width * min(2 ** k, ENCODER_MULTIPLIER_CAP) for k in range(cfg.depth)
    ]


def build_generator(cfg: ArchConfig) -> NetworkGraph:
    cfg.validate()
    enc = encoder_channels(cfg)
    layers = []
    prev = cfg.input_channels
    for k in range(1, cfg.depth + 1):
        layers.append(
            LayerSpec(
                name=f"e{k}",
                kind="conv",
                in_channels=prev,
                out_channels=enc[k - 1],
                kernel=KERNEL,
                stride=STRIDE,
                batch_norm=True,
                activation="leaky_relu",
            )
        )
        prev = enc[k - 1]
    for k in range(1, cfg.depth + 1):
        last = k == cfg.depth
        out = cfg.output_channels if last else enc[cfg.depth - k - 1]
        skip = None
        skip_ch = 0
        if not last and cfg.skip_connections:
            skip = f"e{cfg.depth - k}"
            skip_ch = enc[cfg.depth - k - 1]
        dropout = 0.5 if k <= 3 and not last else 0.0
        remark = ""
        if skip is not None:
            remark = f"concat[d{k},{skip}]"
        if dropout > 0.0:
            remark = (remark + " " if remark else "") + "dropout:0.5"
        layers.append(
            LayerSpec(
                name=f"d{k}",
                kind="deconv",
                in_channels=prev,
                out_channels=out,
                kernel=KERNEL,
                stride=STRIDE,
                batch_norm=not last,
                activation="none" if last else "relu",
                dropout=dropout,
                skip_source=skip,
                skip_channels=skip_ch,
                remark=remark,
            )
        )
        prev = out + skip_ch
    layers.append(
        LayerSpec(
            name="out",
            kind="fully_connected",
            in_channels=prev,
            out_channels=cfg.output_channels,
            activation="tanh",
            remark="per-pixel",
        )
    )
    return NetworkGraph("generator", layers, cfg.input_channels)


def build_discriminator(cfg: ArchConfig) -> NetworkGraph:
    cfg.validate()
    if cfg.image_size % (1 << DISCRIMINATOR_CONVS) != 0:
        raise InvalidConfig("image_size must be divisible by 16 for the discriminator")
    in_ch = cfg.input_channels + cfg.output_channels
    layers = []
    prev = in_ch
    spatial = cfg.image_size
    for k in range(DISCRIMINATOR_CONVS):
        out = cfg.base_width * min(2 ** k, ENCODER_MULTIPLIER_CAP)
        layers.append(
            LayerSpec(
                name=f"h{k}",
                kind="conv",
                in_channels=prev,
                out_channels=out,
                kernel=KERNEL,
                stride=STRIDE,
                batch_norm=True,
                activation="leaky_relu",
            )
        )
        prev = out
        spatial //= 2
    flat = prev * spatial * spatial
    layers.append(
        LayerSpec(
            name=f"h{DISCRIMINATOR_CONVS}",
            kind="flatten",
            in_channels=prev,
            out_channels=flat,
            remark=f"{spatial}*{spatial}*{prev}",
        )
    )
    layers.append(
        LayerSpec(
            name="out",
            kind="fully_connected",
            in_channels=flat,
            out_channels=1,
            activation="sigmoid",
        )
    )
    return NetworkGraph("discriminator", layers, in_ch)


def infer_shapes(graph: NetworkGraph, input_shape: tuple) -> list[tuple]:
    """Per-layer output shapes (channel-first, without the batch axis).

    Conv halves spatial dims (ceil), deconv doubles them; shapes include
    concatenated skip channels.
    """
    if len(input_shape) != 3 or input_shape[0] != graph.input_channels:
        raise ShapeMismatch(0, f"expected input ({graph.input_channels}, H, W), got {input_shape}")
    shapes = []
    by_name = {}
    current = tuple(input_shape)
    for i, spec in enumerate(graph.layers):
        if spec.kind in ("conv", "deconv"):
            if len(current) != 3 or current[0] != spec.in_channels:
                raise ShapeMismatch(i, f"{spec.name} expects {spec.in_channels} channels, got {current}")
            c, h, w = current
            if spec.kind == "conv":
                oh, _, _ = ops.same_pads(h, spec.kernel[0], spec.stride[0])
                ow, _, _ = ops.same_pads(w, spec.kernel[1], spec.stride[1])
            else:
                oh, ow = h * spec.stride[0], w * spec.stride[1]
            out = (spec.out_channels, oh, ow)
            if spec.skip_source is not None:
                src = by_name.get(spec.skip_source)
                if src is None or src[1:] != (oh, ow):
                    raise ShapeMismatch(i, f"skip source {spec.skip_source} shape {src} != {(oh, ow)}")
                out = (spec.out_channels + src[0], oh, ow)
        elif spec.kind == "flatten":
            out = (int(np.prod(current)),)
        elif spec.kind == "fully_connected":
            if len(current) == 1:
                if current[0] != spec.in_channels:
                    raise ShapeMismatch(i, f"{spec.name} expects {spec.in_channels} features, got {current[0]}")
                out = (spec.out_channels,)
            else:
                if current[0] != spec.in_channels:
                    raise ShapeMismatch(i, f"{spec.name} expects {spec.in_channels} channels, got {current}")
                out = (spec.out_channels,) + current[1:]
        else:
            raise ShapeMismatch(i, f"unknown layer kind '{spec.kind}'")
        shapes.append(out)
        by_name[spec.name] = out
        current = out
    return shapes


def count_parameters(graph: NetworkGraph) -> int:
    """Weights + biases + 2 batch-norm affine terms per normalized layer."""
    total = 0
    for spec in graph.layers:
        if spec.kind in ("conv", "deconv"):
            total += spec.kernel[0] * spec.kernel[1] * spec.in_channels * spec.out_channels
            total += spec.out_channels
        elif spec.kind == "fully_connected":
            total += spec.in_channels * spec.out_channels + spec.out_channels
        if spec.kind != "flatten" and spec.batch_norm:
            total += 2 * spec.out_channels
    return total


class TapeEntry:
    __slots__ = ("spec", "op_cache", "bn_cache", "act_cache", "drop_cache", "train")

    def __init__(self, spec, op_cache, bn_cache, act_cache, drop_cache, train):
        self.spec = spec
        self.op_cache = op_cache
        self.bn_cache = bn_cache
        self.act_cache = act_cache
        self.drop_cache = drop_cache
        self.train = train


def forward(graph: NetworkGraph, x: np.ndarray, mode: str = "eval", seed: int = 0,
            record: bool = False, leaky_slope: float = 0.2):
    """Evaluate the graph; train mode applies dropout (masks drawn from
    ``seed``) and batch statistics, eval mode is deterministic.

    With record=True returns (output, tape) for ``backward``.
    """
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got '{mode}'")
    train = mode == "train"
    if x.ndim != 4:
        raise ShapeMismatch(0, f"expected NCHW input, got shape {x.shape}")
    if x.shape[1] != graph.input_channels:
        raise ShapeMismatch(0, f"expected {graph.input_channels} input channels, got {x.shape[1]}")
    if not graph.params:
        raise RuntimeError("graph parameters not initialized")

    tape = []
    skip_sources = {s.skip_source for s in graph.layers if s.skip_source is not None}
    outputs = {}
    current = x
    for i, spec in enumerate(graph.layers):
        p = graph.params
        bn_cache = act_cache = drop_cache = op_cache = None
        if spec.kind == "conv":
            if current.shape[1] != spec.in_channels:
                raise ShapeMismatch(i, f"{spec.name} expects {spec.in_channels} channels, got {current.shape[1]}")
            current, op_cache = ops.conv2d_forward(current, p[f"{spec.name}.w"], p[f"{spec.name}.b"], spec.stride[0])
        elif spec.kind == "deconv":
            if current.shape[1] != spec.in_channels:
                raise ShapeMismatch(i, f"{spec.name} expects {spec.in_channels} channels, got {current.shape[1]}")
            current, op_cache = ops.deconv2d_forward(current, p[f"{spec.name}.w"], p[f"{spec.name}.b"], spec.stride[0])
        elif spec.kind == "flatten":
            op_cache = current.shape
            current = current.reshape(current.shape[0], -1)
        elif spec.kind == "fully_connected":
            if current.ndim == 2:
                if current.shape[1] != spec.in_channels:
                    raise ShapeMismatch(i, f"{spec.name} expects {spec.in_channels} features, got {current.shape[1]}")
                current, op_cache = ops.dense_forward(current, p[f"{spec.name}.w"], p[f"{spec.name}.b"])
            else:
                if current.shape[1] != spec.in_channels:
                    raise ShapeMismatch(i, f"{spec.name} expects {spec.in_channels} channels, got {current.shape[1]}")
                current, op_cache = ops.pixel_dense_forward(current, p[f"{spec.name}.w"], p[f"{spec.name}.b"])
        else:
            raise ShapeMismatch(i, f"unknown layer kind '{spec.kind}'")

        if spec.batch_norm:
            current, bn_cache, new_mean, new_var = ops.batchnorm_forward(
                current,
                p[f"{spec.name}.gamma"],
                p[f"{spec.name}.beta"],
                p[f"{spec.name}.run_mean"],
                p[f"{spec.name}.run_var"],
                train,
            )
            if train:
                p[f"{spec.name}.run_mean"] = new_mean
                p[f"{spec.name}.run_var"] = new_var

        if spec.activation != "none":
            current, act_cache = ops.activation_forward(current, spec.activation, leaky_slope)

        if spec.dropout > 0.0 and train:
            stream = Stream(derive_seed(seed, graph.name, "dropout", spec.name))
            current, drop_cache = ops.dropout_forward(current, spec.dropout, stream)

        if spec.skip_source is not None:
            current = np.concatenate([current, outputs[spec.skip_source]], axis=1)

        if not np.isfinite(current).all():
            raise NonFiniteActivation(i, spec.name)

        if spec.name in skip_sources:
            outputs[spec.name] = current
        if record:
            tape.append(TapeEntry(spec, op_cache, bn_cache, act_cache, drop_cache, train))

    if record:
        return current, tape
    return current


def backward(graph: NetworkGraph, tape: list, d_output: np.ndarray,
             want_param_grads: bool = True, skip_last_activation: bool = False,
             leaky_slope: float = 0.2):
    """Reverse-mode pass over a recorded tape.

    Returns (d_input, grads) where grads maps trainable parameter names to
    gradient arrays (empty when want_param_grads is False).  With
    skip_last_activation=True, d_output is taken with respect to the final
    layer's pre-activation (used to fuse sigmoid + cross-entropy).
    """
    grads: dict[str, np.ndarray] = {}
    pending: dict[str, np.ndarray] = {}
    d = d_output
    for idx in range(len(tape) - 1, -1, -1):
        entry = tape[idx]
        spec = entry.spec
        extra = pending.pop(spec.name, None)
        if extra is not None:
            d = d + extra
        if spec.skip_source is not None:
            own = spec.out_channels
            pending_grad = d[:, own:, :, :]
            prev = pending.get(spec.skip_source)
            pending[spec.skip_source] = pending_grad if prev is None else prev + pending_grad
            d = d[:, :own, :, :]
        if entry.drop_cache is not None:
            d = ops.dropout_backward(d, entry.drop_cache)
        if spec.activation != "none" and not (skip_last_activation and idx == len(tape) - 1):
            d = ops.activation_backward(d, spec.activation, entry.act_cache, leaky_slope)
        if entry.bn_cache is not None:
            d, dgamma, dbeta = ops.batchnorm_backward(d, entry.bn_cache)
            if want_param_grads:
                grads[f"{spec.name}.gamma"] = dgamma
                grads[f"{spec.name}.beta"] = dbeta
        if spec.kind == "conv":
            d, dw, db = ops.conv2d_backward(d, entry.op_cache, want_param_grads)
        elif spec.kind == "deconv":
            d, dw, db = ops.deconv2d_backward(d, entry.op_cache, want_param_grads)
        elif spec.kind == "flatten":
            d = d.reshape(entry.op_cache)
            dw = db = None
        elif spec.kind == "fully_connected":
            if entry.op_cache[0].ndim == 2:
                d, dw, db = ops.dense_backward(d, entry.op_cache, want_param_grads)
            else:
                d, dw, db = ops.pixel_dense_backward(d, entry.op_cache, want_param_grads)
        if want_param_grads and dw is not None:
            grads[f"{spec.name}.w"] = dw
            grads[f"{spec.name}.b"] = db
    if pending:
        raise RuntimeError(f"unresolved skip gradients: {sorted(pending)}")
    return d, grads
