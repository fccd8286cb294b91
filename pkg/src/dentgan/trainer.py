"""Alternating discriminator/generator training with Adam and checkpoints.

Every global step performs one discriminator update (real and generated
pairs, losses summed into a single Adam step) followed by one generator
update (adversarial gradient flowing through the frozen discriminator
plus the lambda-weighted L1 term).  All stochastic choices - parameter
init, epoch shuffling, dropout masks - derive from the config seed and
step counters, so a run is reproducible and a checkpoint resume continues
bit-identically on the same platform.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import struct
from dataclasses import dataclass, field

import numpy as np

from . import losses
from .errors import (
    CorruptChecksum,
    DimensionMismatch,
    EmptyDataset,
    InvalidConfig,
    VersionMismatch,
)
from .network import ArchConfig, NetworkGraph, backward, build_discriminator, build_generator, forward
from .palette import ClassPalette, decode_mask, default_palette, normalize
from .pipeline import Dataset
from .rng import Stream, derive_seed

CKPT_MAGIC = b"DGCK"
CKPT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 2
    epochs: int = 20
    lambda_l1: float = 100.0
    seed: int = 0
    checkpoint_every: int = 1000
    arch: ArchConfig = field(default_factory=ArchConfig)

    def validate(self):
        if self.learning_rate <= 0 or self.epsilon <= 0:
            raise InvalidConfig("learning_rate and epsilon must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InvalidConfig("beta1 and beta2 must lie in [0, 1)")
        if self.batch_size < 1:
            raise InvalidConfig("batch_size must be >= 1")
        if self.epochs < 0:
            raise InvalidConfig("epochs must be >= 0")
        if self.lambda_l1 < 0:
            raise InvalidConfig("lambda_l1 must be >= 0")
        if self.checkpoint_every < 1:
            raise InvalidConfig("checkpoint_every must be >= 1")
        self.arch.validate()

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(d: dict) -> "TrainConfig":
        d = dict(d)
        arch = ArchConfig(**d.pop("arch"))
        return TrainConfig(arch=arch, **d)


@dataclass
class StepRecord:
    step: int
    d_loss: float
    g_adv: float
    g_l1: float
    g_total: float


@dataclass
class EpochRecord:
    epoch: int
    d_loss: float
    g_adv: float
    g_l1: float
    g_total: float


@dataclass
class TrainReport:
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)


def adam_step(param, grad, m, v, t: int, cfg: TrainConfig):
    """Bias-corrected Adam update; returns (param, m, v)."""
    m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
    v = cfg.beta2 * v + (1.0 - cfg.beta2) * (grad * grad)
    m_hat = m / (1.0 - cfg.beta1 ** t)
    v_hat = v / (1.0 - cfg.beta2 ** t)
    param = param - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)
    return param, m, v


class AdamState:
    """First/second moments and step counter for one network."""

    def __init__(self, graph: NetworkGraph):
        self.m = {n: np.zeros_like(graph.params[n]) for n in graph.param_names()}
        self.v = {n: np.zeros_like(graph.params[n]) for n in graph.param_names()}
        self.t = 0

    def apply(self, graph: NetworkGraph, grads: dict, cfg: TrainConfig):
        self.t += 1
        for name in graph.param_names():
            p, self.m[name], self.v[name] = adam_step(
                graph.params[name], grads[name], self.m[name], self.v[name], self.t, cfg
            )
            graph.params[name] = p


def batch_tensors(pairs, palette: ClassPalette):
    """(x, y) network tensors: x (N,1,H,W) and y (N,3,H,W), both in [-1,1]."""
    x = np.stack([normalize(p.radiograph) for p in pairs])[:, None, :, :]
    y = np.stack([normalize(decode_mask(p.mask, palette)).transpose(2, 0, 1) for p in pairs])
    return x, y


def train_step(x, y, G: NetworkGraph, D: NetworkGraph, g_opt: AdamState,
               d_opt: AdamState, cfg: TrainConfig, step: int) -> StepRecord:
    """One discriminator update followed by one generator update."""
    slope = cfg.arch.leaky_slope
    c_in = cfg.arch.input_channels

    # phase 1: update D on (x, y) -> 1 and (x, G(x)) -> 0; G is frozen
    seed1 = derive_seed(cfg.seed, "step", step, "phase", 1)
    fake = forward(G, x, "train", derive_seed(seed1, "G"), leaky_slope=slope)
    p_real, tape_r = forward(D, np.concatenate([x, y], axis=1), "train",
                             derive_seed(seed1, "D-real"), record=True, leaky_slope=slope)
    p_fake, tape_f = forward(D, np.concatenate([x, fake], axis=1), "train",
                             derive_seed(seed1, "D-fake"), record=True, leaky_slope=slope)
    d_loss_val = losses.d_loss(p_real, p_fake)
    _, grads_r = backward(D, tape_r, losses.bce_grad_wrt_logit(p_real, 1.0),
                          skip_last_activation=True, leaky_slope=slope)
    _, grads_f = backward(D, tape_f, losses.bce_grad_wrt_logit(p_fake, 0.0),
                          skip_last_activation=True, leaky_slope=slope)
    d_grads = {k: grads_r[k] + grads_f[k] for k in grads_r}
    d_opt.apply(D, d_grads, cfg)

    # phase 2: update G through the fresh, frozen D
    seed2 = derive_seed(cfg.seed, "step", step, "phase", 2)
    fake2, tape_g = forward(G, x, "train", derive_seed(seed2, "G"), record=True, leaky_slope=slope)
    p_fake2, tape_d = forward(D, np.concatenate([x, fake2], axis=1), "train",
                              derive_seed(seed2, "D"), record=True, leaky_slope=slope)
    g_adv = losses.g_adv_loss(p_fake2)
    g_l1 = losses.l1_loss(y, fake2)
    g_total = g_adv + cfg.lambda_l1 * g_l1
    d_input_grad, _ = backward(D, tape_d, losses.bce_grad_wrt_logit(p_fake2, 1.0),
                               want_param_grads=False, skip_last_activation=True, leaky_slope=slope)
    d_fake = d_input_grad[:, c_in : c_in + cfg.arch.output_channels]
    d_fake = d_fake + cfg.lambda_l1 * losses.l1_grad(y, fake2)
    _, g_grads = backward(G, tape_g, d_fake, leaky_slope=slope)
    g_opt.apply(G, g_grads, cfg)

    return StepRecord(step, d_loss_val, g_adv, g_l1, g_total)


@dataclass
class Checkpoint:
    step: int
    epoch: int
    seed: int
    config: TrainConfig
    g_params: dict
    d_params: dict
    g_m: dict
    g_v: dict
    d_m: dict
    d_v: dict
    g_t: int
    d_t: int


def _collect_tensors(ckpt: Checkpoint):
    groups = [
        ("G", ckpt.g_params), ("D", ckpt.d_params),
        ("G.m", ckpt.g_m), ("G.v", ckpt.g_v),
        ("D.m", ckpt.d_m), ("D.v", ckpt.d_v),
    ]
    for prefix, d in groups:
        for name in sorted(d):
            yield f"{prefix}/{name}", d[name]


def save_checkpoint(path, ckpt: Checkpoint):
    """Versioned, checksummed container of named tensors.

    Layout: magic, u32 version, u64 header length, JSON header, raw
    little-endian tensor payload, trailing SHA-256 over all preceding bytes.
    """
    entries = []
    payload = bytearray()
    for name, arr in _collect_tensors(ckpt):
        data = np.ascontiguousarray(arr).astype("<f8", copy=False).tobytes()
        entries.append({"name": name, "shape": list(arr.shape), "nbytes": len(data)})
        payload += data
    header = json.dumps({
        "step": ckpt.step,
        "epoch": ckpt.epoch,
        "seed": ckpt.seed,
        "g_t": ckpt.g_t,
        "d_t": ckpt.d_t,
        "config": ckpt.config.to_dict(),
        "tensors": entries,
    }).encode("utf-8")
    blob = CKPT_MAGIC + struct.pack("<IQ", CKPT_VERSION, len(header)) + header + bytes(payload)
    digest = hashlib.sha256(blob).digest()
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(blob + digest)
    os.replace(tmp, path)


def load_checkpoint(path) -> Checkpoint:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < len(CKPT_MAGIC) + 12 + 32 or raw[: len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise CorruptChecksum(f"not a checkpoint file: {path}")
    blob, digest = raw[:-32], raw[-32:]
    if hashlib.sha256(blob).digest() != digest:
        raise CorruptChecksum(f"checksum mismatch in {path}")
    version, header_len = struct.unpack_from("<IQ", blob, len(CKPT_MAGIC))
    if version != CKPT_VERSION:
        raise VersionMismatch(f"checkpoint version {version}, expected {CKPT_VERSION}")
    header_start = len(CKPT_MAGIC) + 12
    header = json.loads(blob[header_start : header_start + header_len].decode("utf-8"))
    offset = header_start + header_len
    groups = {"G": {}, "D": {}, "G.m": {}, "G.v": {}, "D.m": {}, "D.v": {}}
    for entry in header["tensors"]:
        data = blob[offset : offset + entry["nbytes"]]
        offset += entry["nbytes"]
        arr = np.frombuffer(data, dtype="<f8").reshape(entry["shape"]).copy()
        prefix, name = entry["name"].split("/", 1)
        groups[prefix][name] = arr
    cfg = TrainConfig.from_dict(header["config"])
    return Checkpoint(
        step=header["step"], epoch=header["epoch"], seed=header["seed"], config=cfg,
        g_params=groups["G"], d_params=groups["D"],
        g_m=groups["G.m"], g_v=groups["G.v"], d_m=groups["D.m"], d_v=groups["D.v"],
        g_t=header["g_t"], d_t=header["d_t"],
    )


def make_checkpoint(step, epoch, cfg, G, D, g_opt, d_opt) -> Checkpoint:
    copy = lambda d: {k: v.copy() for k, v in d.items()}
    return Checkpoint(
        step=step, epoch=epoch, seed=cfg.seed, config=cfg,
        g_params=copy(G.params), d_params=copy(D.params),
        g_m=copy(g_opt.m), g_v=copy(g_opt.v), d_m=copy(d_opt.m), d_v=copy(d_opt.v),
        g_t=g_opt.t, d_t=d_opt.t,
    )


def fit(dataset: Dataset, cfg: TrainConfig, resume: Checkpoint | None = None,
        out_dir=None, palette: ClassPalette | None = None, log=None):
    """Train for cfg.epochs over a per-epoch seed-shuffled dataset.

    Returns (G, D, TrainReport).  Writes ckpt-<step>.bin files into out_dir
    every checkpoint_every steps and at the end when out_dir is given.
    """
    cfg.validate()
    palette = palette or default_palette()
    pairs = dataset.pairs
    if not pairs:
        raise EmptyDataset("training dataset is empty")
    size = cfg.arch.image_size
    for p in pairs:
        if p.mask.shape != (size, size):
            raise DimensionMismatch(f"pair '{p.id}' is {p.mask.shape}, expected {(size, size)}")

    G = build_generator(cfg.arch).init_parameters(derive_seed(cfg.seed, "init"))
    D = build_discriminator(cfg.arch).init_parameters(derive_seed(cfg.seed, "init"))
    g_opt = AdamState(G)
    d_opt = AdamState(D)
    start = 0
    if resume is not None:
        if resume.config != cfg:
            raise VersionMismatch("checkpoint config does not match the training config")
        G.params = {k: v.copy() for k, v in resume.g_params.items()}
        D.params = {k: v.copy() for k, v in resume.d_params.items()}
        g_opt.m = {k: v.copy() for k, v in resume.g_m.items()}
        g_opt.v = {k: v.copy() for k, v in resume.g_v.items()}
        d_opt.m = {k: v.copy() for k, v in resume.d_m.items()}
        d_opt.v = {k: v.copy() for k, v in resume.d_v.items()}
        g_opt.t = resume.g_t
        d_opt.t = resume.d_t
        start = resume.step

    steps_per_epoch = len(pairs) // cfg.batch_size
    total = cfg.epochs * steps_per_epoch
    report = TrainReport()
    perm = None
    perm_epoch = -1
    for step in range(start + 1, total + 1):
        epoch = (step - 1) // steps_per_epoch
        batch_index = (step - 1) % steps_per_epoch
        if epoch != perm_epoch:
            perm = Stream(derive_seed(cfg.seed, "epoch", epoch)).permutation(len(pairs))
            perm_epoch = epoch
        chosen = [pairs[i] for i in perm[batch_index * cfg.batch_size : (batch_index + 1) * cfg.batch_size]]
        x, y = batch_tensors(chosen, palette)
        record = train_step(x, y, G, D, g_opt, d_opt, cfg, step)
        report.steps.append(record)
        if log is not None:
            log(record)
        if out_dir is not None and (step % cfg.checkpoint_every == 0 or step == total):
            ckpt = make_checkpoint(step, epoch, cfg, G, D, g_opt, d_opt)
            save_checkpoint(os.path.join(out_dir, f"ckpt-{step}.bin"), ckpt)

    for epoch in sorted({ (r.step - 1) // steps_per_epoch for r in report.steps }):
        chunk = [r for r in report.steps if (r.step - 1) // steps_per_epoch == epoch]
        report.epochs.append(EpochRecord(
            epoch,
            float(np.mean([r.d_loss for r in chunk])),
            float(np.mean([r.g_adv for r in chunk])),
            float(np.mean([r.g_l1 for r in chunk])),
            float(np.mean([r.g_total for r in chunk])),
        ))
    return G, D, report
