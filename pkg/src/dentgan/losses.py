"""Adversarial and L1 objectives.

Probabilities are clamped to [1e-7, 1 - 1e-7] before taking logs, so all
loss values are finite.  Gradients with respect to the discriminator's
pre-sigmoid logits use the exact fused identity (prob - target), which
stays bounded even where the clamp flattens the loss value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatch

PROB_EPS = 1e-7


@dataclass(frozen=True)
class LossWeights:
    lambda_l1: float = 100.0

    def __post_init__(self):
        if not np.isfinite(self.lambda_l1) or self.lambda_l1 < 0:
            raise ValueError(f"lambda_l1 must be finite and >= 0, got {self.lambda_l1}")


def bce(prob, target) -> float:
    """Binary cross-entropy against a constant 0/1 target, batch-averaged."""
    p = np.clip(np.asarray(prob, dtype=np.float64), PROB_EPS, 1.0 - PROB_EPS)
    t = float(target)
    return float(np.mean(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p))))


def bce_grad_wrt_logit(prob, target) -> np.ndarray:
    """d(mean BCE)/d(logit) for prob = sigmoid(logit): (prob - target) / n."""
    p = np.asarray(prob, dtype=np.float64)
    return (p - float(target)) / p.size


def d_loss(d_real, d_fake) -> float:
    """Discriminator objective: real pairs toward 1, generated pairs toward 0."""
    return bce(d_real, 1.0) + bce(d_fake, 0.0)


def g_adv_loss(d_fake) -> float:
    """Non-saturating generator objective: generated pairs toward 1."""
    return bce(d_fake, 1.0)


def l1_loss(target_rgb, generated_rgb) -> float:
    """Mean absolute per-element difference."""
    target_rgb = np.asarray(target_rgb)
    generated_rgb = np.asarray(generated_rgb)
    if target_rgb.shape != generated_rgb.shape:
        raise ShapeMismatch(0, f"l1 shapes differ: {target_rgb.shape} vs {generated_rgb.shape}")
    return float(np.mean(np.abs(target_rgb - generated_rgb)))


def l1_grad(target_rgb, generated_rgb) -> np.ndarray:
    """d(mean |target - generated|)/d(generated)."""
    diff = np.sign(np.asarray(generated_rgb, dtype=np.float64) - target_rgb)
    return diff / diff.size


def g_total_loss(d_fake, target_rgb, generated_rgb, w: LossWeights) -> float:
    """Adversarial term plus lambda-weighted L1 reconstruction."""
    return g_adv_loss(d_fake) + w.lambda_l1 * l1_loss(target_rgb, generated_rgb)
