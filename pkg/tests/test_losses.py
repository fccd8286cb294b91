import math

import numpy as np
import pytest

from dentgan.errors import ShapeMismatch
from dentgan.losses import (
    LossWeights,
    bce,
    d_loss,
    g_adv_loss,
    g_total_loss,
    l1_loss,
)
from dentgan.rng import Stream


def test_bce_values():
    assert bce(0.5, 1) == pytest.approx(math.log(2.0), abs=1e-12)
    assert bce(1.0 - 1e-7, 1) == pytest.approx(0.0, abs=1e-6)
    assert bce(1e-7, 1) == pytest.approx(-math.log(1e-7), rel=1e-9)
    assert bce(1e-7, 1) == pytest.approx(16.118, abs=1e-3)


def test_bce_clamps_extremes():
    assert math.isfinite(bce(0.0, 1))
    assert math.isfinite(bce(1.0, 0))
    assert bce(0.0, 1) == bce(1e-7, 1)


def test_bce_batch_average():
    probs = np.array([0.5, 0.5])
    assert bce(probs, 1) == pytest.approx(math.log(2.0))


def test_d_loss_values():
    assert d_loss(1.0 - 1e-7, 1e-7) == pytest.approx(0.0, abs=1e-5)
    assert d_loss(0.5, 0.5) == pytest.approx(2.0 * math.log(2.0), abs=1e-12)
    assert d_loss(0.5, 1e-7) == pytest.approx(math.log(2.0), abs=1e-6)


def test_d_loss_symmetric_equilibrium_grid_scan():
    # d_loss(p, p) over a grid is minimized at p = 0.5 with value 2 ln 2
    grid = np.linspace(0.01, 0.99, 99)
    values = [d_loss(p, p) for p in grid]
    best = int(np.argmin(values))
    assert grid[best] == pytest.approx(0.5, abs=1e-9)
    assert values[best] == pytest.approx(2.0 * math.log(2.0), abs=1e-9)


def test_g_adv_values():
    assert g_adv_loss(1.0 - 1e-7) == pytest.approx(0.0, abs=1e-6)
    assert g_adv_loss(0.5) == pytest.approx(math.log(2.0), abs=1e-12)
    assert g_adv_loss(1e-7) == pytest.approx(16.118, abs=1e-3)


def test_l1_values():
    a = np.array([1.0, 0.5, -0.25])
    assert l1_loss(a, a) == 0.0
    assert l1_loss(a, a + 0.5) == pytest.approx(0.5)
    assert l1_loss(np.array([-1.0, 0.0, 1.0]), np.zeros(3)) == pytest.approx(2.0 / 3.0)


def test_l1_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        l1_loss(np.zeros((2, 2)), np.zeros((2, 3)))


def test_l1_metric_axioms():
    rng = Stream(71)
    for _ in range(200):
        n = rng.integer(1, 12)
        a = rng.uniform(n, -1, 1)
        b = rng.uniform(n, -1, 1)
        c = rng.uniform(n, -1, 1)
        dab = l1_loss(a, b)
        assert dab >= 0.0
        assert l1_loss(a, a) == 0.0
        if dab == 0.0:
            assert (a == b).all()
        assert dab == pytest.approx(l1_loss(b, a), abs=1e-15)
        assert l1_loss(a, c) <= dab + l1_loss(b, c) + 1e-12


def test_g_total_composition():
    rng = Stream(72)
    y = rng.uniform(27, -1, 1).reshape(3, 3, 3)
    g = rng.uniform(27, -1, 1).reshape(3, 3, 3)
    w100 = LossWeights(lambda_l1=100.0)
    w0 = LossWeights(lambda_l1=0.0)
    total = g_total_loss(0.5, y, g, w100)
    assert total == pytest.approx(g_adv_loss(0.5) + 100.0 * l1_loss(y, g), abs=1e-12)
    assert g_total_loss(0.5, y, g, w0) == g_adv_loss(0.5)
    # vanishing case: perfect reconstruction and a fooled discriminator
    assert g_total_loss(1.0 - 1e-7, y, y, w100) == pytest.approx(0.0, abs=1e-6)


def test_g_total_worked_example():
    # adv 0.6931 (prob 0.5), l1 0.01, lambda 100 -> 1.6931
    y = np.zeros(4)
    g = np.full(4, 0.01)
    total = g_total_loss(0.5, y, g, LossWeights(100.0))
    assert total == pytest.approx(math.log(2.0) + 1.0, abs=1e-9)
    assert total == pytest.approx(1.6931, abs=1e-4)


def test_lambda_linearity():
    rng = Stream(73)
    for _ in range(50):
        y = rng.uniform(12, -1, 1)
        g = rng.uniform(12, -1, 1)
        p = rng.uniform(1, 0.05, 0.95)[0]
        lam = rng.uniform(1, 0.0, 200.0)[0]
        delta = g_total_loss(p, y, g, LossWeights(lam)) - g_total_loss(p, y, g, LossWeights(0.0))
        assert delta == pytest.approx(lam * l1_loss(y, g), abs=1e-9)


def test_losses_finite_for_any_input():
    rng = Stream(74)
    probs = np.concatenate([rng.uniform(20), [0.0, 1.0]])
    for p in probs:
        assert math.isfinite(d_loss(p, 1.0 - p))
        assert math.isfinite(g_adv_loss(p))


def test_loss_weights_validation():
    with pytest.raises(ValueError):
        LossWeights(-1.0)
    with pytest.raises(ValueError):
        LossWeights(float("nan"))
