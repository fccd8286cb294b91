import numpy as np
import pytest

from conftest import naive_conv2d, naive_deconv2d
from dentgan.errors import InvalidConfig, NonFiniteActivation, ShapeMismatch
from dentgan.network import (
    ArchConfig,
    LayerSpec,
    NetworkGraph,
    build_discriminator,
    build_generator,
    count_parameters,
    forward,
    infer_shapes,
)
from dentgan.network.graph import KERNEL, STRIDE
from dentgan.rng import Stream

TINY = ArchConfig(image_size=64, depth=6, base_width=8)


def layer(g, name):
    return next(s for s in g.layers if s.name == name)


def test_generator_encoder_channels_default():
    g = build_generator(ArchConfig())
    enc = [layer(g, f"e{k}").out_channels for k in range(1, 9)]
    assert enc == [64, 128, 256, 512, 512, 512, 512, 512]
    for k in range(1, 9):
        spec = layer(g, f"e{k}")
        assert spec.kernel == KERNEL and spec.stride == STRIDE
        assert spec.batch_norm and spec.activation == "leaky_relu"


def test_generator_decoder_concat_widths_default():
    g = build_generator(ArchConfig())
    labels = [layer(g, f"d{k}").channels_label() for k in range(1, 8)]
    assert labels == ["512+512", "512+512", "512+512", "512+512", "256+256", "128+128", "64+64"]
    assert layer(g, "d8").channels_label() == "3"
    assert layer(g, "d1").skip_source == "e7"
    assert layer(g, "d7").skip_source == "e1"


def test_generator_dropout_on_d1_d3_only():
    g = build_generator(ArchConfig())
    for k in range(1, 9):
        expected = 0.5 if k <= 3 else 0.0
        assert layer(g, f"d{k}").dropout == expected


def test_generator_final_stage():
    g = build_generator(ArchConfig())
    d8 = layer(g, "d8")
    assert d8.batch_norm is False and d8.activation == "none"
    out = layer(g, "out")
    assert out.kind == "fully_connected"
    assert out.activation == "tanh"
    assert out.in_channels == 3 and out.out_channels == 3
    assert len(g.layers) == 17


def test_generator_shape_chain_default():
    g = build_generator(ArchConfig())
    shapes = infer_shapes(g, (1, 256, 256))
    # encoder spatial sizes halve down to the 1x1 bottleneck
    for k in range(1, 9):
        assert shapes[k - 1] == (layer(g, f"e{k}").out_channels, 256 >> k, 256 >> k)
    assert shapes[7] == (512, 1, 1)
    assert shapes[-1] == (3, 256, 256)


def test_generator_no_skip_ablation():
    g = build_generator(ArchConfig(skip_connections=False))
    assert layer(g, "d1").channels_label() == "512"
    assert layer(g, "d1").skip_source is None
    with_skips = infer_shapes(build_generator(ArchConfig()), (1, 256, 256))
    without = infer_shapes(g, (1, 256, 256))
    for a, b in zip(with_skips, without):
        assert a[1:] == b[1:]  # same spatial chain, only widths differ
    assert without[8] == (512, 2, 2)
    assert with_skips[8] == (1024, 2, 2)


def test_discriminator_structure():
    d = build_discriminator(ArchConfig())
    assert [s.out_channels for s in d.layers[:4]] == [64, 128, 256, 512]
    assert d.layers[4].kind == "flatten"
    assert d.layers[4].remark == "16*16*512"
    assert d.layers[5].kind == "fully_connected"
    assert d.layers[5].out_channels == 1
    assert d.layers[5].activation == "sigmoid"
    assert len(d.layers) == 6
    shapes = infer_shapes(d, (4, 256, 256))
    assert shapes == [
        (64, 128, 128),
        (128, 64, 64),
        (256, 32, 32),
        (512, 16, 16),
        (131072,),
        (1,),
    ]


def test_discriminator_small_config():
    d = build_discriminator(ArchConfig(image_size=64, depth=6, base_width=8))
    shapes = infer_shapes(d, (4, 64, 64))
    assert shapes[3] == (64, 4, 4)
    assert shapes[4] == (1024,)


def test_count_parameters_examples():
    single = NetworkGraph(
        "single",
        [LayerSpec("c", "conv", 1, 64, KERNEL, STRIDE, False, "none")],
        1,
    )
    assert count_parameters(single) == 5 * 5 * 1 * 64 + 64 == 1664
    assert count_parameters(NetworkGraph("empty", [], 1)) == 0
    d = build_discriminator(ArchConfig())
    dense = d.layers[5]
    assert dense.in_channels * dense.out_channels + dense.out_channels == 131073


def test_count_parameters_matches_allocated():
    for graph in (build_generator(TINY), build_discriminator(TINY)):
        graph.init_parameters(0)
        allocated = sum(
            graph.params[n].size
            for n in graph.param_names()
        )
        assert allocated == count_parameters(graph)


def test_infer_shapes_rejects_wrong_channels():
    g = build_generator(ArchConfig())
    with pytest.raises(ShapeMismatch):
        infer_shapes(g, (3, 256, 256))


def test_forward_rejects_wrong_channels():
    g = build_generator(TINY).init_parameters(0)
    with pytest.raises(ShapeMismatch):
        forward(g, np.zeros((1, 3, 64, 64)))


def test_arch_config_validation():
    with pytest.raises(InvalidConfig):
        ArchConfig(image_size=100).validate()
    with pytest.raises(InvalidConfig):
        ArchConfig(image_size=64, depth=8).validate()
    with pytest.raises(InvalidConfig):
        ArchConfig(base_width=0).validate()
    with pytest.raises(InvalidConfig):
        ArchConfig(depth=2).validate()


def test_zero_parameters_give_zero_output():
    g = build_generator(TINY).init_parameters(0)
    for name in g.params:
        if not name.endswith("run_var"):
            g.params[name] = np.zeros_like(g.params[name])
    x = Stream(1).uniform(2 * 64 * 64, -1.0, 1.0).reshape(2, 1, 64, 64)
    y = forward(g, x, mode="eval")
    assert y.shape == (2, 3, 64, 64)
    assert (y == 0.0).all()


def test_eval_forward_deterministic():
    g = build_generator(TINY).init_parameters(3)
    x = Stream(2).uniform(64 * 64, -1.0, 1.0).reshape(1, 1, 64, 64)
    a = forward(g, x, mode="eval")
    b = forward(g, x, mode="eval")
    assert (a == b).all()


def test_train_forward_dropout_seeded():
    g = build_generator(TINY).init_parameters(3)
    x = Stream(2).uniform(64 * 64, -1.0, 1.0).reshape(1, 1, 64, 64)
    a = forward(g, x, mode="train", seed=5)
    b = forward(g, x, mode="train", seed=5)
    c = forward(g, x, mode="train", seed=6)
    assert (a == b).all()
    assert not (a == c).all()


def test_output_ranges():
    g = build_generator(TINY).init_parameters(11)
    d = build_discriminator(TINY).init_parameters(12)
    x = Stream(7).uniform(2 * 64 * 64, -1.0, 1.0).reshape(2, 1, 64, 64)
    y = forward(g, x, mode="eval")
    assert (np.abs(y) <= 1.0).all()
    p = forward(d, np.concatenate([x, y], axis=1), mode="eval")
    assert p.shape == (2, 1)
    assert ((p > 0.0) & (p < 1.0)).all()


def test_non_finite_detection():
    g = build_generator(TINY).init_parameters(0)
    g.params["e3.w"] = g.params["e3.w"] * np.inf
    x = Stream(1).uniform(64 * 64, -1.0, 1.0).reshape(1, 1, 64, 64)
    with pytest.raises(NonFiniteActivation) as exc:
        forward(g, x, mode="eval")
    assert exc.value.layer_name == "e3"


def test_conv_matches_naive_oracle_double():
    rng = Stream(21)
    for h, wd in ((8, 8), (9, 11), (16, 16)):
        x = rng.normal(2 * 3 * h * wd).reshape(2, 3, h, wd)
        w = rng.normal(4 * 3 * 25).reshape(4, 3, 5, 5)
        b = rng.normal(4)
        y, _ = __import__("dentgan.network.ops", fromlist=["ops"]).conv2d_forward(x, w, b, 2)
        assert np.abs(y - naive_conv2d(x, w, b, 2)).max() < 1e-10


def test_deconv_matches_naive_oracle_double():
    from dentgan.network import ops

    rng = Stream(22)
    for h, wd in ((8, 8), (5, 7), (16, 16)):
        x = rng.normal(2 * 3 * h * wd).reshape(2, 3, h, wd)
        w = rng.normal(3 * 4 * 25).reshape(3, 4, 5, 5)
        b = rng.normal(4)
        y, _ = ops.deconv2d_forward(x, w, b, 2)
        assert y.shape == (2, 4, 2 * h, 2 * wd)
        assert np.abs(y - naive_deconv2d(x, w, b, 2)).max() < 1e-10


def test_conv_matches_naive_oracle_single():
    from dentgan.network import ops

    rng = Stream(23)
    x = rng.normal(1 * 2 * 12 * 12).reshape(1, 2, 12, 12).astype(np.float32)
    w = rng.normal(3 * 2 * 25).reshape(3, 2, 5, 5).astype(np.float32)
    b = rng.normal(3).astype(np.float32)
    y, _ = ops.conv2d_forward(x, w, b, 2)
    assert y.dtype == np.float32
    assert np.abs(y - naive_conv2d(x, w, b, 2)).max() < 1e-4


def test_hand_set_kernel_on_ramp_image():
    # one 5x5 stride-2 conv on an 8x8 ramp, verified against the loop oracle
    from dentgan.network import ops

    x = np.arange(64, dtype=np.float64).reshape(1, 1, 8, 8)
    w = np.zeros((1, 1, 5, 5))
    w[0, 0, 2, 2] = 1.0  # center tap: strided input offset by pad_begin = 1
    b = np.zeros(1)
    y, _ = ops.conv2d_forward(x, w, b, 2)
    assert (y[0, 0] == x[0, 0, 1::2, 1::2]).all()
    w = Stream(31).normal(25).reshape(1, 1, 5, 5)
    y, _ = ops.conv2d_forward(x, w, b, 2)
    assert np.abs(y - naive_conv2d(x, w, b, 2)).max() < 1e-10
