import hashlib
import os
import re

import numpy as np
import pytest

from dentgan import imageio
from dentgan.cli import main
from dentgan.config import load_run_config, parse_config_text, render_config
from dentgan.errors import InvalidConfig
from dentgan.network import ArchConfig, build_generator
from dentgan.palette import default_palette, encode_mask
from dentgan.trainer import AdamState, TrainConfig, make_checkpoint, save_checkpoint
from dentgan.network import build_discriminator

TINY_SETS = [
    "--set", "image_size=32", "--set", "teeth_min=1", "--set", "teeth_max=2",
]


def tree_digest(root):
    digest = hashlib.sha256()
    for dirpath, dirnames, filenames in sorted(os.walk(root)):
        dirnames.sort()
        for name in sorted(filenames):
            path = os.path.join(dirpath, name)
            digest.update(os.path.relpath(path, root).encode())
            with open(path, "rb") as fh:
                digest.update(fh.read())
    return digest.hexdigest()


def test_no_arguments_usage_error(capsys):
    assert main([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_flag_usage_error():
    assert main(["gen-phantoms", "--frobnicate"]) == 1


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "COMMAND" in capsys.readouterr().out


def test_gen_phantoms_reproducible_trees(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    for out in (a, b):
        rc = main(["gen-phantoms", "--n", "5", "--seed", "3", "--out", str(out), *TINY_SETS])
        assert rc == 0
    assert tree_digest(a) == tree_digest(b)
    c = tmp_path / "c"
    assert main(["gen-phantoms", "--n", "5", "--seed", "4", "--out", str(c), *TINY_SETS]) == 0
    assert tree_digest(a) != tree_digest(c)


def test_gen_phantoms_writes_layout_and_config(tmp_path):
    out = tmp_path / "d"
    assert main(["gen-phantoms", "--n", "3", "--seed", "1", "--out", str(out), *TINY_SETS]) == 0
    assert sorted(os.listdir(out)) == ["config.txt", "images", "masks"]
    images = sorted(os.listdir(out / "images"))
    assert images == [f"phantom-1-{i}.png" for i in range(3)]
    assert sorted(os.listdir(out / "masks")) == images
    config_text = (out / "config.txt").read_text()
    assert "image_size = 32" in config_text
    assert "seed = 1" in config_text
    # masks decode exactly against the canonical palette
    mask = imageio.read_rgb(out / "masks" / images[0])
    encode_mask(mask, default_palette(), tolerance=0)


def test_inspect_arch_paper_preset(capsys):
    assert main(["inspect-arch", "--preset", "paper"]) == 0
    out = capsys.readouterr().out
    gen_rows = re.findall(r"^(?:e\d|d\d|out)\s", out, flags=re.M)
    assert len(gen_rows) == 17 + 1  # 17 generator rows + discriminator 'out'
    assert "16*16*512" in out
    assert "512+512" in out
    assert out.count("dropout:0.5") == 3


def test_inspect_arch_tiny_preset(capsys):
    assert main(["inspect-arch", "--preset", "tiny"]) == 0
    out = capsys.readouterr().out
    assert "input 1x64x64" in out
    assert "4*4*64" in out


def test_inspect_arch_rejects_bad_override():
    assert main(["inspect-arch", "--set", "image_size=100"]) == 2


def test_infer_zero_checkpoint_uniform_class(tmp_path):
    # a zero-parameter generator emits tanh(0) = mid-gray everywhere, which
    # quantizes to one single palette class for every pixel of every image
    arch = ArchConfig(image_size=32, depth=4, base_width=4)
    cfg = TrainConfig(arch=arch, seed=0)
    G = build_generator(arch).init_parameters(0)
    D = build_discriminator(arch).init_parameters(0)
    for name in list(G.params):
        G.params[name] = np.zeros_like(G.params[name])
    ckpt = make_checkpoint(0, 0, cfg, G, D, AdamState(G), AdamState(D))
    ckpt_path = tmp_path / "zero.bin"
    save_checkpoint(ckpt_path, ckpt)

    data = tmp_path / "data"
    assert main(["gen-phantoms", "--n", "2", "--seed", "2", "--out", str(data), *TINY_SETS]) == 0
    out1 = tmp_path / "p1"
    out2 = tmp_path / "p2"
    assert main(["infer", "--checkpoint", str(ckpt_path), "--images", str(data / "images"), "--out", str(out1)]) == 0
    assert main(["infer", "--checkpoint", str(ckpt_path), "--images", str(data / "images"), "--out", str(out2)]) == 0
    assert tree_digest(out1) == tree_digest(out2)  # eval-mode determinism
    palette = default_palette()
    for name in os.listdir(out1):
        mask = encode_mask(imageio.read_rgb(out1 / name), palette, tolerance=0)
        assert len(np.unique(mask)) == 1


def test_evaluate_perfect_scores(tmp_path):
    data = tmp_path / "data"
    assert main(["gen-phantoms", "--n", "3", "--seed", "5", "--out", str(data), *TINY_SETS]) == 0
    report_path = tmp_path / "m.csv"
    rc = main(["evaluate", "--pred", str(data / "masks"), "--gt", str(data / "masks"),
               "--format", "csv", "--out", str(report_path)])
    assert rc == 0
    lines = report_path.read_text().splitlines()
    assert lines[0] == "class,precision,tpr,tnr,dice,images,skipped"
    agg = [l for l in lines if l.startswith("aggregate,")][0]
    parts = agg.split(",")
    assert parts[1] == parts[2] == parts[3] == parts[4] == "1"
    assert (tmp_path / "m.png").exists()


def test_evaluate_missing_pred(tmp_path):
    data = tmp_path / "data"
    assert main(["gen-phantoms", "--n", "2", "--seed", "5", "--out", str(data), *TINY_SETS]) == 0
    empty = tmp_path / "empty"
    empty.mkdir()
    assert main(["evaluate", "--pred", str(empty), "--gt", str(data / "masks")]) == 2


def test_unknown_config_key_is_runtime_error(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("no_such_key = 5\n")
    rc = main(["gen-phantoms", "--n", "1", "--out", str(tmp_path / "x"), "--config", str(cfg)])
    assert rc == 2


def test_config_parse_types_and_comments():
    text = """
    # comment line
    image_size = 64   # trailing comment
    skip_connections = false
    rotation_degrees = 0,90,180
    learning_rate = 1e-3
    """
    values = parse_config_text(text)
    assert values["image_size"] == 64
    assert values["skip_connections"] is False
    assert values["rotation_degrees"] == (0.0, 90.0, 180.0)
    assert values["learning_rate"] == 1e-3


def test_config_unknown_key_and_bad_value():
    with pytest.raises(InvalidConfig):
        parse_config_text("bogus = 1")
    with pytest.raises(InvalidConfig):
        parse_config_text("image_size = soup")
    with pytest.raises(InvalidConfig):
        parse_config_text("just a line")
    with pytest.raises(InvalidConfig):
        parse_config_text("skip_connections = maybe")


def test_config_render_round_trip(tmp_path):
    cfg = load_run_config(None, {"image_size": "64", "epochs": "3", "allow_hflip": "false"})
    text = render_config(cfg)
    path = tmp_path / "echo.cfg"
    path.write_text(text)
    again = load_run_config(path, None)
    assert again == cfg


def test_config_defaults_follow_recipe():
    cfg = load_run_config(None, None)
    assert cfg.learning_rate == 2e-4
    assert cfg.batch_size == 2
    assert cfg.epochs == 20
    assert cfg.lambda_l1 == 100.0
    assert cfg.image_size == 256
    assert cfg.expansion_factor == 360
    tcfg = cfg.to_train()
    tcfg.validate()
    assert tcfg.arch.depth == 8


def test_augment_cli_layout(tmp_path):
    data = tmp_path / "data"
    assert main(["gen-phantoms", "--n", "2", "--seed", "8", "--out", str(data), *TINY_SETS]) == 0
    out = tmp_path / "aug"
    rc = main(["augment", "--data", str(data), "--out", str(out), "--factor", "3",
               "--seed", "9", "--set", "max_translate=4"])
    assert rc == 0
    names = sorted(os.listdir(out / "images"))
    assert len(names) == 6
    assert "phantom-8-0.png" in names
    assert "phantom-8-0-aug1.png" in names
    assert sorted(os.listdir(out / "masks")) == names
    # identical invocation gives identical bytes
    out2 = tmp_path / "aug2"
    main(["augment", "--data", str(data), "--out", str(out2), "--factor", "3",
          "--seed", "9", "--set", "max_translate=4"])
    assert tree_digest(out) == tree_digest(out2)
