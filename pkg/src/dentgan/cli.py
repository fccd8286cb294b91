"""Single entry-point command line: gen-phantoms, augment, train, infer,
evaluate, inspect-arch.

Every subcommand takes its settings from defaults -> --config file ->
--set key=value overrides -> --seed, and writes the fully resolved
configuration next to its outputs so artifacts are self-describing.
Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import imageio, pipeline
from .config import RunConfig, load_run_config, render_config
from .errors import DentganError, MissingMask
from .metrics import evaluate_dataset, render_report
from .network import build_discriminator, build_generator, count_parameters, forward, infer_shapes
from .palette import decode_mask, default_palette, encode_mask, normalize, quantize_output
from .phantom import dataset_pair
from .trainer import fit, load_checkpoint
from .util import parallel_map

TINY_PRESET = {"image_size": "64", "depth": "6", "base_width": "8"}


def _add_config_flags(sp):
    sp.add_argument("--config", metavar="FILE", help="key = value config file")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override one config key (repeatable)")
    sp.add_argument("--seed", type=int, help="root seed for all randomness")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dentgan",
        description="Conditional-GAN semantic segmentation of dental bitewing radiographs.",
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    sp = sub.add_parser("gen-phantoms", help="generate synthetic (radiograph, mask) pairs")
    _add_config_flags(sp)
    sp.add_argument("--n", type=int, required=True, help="number of pairs")
    sp.add_argument("--out", required=True, help="output directory (images/ + masks/)")
    sp.set_defaults(func=cmd_gen_phantoms)

    sp = sub.add_parser("augment", help="expand a paired dataset by augmentation")
    _add_config_flags(sp)
    sp.add_argument("--data", required=True, help="input directory (images/ + masks/)")
    sp.add_argument("--out", required=True, help="output directory (images/ + masks/)")
    sp.add_argument("--factor", type=int, help="expansion factor (overrides config)")
    sp.set_defaults(func=cmd_augment)

    sp = sub.add_parser("train", help="train the generator/discriminator pair")
    _add_config_flags(sp)
    sp.add_argument("--data", required=True, help="training directory (images/ + masks/)")
    sp.add_argument("--out", required=True, help="output directory for checkpoints and logs")
    sp.add_argument("--resume", metavar="CKPT", help="checkpoint to continue from")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("infer", help="segment radiographs with a trained checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--images", required=True, help="directory of grayscale PNGs")
    sp.add_argument("--out", required=True, help="directory for predicted mask PNGs")
    sp.set_defaults(func=cmd_infer)

    sp = sub.add_parser("evaluate", help="compare predicted masks against ground truth")
    sp.add_argument("--pred", required=True, help="directory of predicted mask PNGs")
    sp.add_argument("--gt", required=True, help="directory of ground-truth mask PNGs")
    sp.add_argument("--format", choices=["text", "csv"], default="text")
    sp.add_argument("--out", help="write the report here instead of stdout")
    sp.add_argument("--accuracy", action="store_true", help="add an accuracy column")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("inspect-arch", help="print the layer tables of both networks")
    sp.add_argument("--preset", choices=["paper", "tiny"], default="paper")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    sp.set_defaults(func=cmd_inspect_arch)

    return parser


def _parse_sets(pairs) -> dict:
    overrides = {}
    for item in pairs:
        if "=" not in item:
            raise DentganError(f"--set expects KEY=VALUE, got '{item}'")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def _resolve_config(args, extra: dict | None = None) -> RunConfig:
    overrides = _parse_sets(getattr(args, "set", []))
    overrides.update(extra or {})
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = str(args.seed)
    return load_run_config(getattr(args, "config", None), overrides)


def _echo_config(cfg: RunConfig, out_dir):
    with open(os.path.join(out_dir, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_config(cfg))


def _write_pairs(pairs, out_dir):
    images = os.path.join(out_dir, "images")
    masks = os.path.join(out_dir, "masks")
    os.makedirs(images, exist_ok=True)
    os.makedirs(masks, exist_ok=True)
    palette = default_palette()
    for pair in pairs:
        imageio.write_gray(os.path.join(images, f"{pair.id}.png"), pair.radiograph)
        imageio.write_rgb(os.path.join(masks, f"{pair.id}.png"), decode_mask(pair.mask, palette))


def cmd_gen_phantoms(args) -> int:
    cfg = _resolve_config(args)
    spec = cfg.to_phantom()
    spec.validate()
    if args.n < 1:
        raise DentganError(f"--n must be >= 1, got {args.n}")
    pairs = parallel_map(lambda i: dataset_pair(cfg.seed, spec, i), range(args.n))
    os.makedirs(args.out, exist_ok=True)
    _write_pairs(pairs, args.out)
    _echo_config(cfg, args.out)
    print(f"wrote {len(pairs)} pairs to {args.out}")
    return 0


def cmd_augment(args) -> int:
    extra = {}
    if args.factor is not None:
        extra["expansion_factor"] = str(args.factor)
    cfg = _resolve_config(args, extra)
    spec = cfg.to_augment()
    spec.validate()
    palette = default_palette()
    pairs = pipeline.load_pairs(os.path.join(args.data, "images"), os.path.join(args.data, "masks"), palette)
    total = len(pairs) * spec.expansion_factor
    expanded = parallel_map(
        lambda idx: pipeline.expansion_variant(pairs, spec, cfg.seed, idx), range(total)
    )
    os.makedirs(args.out, exist_ok=True)
    _write_pairs(expanded, args.out)
    _echo_config(cfg, args.out)
    print(f"expanded {len(pairs)} pairs x{spec.expansion_factor} -> {total} in {args.out}")
    return 0


def cmd_train(args) -> int:
    from .report import save_loss_figure, write_losses_csv

    cfg = _resolve_config(args)
    tcfg = cfg.to_train()
    palette = default_palette()
    pairs = pipeline.load_pairs(os.path.join(args.data, "images"), os.path.join(args.data, "masks"), palette)
    dataset = pipeline.prepare(pairs, tcfg.arch.image_size)
    resume = load_checkpoint(args.resume) if args.resume else None
    os.makedirs(args.out, exist_ok=True)
    _echo_config(cfg, args.out)

    def log(record):
        print(
            f"step {record.step}: d={record.d_loss:.4f} g_adv={record.g_adv:.4f} "
            f"g_l1={record.g_l1:.4f} g_total={record.g_total:.4f}",
            flush=True,
        )

    G, D, train_report = fit(dataset, tcfg, resume=resume, out_dir=args.out, palette=palette, log=log)
    write_losses_csv(train_report, os.path.join(args.out, "losses.csv"))
    if train_report.steps:
        save_loss_figure(train_report, os.path.join(args.out, "losses.png"))
    print(f"finished {len(train_report.steps)} steps; outputs in {args.out}")
    return 0


def segment_image(G, gray: np.ndarray, image_size: int, palette, leaky_slope: float) -> np.ndarray:
    """resize -> normalize -> eval forward -> quantize: one predicted mask."""
    resized = pipeline.resize_gray(gray, image_size)
    x = normalize(resized)[None, None, :, :]
    out = forward(G, x, mode="eval", leaky_slope=leaky_slope)
    rgb_float = out[0].transpose(1, 2, 0)
    return quantize_output(rgb_float, palette)


def cmd_infer(args) -> int:
    ckpt = load_checkpoint(args.checkpoint)
    arch = ckpt.config.arch
    G = build_generator(arch)
    G.params = {k: v.copy() for k, v in ckpt.g_params.items()}
    palette = default_palette()
    os.makedirs(args.out, exist_ok=True)
    names = imageio.list_pngs(args.images)
    for name in names:
        gray = imageio.read_gray(os.path.join(args.images, name))
        mask = segment_image(G, gray, arch.image_size, palette, arch.leaky_slope)
        imageio.write_rgb(os.path.join(args.out, name), decode_mask(mask, palette))
    print(f"segmented {len(names)} images into {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    from .report import save_metrics_figure

    palette = default_palette()
    gt_names = imageio.list_pngs(args.gt)
    mask_pairs = []
    for name in gt_names:
        pred_path = os.path.join(args.pred, name)
        if not os.path.isfile(pred_path):
            raise MissingMask(name)
        pred = encode_mask(imageio.read_rgb(pred_path), palette, tolerance=0)
        gt = encode_mask(imageio.read_rgb(os.path.join(args.gt, name)), palette, tolerance=0)
        mask_pairs.append((pred, gt))
    metrics_report = evaluate_dataset(mask_pairs, palette, ids=gt_names)
    text = render_report(metrics_report, args.format, accuracy=args.accuracy)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        save_metrics_figure(metrics_report, os.path.splitext(args.out)[0] + ".png")
        print(f"report written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _format_arch_table(graph, input_shape) -> list[str]:
    shapes = infer_shapes(graph, input_shape)
    header = f"{'name':<6}{'op':<9}{'kernel':<8}{'stride':<8}{'channels':<12}{'norm':<6}{'activation':<12}{'output':<14}remark"
    lines = [header]
    for spec, shape in zip(graph.layers, shapes):
        kernel = f"{spec.kernel[0]}x{spec.kernel[1]}" if spec.kernel else "-"
        stride = f"{spec.stride[0]}x{spec.stride[1]}" if spec.stride else "-"
        if spec.kind == "flatten":
            op, channels, remark = "flatten", spec.remark, "flatten"
        else:
            op = {"conv": "conv", "deconv": "deconv", "fully_connected": "dense"}[spec.kind]
            channels = spec.channels_label()
            remark = spec.remark
        out = "x".join(str(v) for v in shape)
        lines.append(
            f"{spec.name:<6}{op:<9}{kernel:<8}{stride:<8}{channels:<12}"
            f"{'yes' if spec.batch_norm else 'no':<6}{spec.activation:<12}{out:<14}{remark}".rstrip()
        )
    return lines


def cmd_inspect_arch(args) -> int:
    overrides = dict(TINY_PRESET) if args.preset == "tiny" else {}
    overrides.update(_parse_sets(args.set))
    cfg = load_run_config(None, overrides)
    arch = cfg.to_arch()
    G = build_generator(arch)
    D = build_discriminator(arch)
    gen_input = (arch.input_channels, arch.image_size, arch.image_size)
    disc_input = (arch.input_channels + arch.output_channels, arch.image_size, arch.image_size)
    print(f"generator  input {'x'.join(map(str, gen_input))}  parameters {count_parameters(G)}")
    for line in _format_arch_table(G, gen_input):
        print(line)
    print()
    print(f"discriminator  input {'x'.join(map(str, disc_input))}  parameters {count_parameters(D)}")
    for line in _format_arch_table(D, disc_input):
        print(line)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 1
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except DentganError as exc:
        print(f"dentgan: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"dentgan: error: {exc}", file=sys.stderr)
        return 2


def entry():
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entry()
