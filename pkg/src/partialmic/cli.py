"""Command-line entry point: ``partialmic <subcommand> ...``.

Exit status is 0 on success, 1 when arguments or configuration are
invalid and 2 when execution fails.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .augment import AugmentConfig, augment_batch
from .dataio import generate_synthetic, load_dataset, make_batches, save_dataset
from .gradcheck import TINY_CONFIG, finite_difference_check
from .metrics import evaluate, report_to_csv
from .model import ModelConfig, load_checkpoint
from .plotting import write_f1_plot
from .trainer import TrainConfig, run_experiment

log = logging.getLogger("partialmic")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
GRADCHECK_TOLERANCE = 1e-4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# flag -> (section or None, field)
TRAIN_FLAGS = {
    "epochs": (None, "epochs"),
    "batch_size": (None, "batch_size"),
    "lr": (None, "learning_rate"),
    "val_fraction": (None, "val_fraction"),
    "seed": (None, "seed"),
    "selection_metric": (None, "selection_metric"),
    "alpha": ("loss", "alpha"),
    "gamma": ("loss", "gamma"),
    "beta_alpha": ("augment", "beta_alpha"),
    "mixup_prob": ("augment", "mixup_prob"),
    "concat_prob": ("augment", "concat_prob"),
    "hidden": ("model", "hidden"),
    "dropout": ("model", "dropout"),
    "recurrent_dropout": ("model", "recurrent_dropout"),
    "attention_clip": ("model", "attention_clip"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="partialmic", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", help="write a synthetic planted-pattern dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--clips", type=int, default=500)
    p.add_argument("--classes", type=int, default=5)
    p.add_argument("--timesteps", type=int, default=10)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--mask-rate", type=float, default=0.5)
    p.add_argument("--noise", type=float, default=0.1)
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--test-fraction", type=float, default=0.2)
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("train", help="train on the train split and score the test split")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON file with TrainConfig fields")
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--lr", type=float)
    p.add_argument("--val-fraction", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--selection-metric", choices=["val_macro_f1", "val_micro_f1"])
    p.add_argument("--alpha", type=float, help="focal loss class weight")
    p.add_argument("--gamma", type=float, help="focal loss focusing exponent")
    p.add_argument("--beta-alpha", type=float, help="mix-up Beta shape")
    p.add_argument("--mixup-prob", type=float)
    p.add_argument("--concat-prob", type=float)
    p.add_argument("--hidden", type=int)
    p.add_argument("--dropout", type=float)
    p.add_argument("--recurrent-dropout", type=float)
    p.add_argument("--attention-clip", type=float)
    p.add_argument("--record-time", action="store_true",
                   help="fill the seconds column of history.csv (breaks byte-identical reruns)")

    p = sub.add_parser("evaluate", help="score a checkpoint on a dataset split")
    p.add_argument("--data", required=True)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--split", choices=["train", "test", "all"], default="test")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--attention-clip", type=float, default=10.0)
    p.add_argument("--report", help="write the report CSV here instead of stdout")
    p.add_argument("--plot", help="write a per-class F1 SVG here")

    p = sub.add_parser("gradcheck", help="compare analytic and finite-difference gradients")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eps", type=float, default=1e-5)

    p = sub.add_parser("augment-preview", help="show augmented items for one batch as JSON")
    p.add_argument("--data", required=True)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--batch-index", type=int, default=0)
    p.add_argument("--beta-alpha", type=float, default=0.2)
    p.add_argument("--mixup-prob", type=float, default=0.5)
    p.add_argument("--concat-prob", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="write JSON here instead of stdout")
    return parser


def train_config_from_args(args) -> TrainConfig:
    """Config file values overridden by any flag given on the command line."""
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise ValueError(f"cannot read config {args.config}: {e}") from e
        if not isinstance(base, dict):
            raise ValueError("config file must hold a JSON object")
    for flag, (section, name) in TRAIN_FLAGS.items():
        value = getattr(args, flag)
        if value is None:
            continue
        if section is None:
            base[name] = value
        else:
            base.setdefault(section, {})
            if not isinstance(base[section], dict):
                raise ValueError(f"config key {section!r} must be an object")
            base[section][name] = value
    try:
        return TrainConfig.from_dict(base)
    except TypeError as e:
        raise ValueError(str(e)) from e


def validate_synth_args(args):
    if min(args.clips, args.classes, args.timesteps, args.dim) < 1:
        raise ValueError("--clips, --classes, --timesteps and --dim must be >= 1")
    if not 0.0 <= args.mask_rate < 1.0:
        raise ValueError("--mask-rate must lie in [0, 1)")
    if not 0.0 <= args.test_fraction < 1.0:
        raise ValueError("--test-fraction must lie in [0, 1)")
    if args.noise < 0 or args.amplitude <= 0:
        raise ValueError("--noise must be >= 0 and --amplitude > 0")


def cmd_synth(args):
    ds = generate_synthetic(args.clips, args.classes, args.timesteps, args.dim,
                            mask_rate=args.mask_rate, noise_scale=args.noise, seed=args.seed,
                            amplitude=args.amplitude, test_fraction=args.test_fraction)
    save_dataset(ds, args.out)
    log.info("wrote %d clips to %s", len(ds), args.out)


def cmd_train(args, config: TrainConfig):
    meta = json.loads((Path(args.data) / "meta.json").read_text(encoding="utf-8"))
    model = dataclasses.replace(config.model, input_dim=int(meta["feature_dim"]),
                                num_classes=len(meta["class_names"]))
    config = dataclasses.replace(config, model=model)

    def progress(record, _params):
        log.info("epoch %d  loss %.5f  val macro-F1 %.4f  micro-F1 %.4f  (%.2fs)",
                 record.epoch, record.train_loss, record.val_macro_f1, record.val_micro_f1,
                 record.seconds)

    run_experiment(args.data, config, args.out, include_time=args.record_time, progress=progress)
    print(Path(args.out) / "report.csv")


def cmd_evaluate(args):
    if not 0.0 < args.threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    dataset = load_dataset(args.data)
    if args.split != "all":
        dataset = dataset.split(args.split)
    params = load_checkpoint(args.checkpoint)
    D, H, C = params.dims
    config = ModelConfig(input_dim=D, hidden=H, num_classes=C,
                         attention_clip=args.attention_clip)
    report = evaluate(params, dataset, args.threshold, config)
    text = report_to_csv(report)
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.plot:
        write_f1_plot(report, args.plot)
    log.info("macro-F1 %.4f  micro-F1 %.4f", report.macro_f1, report.micro_f1)


def cmd_gradcheck(args):
    err = finite_difference_check(TINY_CONFIG, seed=args.seed, eps=args.eps)
    print(f"max relative error {err:.3e}")
    if err >= GRADCHECK_TOLERANCE:
        log.error("gradient check failed: %.3e >= %.0e", err, GRADCHECK_TOLERANCE)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_augment_preview(args):
    config = AugmentConfig(args.beta_alpha, args.mixup_prob, args.concat_prob)
    dataset = load_dataset(args.data).split("train")
    batches = make_batches(dataset, args.batch_size, shuffle=True, seed=args.seed)
    if not 0 <= args.batch_index < len(batches):
        raise ValueError(f"batch index {args.batch_index} outside 0..{len(batches) - 1}")
    batch = batches[args.batch_index]
    rng = np.random.default_rng(args.seed)
    out = {
        "config": dataclasses.asdict(config),
        "source": [{"clip_id": ex.clip_id, "labels": ex.labels.tolist()}
                   for ex in batch.examples],
        "sub_batches": [
            {
                "timesteps": int(sb.features.shape[1]),
                "items": [{"targets": sb.targets[k].tolist(), "mask": sb.mask[k].tolist()}
                          for k in range(len(sb))],
            }
            for sb in augment_batch(batch, config, rng)
        ],
    }
    text = json.dumps(out, indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as e:
        print(e, file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as e:  # --help
        return EXIT_OK if e.code in (0, None) else EXIT_INVALID

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        config = train_config_from_args(args) if args.command == "train" else None
        if args.command == "synth":
            validate_synth_args(args)
        if args.command == "augment-preview":
            AugmentConfig(args.beta_alpha, args.mixup_prob, args.concat_prob)
        if args.command == "gradcheck" and args.eps <= 0:
            raise ValueError("--eps must be > 0")
    except ValueError as e:
        print(f"partialmic: invalid configuration: {e}", file=sys.stderr)
        return EXIT_INVALID

    try:
        if args.command == "synth":
            cmd_synth(args)
        elif args.command == "train":
            cmd_train(args, config)
        elif args.command == "evaluate":
            cmd_evaluate(args)
        elif args.command == "gradcheck":
            return cmd_gradcheck(args)
        elif args.command == "augment-preview":
            cmd_augment_preview(args)
    except Exception as e:  # noqa: BLE001 - every failure maps to one exit code
        print(f"partialmic {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
