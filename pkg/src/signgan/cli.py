"""Command line entry points.

Exit codes: 0 success, 2 usage or configuration error, 3 runtime failure.
The seed falls back to ``$SGL_SEED`` when ``--seed`` is not given.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .config import ExperimentConfig, load_config
from .errors import (
    ConfigError, ConfigMismatch, EmptyDataset, EmptyEvaluation, SignGanError, SpecError,
)

log = logging.getLogger("signgan")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    pass


def _seed(args) -> Optional[int]:
    if getattr(args, "seed", None) is not None:
        return args.seed
    env = os.environ.get("SGL_SEED")
    if env is None:
        return None
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"SGL_SEED must be an integer, got {env!r}")


# -- commands ------------------------------------------------------------------

def cmd_make_synth_data(args) -> int:
    from .ingestion import write_synthetic_corpus

    if args.signers < 1:
        raise UsageError("--signers must be >= 1")
    if args.frames < 2:
        raise UsageError("--frames must be >= 2")
    manifest = write_synthetic_corpus(args.out, args.signers, args.frames, seed=_seed(args) or 0, size=args.size)
    print(f"wrote {args.signers} clips x {args.frames} frames; manifest {manifest}")
    return EXIT_OK


def _experiment(args) -> ExperimentConfig:
    config = load_config(args.config)
    overrides = {}
    seed = _seed(args)
    if seed is not None:
        overrides["training"] = {"seed": seed}
        overrides["model"] = {"seed": seed}
    if getattr(args, "schedule", None):
        overrides["schedule"] = {"mode": args.schedule}
    return config.replace(**overrides) if overrides else config


def cmd_train(args) -> int:
    from .ingestion import load_dataset, load_labeled_frames
    from .models import build_networks
    from .training import freeze, run_training, train_parser

    config = _experiment(args)
    if args.epochs < 1:
        raise UsageError("--epochs must be >= 1")
    data = Path(args.data)
    if not (data / "manifest.json").is_file():
        raise UsageError(f"{data} has no manifest.json")
    size = config.model.image_size
    nets = build_networks(config.model)
    if args.parser_checkpoint:
        from .training import load_checkpoint, read_manifest
        # the seed only affects initialization, so a donor trained with another seed is fine
        donor_seed = read_manifest(args.parser_checkpoint)["model"].get("seed")
        _, donor = load_checkpoint(args.parser_checkpoint, expected=dataclasses.replace(config.model, seed=donor_seed))
        nets.parser.load_state_dict(donor.parser.state_dict())
    else:
        frames, labels = load_labeled_frames(data, size)
        if not frames:
            raise UsageError("no exact parsings on disk to train the parser; pass --parser-checkpoint")
        history = train_parser(nets.parser, frames, labels, config.training.parser_epochs,
                               config.training.batch_size, config.optimizer, config.training.seed)
        if history:
            print(f"parser: final cross-entropy {history[-1]:.4f}")
    freeze(nets.parser)
    samples, skipped = load_dataset(data, config.data.stride, nets.parser, size)
    if skipped:
        print(f"skipped {len(skipped)} samples", file=sys.stderr)
    if not samples:
        raise EmptyDataset(f"no usable samples in {data}")
    out = Path(args.out)
    result = run_training(config, samples, args.epochs, nets=nets, out_dir=out,
                          on_epoch_end=lambda e, st, n: print(f"epoch {e + 1}/{args.epochs} step {st.step}"))
    (out / "config.json").write_text(json.dumps(config.to_dict(), indent=2))
    last = result.state.telemetry[-1]
    print(f"done: {result.state.step} steps, final loss_d={last['loss_d']:.4f} loss_g_l1={last['loss_g_l1']:.4f}")
    return EXIT_OK


def _load_nets(checkpoint: str):
    from .training import load_checkpoint

    path = Path(checkpoint)
    if not (path / "manifest.json").is_file():
        raise UsageError(f"checkpoint {path} not found")
    _, nets = load_checkpoint(path)
    return nets.eval()


def cmd_generate(args) -> int:
    from .core import read_frame
    from .synthesis import load_gloss_sequence, timed_video, write_sequence

    nets = _load_nets(args.checkpoint)
    if not Path(args.input_frame).is_file():
        raise UsageError(f"input frame {args.input_frame} not found")
    frame = read_frame(args.input_frame)
    size = nets.config.image_size
    canvas = tuple(args.canvas) if args.canvas else (frame.height, frame.width)
    sequence = load_gloss_sequence(args.gloss_keypoints, canvas=canvas)
    if canvas != (size, size):
        from .ingestion import transform_pose
        sequence = [transform_pose(s, (0.0, 0.0, 1.0, 1.0), size) for s in sequence]
    frames, timings = timed_video(frame, sequence, nets)
    write_sequence(frames, args.out, nets, timings, gif=args.gif)
    print(f"wrote {len(frames)} frames to {args.out}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from .ingestion import load_dataset
    from .metrics import evaluate_dataset
    from .synthesis import synthesize_frame

    nets = _load_nets(args.checkpoint)
    data = Path(args.data)
    if not (data / "manifest.json").is_file():
        raise UsageError(f"{data} has no manifest.json")
    samples, _ = load_dataset(data, args.stride, nets.parser, nets.config.image_size)
    samples = [s for s in samples if s.target_frame is not None]
    if not samples:
        raise UsageError(f"no evaluable samples in {data}")
    report = evaluate_dataset(
        ((synthesize_frame(s.input_frame, s.target_pose, nets), s.target_frame) for s in samples),
        ids=[s.frame_id for s in samples],
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    report.to_csv(out)
    report.to_json(out.with_suffix(".json"))
    print(json.dumps(report.summary(), indent=2))
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plots import plot_telemetry

    written = plot_telemetry(args.telemetry, args.out, args.series or ["loss_d,lambda,sigma"])
    for p in written:
        print(p)
    return EXIT_OK


# -- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="signgan", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("make-synth-data", help="write a procedural signer corpus")
    s.add_argument("--out", required=True)
    s.add_argument("--signers", type=int, required=True)
    s.add_argument("--frames", type=int, required=True)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--seed", type=int)
    s.set_defaults(func=cmd_make_synth_data)

    s = sub.add_parser("train", help="train parser, predictor and GAN")
    s.add_argument("--config")
    s.add_argument("--data", required=True)
    s.add_argument("--epochs", type=int, required=True)
    s.add_argument("--schedule", choices=("dynamic", "static"))
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.add_argument("--parser-checkpoint", help="reuse the parser weights of an existing checkpoint")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("generate", help="synthesize a gloss for the signer in one frame")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--input-frame", required=True)
    s.add_argument("--gloss-keypoints", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--canvas", type=int, nargs=2, metavar=("H", "W"),
                   help="frame size the keypoints refer to (default: input frame size)")
    s.add_argument("--gif", action="store_true")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("evaluate", help="MSE/PSNR/SSIM of synthesized targets")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--stride", type=int, default=1)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("plot", help="plot telemetry columns against epoch progress")
    s.add_argument("--telemetry", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--series", action="append",
                   help="comma-separated column group; repeat for one PNG per group")
    s.set_defaults(func=cmd_plot)
    return p


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"signgan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError, ConfigMismatch, SpecError, EmptyDataset, EmptyEvaluation) as exc:
        print(f"signgan: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SignGanError, OSError) as exc:
        print(f"signgan: failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
