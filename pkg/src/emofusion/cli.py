"""Command-line entry point: ``emofusion {synth,spectrogram,train,eval-loo,infer}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from . import dsp, vision
from .config import RunConfig, resolve
from .dataset import read_manifest, load_samples
from .errors import EmoFusionError, FormatError, ModeMismatchError, ShapeError
from .evaluation import actors_of, choose_validation_actor, format_summary, run_loo
from .model import EMOTIONS, init_model, load_checkpoint, save_checkpoint, visual_only_variant
from .synth import generate
from .training import train, write_epoch_log

CONFIG_ECHO = "run_config.txt"


def _parse_set(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {item!r}")
    k, v = item.split("=", 1)
    return k.strip(), v


def _config_args(p: argparse.ArgumentParser, mode: bool = False) -> None:
    p.add_argument("--config", type=Path, help="key=value settings file")
    p.add_argument("--set", dest="overrides", action="append", type=_parse_set, default=[],
                   metavar="KEY=VALUE", help="override one setting (repeatable)")
    p.add_argument("--seed", type=int, help="global seed for every random choice")
    if mode:
        p.add_argument("--mode", choices=("av", "video"), help="audio+video or video-only")


def _resolve(args) -> RunConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(("seed", str(args.seed)))
    if getattr(args, "mode", None):
        overrides.append(("mode", args.mode))
    return resolve(args.config, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emofusion", description="Audio-visual emotion recognition")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic audio-visual dataset")
    p.add_argument("--out", type=Path, required=True)
    _config_args(p)

    p = sub.add_parser("spectrogram", help="render a WAV file's network spectrogram as PGM")
    p.add_argument("--audio", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    _config_args(p)

    p = sub.add_parser("train", help="train on a manifest with one validation actor")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="directory for model.ckpt and epochs.csv")
    p.add_argument("--val-actor", help="actor held out for early stopping (default: seeded choice)")
    _config_args(p, mode=True)

    p = sub.add_parser("eval-loo", help="leave-one-actor-out evaluation")
    p.add_argument("--manifest", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True, help="directory for fold files and the summary")
    _config_args(p, mode=True)

    p = sub.add_parser("infer", help="classify one clip")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--frames", type=Path, required=True, help="directory of PGM/PPM frames")
    p.add_argument("--boxes", type=Path, help="face boxes CSV (frame,x,y,w,h)")
    p.add_argument("--audio", type=Path, help="WAV file (audio+video checkpoints only)")
    _config_args(p)
    return parser


def cmd_synth(args) -> None:
    cfg = _resolve(args)
    records = generate(cfg.synthetic_spec(), args.out)
    cfg.write(args.out / CONFIG_ECHO)
    print(f"wrote {len(records)} clips for {len(actors_of(records))} actors to {args.out / 'manifest.tsv'}")


def cmd_spectrogram(args) -> None:
    cfg = _resolve(args)
    clip = dsp.load_wav(args.audio)
    values = dsp.spectrogram_pipeline(clip, cfg.spectrogram_settings())
    dsp.export_pgm(values[0], args.out)
    print(f"wrote {values.shape[2]}x{values.shape[1]} spectrogram to {args.out}")


def cmd_train(args) -> None:
    cfg = _resolve(args)
    records = read_manifest(args.manifest)
    actors = actors_of(records)
    val_actor = args.val_actor or cfg["val_actor"] or choose_validation_actor(actors, "", cfg["validation_seed"])
    if val_actor not in actors and val_actor is not None:
        raise FormatError(f"validation actor {val_actor!r} not in manifest (actors: {', '.join(actors)})")
    mode = cfg.mode
    model_cfg = cfg.model_config()
    load = dict(settings=cfg.spectrogram_settings(), n_frames=model_cfg.n_frames,
                frame_size=(model_cfg.visual_height, model_cfg.visual_width))
    fit = load_samples([r for r in records if r.actor_id != val_actor], mode, **load)
    val = load_samples([r for r in records if r.actor_id == val_actor], mode, **load)
    model = init_model(model_cfg) if mode == "av" else visual_only_variant(model_cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    cfg.write(args.out / CONFIG_ECHO)
    best, reports = train(model, fit, val, cfg.train_config(), on_epoch=lambda r: print(
        f"epoch {r.epoch}: train_loss {r.train_loss:.4f} train_acc {r.train_accuracy:.4f} "
        f"val_loss {r.val_loss:.4f} val_acc {r.val_accuracy:.4f} ({r.wall_seconds:.1f}s)", flush=True))
    save_checkpoint(best, args.out / "model.ckpt")
    write_epoch_log(args.out / "epochs.csv", reports)
    print(f"validation actor: {val_actor or 'none'}; wrote {args.out / 'model.ckpt'}")


def cmd_eval_loo(args) -> None:
    cfg = _resolve(args)
    records = read_manifest(args.manifest)
    args.out.mkdir(parents=True, exist_ok=True)
    cfg.write(args.out / CONFIG_ECHO)
    summary = run_loo(records, cfg.model_config(), cfg.train_config(), cfg.mode, args.out,
                      validation_seed=cfg["validation_seed"], settings=cfg.spectrogram_settings(),
                      log=lambda m: print(m, flush=True))
    print(format_summary(summary), end="")


def cmd_infer(args) -> None:
    cfg = _resolve(args)
    model = load_checkpoint(args.checkpoint)
    mc = model.config
    if model.mode == "video" and args.audio is not None:
        raise ModeMismatchError(f"{args.checkpoint} is a video-only checkpoint; run again without --audio")
    if model.mode == "av" and args.audio is None:
        raise ModeMismatchError(f"{args.checkpoint} is an audio+video checkpoint; pass --audio WAV")
    frames = vision.load_frames(args.frames)
    boxes = vision.read_boxes(args.boxes) if args.boxes else None
    stack = vision.prepare_visual(frames, boxes, mc.n_frames, (mc.visual_height, mc.visual_width))
    spec = None
    if args.audio is not None:
        spec = dsp.spectrogram_pipeline(dsp.load_wav(args.audio), cfg.spectrogram_settings())
        if spec.shape != mc.audio_shape:
            raise ShapeError(f"spectrogram is {spec.shape} but the checkpoint expects {mc.audio_shape}; "
                             "match the dsp.* settings used in training")
    probs, label = model.predict(stack, spec)
    for name, p in zip(EMOTIONS, probs):
        print(f"{name:<8} {p:.12f}")
    print(f"label: {EMOTIONS[label]}")


COMMANDS = {
    "synth": cmd_synth,
    "spectrogram": cmd_spectrogram,
    "train": cmd_train,
    "eval-loo": cmd_eval_loo,
    "infer": cmd_infer,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (EmoFusionError, OSError) as exc:
        print(f"emofusion {args.command}: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
