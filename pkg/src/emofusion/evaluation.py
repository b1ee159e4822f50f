"""Leave-one-actor-out evaluation with resumable, atomically written fold files."""

from __future__ import annotations

import csv
import io
import json
import os
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import dsp
from .dataset import ClipRecord, ClipSample, load_sample
from .errors import ConfigError, FormatError, StateError
from .model import EMOTIONS, ModelConfig, init_model, visual_only_variant
from .training import TrainConfig, evaluate, train, write_epoch_log

__all__ = [
    "FoldResult",
    "LooSummary",
    "actors_of",
    "split_loo",
    "choose_validation_actor",
    "summarize",
    "run_loo",
    "write_summary_csv",
    "format_summary",
]


@dataclass
class FoldResult:
    held_out_actor: str
    accuracy: float
    confusion: np.ndarray
    n_test: int
    epochs_ran: int
    mode: str = "av"
    validation_actor: str | None = None

    def __post_init__(self):
        self.confusion = np.asarray(self.confusion, dtype=np.int64)
        if int(self.confusion.sum()) != self.n_test:
            raise ConfigError(f"fold {self.held_out_actor}: confusion sums to "
                              f"{int(self.confusion.sum())}, expected {self.n_test}")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ConfigError(f"fold {self.held_out_actor}: accuracy {self.accuracy} outside [0, 1]")

    def to_json(self) -> str:
        return json.dumps({
            "held_out_actor": self.held_out_actor,
            "accuracy": self.accuracy,
            "confusion": self.confusion.tolist(),
            "n_test": self.n_test,
            "epochs_ran": self.epochs_ran,
            "mode": self.mode,
            "validation_actor": self.validation_actor,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "FoldResult":
        try:
            d = json.loads(text)
            return cls(d["held_out_actor"], float(d["accuracy"]), np.array(d["confusion"]),
                       int(d["n_test"]), int(d["epochs_ran"]), d.get("mode", "av"), d.get("validation_actor"))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"bad fold file: {exc}") from None

    def save(self, path: str | os.PathLike) -> None:
        tmp = f"{os.fspath(path)}.tmp"
        with open(tmp, "w") as fh:
            fh.write(self.to_json())
        os.replace(tmp, path)

    @classmethod
    def load(cls, path: str | os.PathLike) -> "FoldResult":
        return cls.from_json(Path(path).read_text())


@dataclass
class LooSummary:
    per_fold: list[FoldResult]
    mean_accuracy: float
    std_accuracy: float
    mode: str
    confusion: np.ndarray = field(default_factory=lambda: np.zeros((6, 6), dtype=np.int64))


def actors_of(records: Sequence[ClipRecord]) -> list[str]:
    return sorted({r.actor_id for r in records})


def split_loo(records: Sequence[ClipRecord], actor: str) -> tuple[list[ClipRecord], list[ClipRecord]]:
    """Every clip of ``actor`` goes to the test side and everything else to training."""
    test = [r for r in records if r.actor_id == actor]
    if not test:
        raise ConfigError(f"actor {actor!r} not in manifest")
    return [r for r in records if r.actor_id != actor], test


def choose_validation_actor(train_actors: Sequence[str], held_out: str, seed: int) -> str | None:
    """One training-side actor picked by a seed tied to the held-out actor."""
    pool = sorted(train_actors)
    if len(pool) < 2:
        return None
    rng = np.random.default_rng([seed, zlib.crc32(held_out.encode())])
    return pool[int(rng.integers(len(pool)))]


def summarize(per_fold: Sequence[FoldResult], mode: str | None = None) -> LooSummary:
    """Mean and population standard deviation of fold accuracies, plus pooled confusion."""
    if not per_fold:
        raise ConfigError("no folds to summarize")
    acc = np.array([f.accuracy for f in per_fold], dtype=np.float64)
    confusion = np.sum([f.confusion for f in per_fold], axis=0)
    return LooSummary(list(per_fold), float(acc.mean()), float(acc.std()),
                      mode or per_fold[0].mode, confusion)


def _fold_path(out_dir: Path, actor: str) -> Path:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in actor)
    return out_dir / f"fold_{safe}.json"


def _fold_error(exc: Exception, actor: str) -> Exception:
    msg = f"fold for actor {actor!r} failed: {exc}"
    try:
        return type(exc)(msg)
    except TypeError:
        return StateError(msg)


def run_loo(records: Sequence[ClipRecord], model_config: ModelConfig = ModelConfig(),
            train_config: TrainConfig = TrainConfig(), mode: str = "av",
            out_dir: str | os.PathLike | None = None, validation_seed: int = 0,
            settings: dsp.SpectrogramSettings = dsp.SpectrogramSettings(),
            audio_loader: Callable[[os.PathLike], dsp.AudioClip] | None = None,
            log: Callable[[str], None] | None = None) -> LooSummary:
    """Train and test once per actor.

    With ``out_dir`` set, each fold result is written to ``fold_<actor>.json``
    as soon as it finishes and existing fold files are reused, so an
    interrupted run picks up where it stopped.  Each fold also gets an epoch
    log ``fold_<actor>.log.csv``.
    """
    if mode not in ("av", "video"):
        raise ConfigError(f"unknown mode {mode!r}")
    actors = actors_of(records)
    if len(actors) < 2:
        raise ConfigError("leave-one-actor-out needs at least two actors")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    say = log or (lambda msg: None)
    cache: dict[str, ClipSample] = {}

    def samples(recs: Sequence[ClipRecord]) -> list[ClipSample]:
        for r in recs:
            if r.clip_id not in cache:
                cache[r.clip_id] = load_sample(r, mode, settings, model_config.n_frames,
                                               (model_config.visual_height, model_config.visual_width),
                                               audio_loader=audio_loader)
        return [cache[r.clip_id] for r in recs]

    folds = []
    for actor in actors:
        path = _fold_path(out, actor) if out is not None else None
        if path is not None and path.exists():
            fold = FoldResult.load(path)
            if fold.mode != mode or fold.held_out_actor != actor:
                raise StateError(f"{path} belongs to a different run (mode {fold.mode}, actor {fold.held_out_actor})")
            say(f"fold {actor}: reusing {path.name} (accuracy {fold.accuracy:.4f})")
            folds.append(fold)
            continue
        try:
            train_recs, test_recs = split_loo(records, actor)
            val_actor = choose_validation_actor(actors_of(train_recs), actor, validation_seed)
            fit_recs = [r for r in train_recs if r.actor_id != val_actor]
            val_recs = [r for r in train_recs if r.actor_id == val_actor]
            cfg = model_config if model_config.mode == mode else ModelConfig(
                **{**model_config.__dict__, "mode": mode})
            model = init_model(cfg) if mode == "av" else visual_only_variant(cfg)
            best, reports = train(model, samples(fit_recs), samples(val_recs), train_config,
                                  on_epoch=lambda r: say(f"fold {actor} epoch {r.epoch}: train_loss "
                                                         f"{r.train_loss:.4f} val_acc {r.val_accuracy:.4f}"))
            _, acc, confusion = evaluate(best, samples(test_recs), train_config.eval_batch_size)
        except Exception as exc:
            raise _fold_error(exc, actor) from exc
        fold = FoldResult(actor, acc, confusion, len(test_recs), len(reports), mode, val_actor)
        say(f"fold {actor}: accuracy {acc:.4f} after {len(reports)} epochs")
        if path is not None:
            fold.save(path)
            write_epoch_log(path.with_name(path.stem + ".log.csv"), reports)
        folds.append(fold)

    summary = summarize(folds, mode)
    if out is not None:
        write_summary_csv(out / "summary.csv", summary)
        (out / "summary.txt").write_text(format_summary(summary))
    return summary


def write_summary_csv(path: str | os.PathLike, summary: LooSummary) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["actor", "accuracy", "n_test", "epochs"])
        for f in summary.per_fold:
            w.writerow([f.held_out_actor, repr(f.accuracy), f.n_test, f.epochs_ran])


def format_summary(summary: LooSummary) -> str:
    buf = io.StringIO()
    name = "audio+video" if summary.mode == "av" else "video-only"
    buf.write(f"leave-one-actor-out summary ({name})\n")
    buf.write(f"{'actor':<12}{'accuracy':>10}{'n_test':>8}{'epochs':>8}\n")
    for f in summary.per_fold:
        buf.write(f"{f.held_out_actor:<12}{f.accuracy:>10.4f}{f.n_test:>8d}{f.epochs_ran:>8d}\n")
    buf.write(f"{'mean':<12}{summary.mean_accuracy:>10.4f}\n")
    buf.write(f"{'std':<12}{summary.std_accuracy:>10.4f}\n")
    buf.write("pooled confusion (rows true, columns predicted):\n")
    buf.write(" " * 9 + "".join(f"{e[:7]:>8}" for e in EMOTIONS) + "\n")
    for e, row in zip(EMOTIONS, summary.confusion):
        buf.write(f"{e:<9}" + "".join(f"{int(v):>8d}" for v in row) + "\n")
    return buf.getvalue()
