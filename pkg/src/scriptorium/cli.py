"""Command-line pipeline: synth, train, lm, eval, compare, serve.

Exit codes: 0 ok, 2 usage or input problem, 3 data mismatch,
4 corrupt artifact. Every run is deterministic given its flags; the
run header written into output files embeds a hash of the full config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
from pathlib import Path

from . import __version__
from .errors import (
    AlphabetMismatch, CorruptFile, EmptySplit, ScriptoriumError, UnknownSymbol,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_CORRUPT = 4


def config_hash(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]


def _run_header(command: str, config: dict) -> list[str]:
    return [
        f"# scriptorium {command} v{__version__}",
        f"# config_hash={config_hash(config)}",
        f"# config={json.dumps(config, sort_keys=True, separators=(',', ':'))}",
    ]


def _data_dir(args) -> Path:
    """--data flag, else the SCRIPTORIUM_DATA environment variable."""
    raw = args.data or os.environ.get("SCRIPTORIUM_DATA")
    if not raw:
        raise ScriptoriumError("no data directory: pass --data or set SCRIPTORIUM_DATA")
    return Path(raw)


def cmd_synth(args) -> int:
    from .data import build_synthetic_dataset
    from .synth import SynthStyle

    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        print(f"error: corpus {corpus_path} not found", file=sys.stderr)
        return EXIT_USAGE
    lines = [ln for ln in corpus_path.read_text(encoding="utf-8").splitlines() if ln]
    if args.count is not None:
        lines = lines[: args.count]
    style = SynthStyle(noise_sigma=args.noise, rotation_deg=args.rotation)
    manifest = build_synthetic_dataset(
        lines, args.out, style_seed=args.seed, height=args.height,
        split=args.split, style=style)
    print(f"rendered {len(manifest.records)} lines into {args.out} "
          f"(seed {args.seed}, split {args.split})")
    return EXIT_OK


def _load_train_data(data_dir: Path):
    from .data import ingest_reactions, load_manifest, load_samples
    from .errors import NoTimedRecords
    from .nnet.train import TrainData

    manifest = load_manifest(data_dir / "manifest.jsonl")
    alphabet = manifest.load_alphabet()
    if alphabet is None:
        raise AlphabetMismatch("manifest does not reference an alphabet file")
    train_samples = load_samples(manifest, "train", alphabet)
    val_samples = load_samples(manifest, "validation", alphabet)
    try:
        _, annotations, stats = ingest_reactions(manifest.split("train"))
        for sample in train_samples:
            sample.annotation = annotations.get(sample.sample_id)
        print(f"reaction coverage: {stats.timed}/{stats.total} "
              f"({100 * stats.coverage:.1f}%), outliers dropped: {stats.dropped_outliers}")
    except NoTimedRecords:
        annotations = {}
    return TrainData(train_samples, val_samples, alphabet), alphabet


def cmd_train(args) -> int:
    from .nnet import TrainSchedule, save_checkpoint, train
    from .nnet.model import CrnnConfig, MiniCrnn
    from .psych import PsychLossConfig

    data_dir = _data_dir(args)
    data, alphabet = _load_train_data(data_dir)

    loss_cfg = None
    if args.loss == "psych":
        loss_cfg = PsychLossConfig(mode=args.mode, lam=getattr(args, "lambda"))
    schedule = TrainSchedule(
        patience_lr=args.patience_lr, patience_stop=args.patience_stop,
        optimizer=args.optimizer, base_lr=args.lr, seed=args.seed,
        max_epochs=args.max_epochs, batch_size=args.batch_size)
    model_config = CrnnConfig(num_classes=alphabet.num_classes, height=args.height)
    config = {
        "command": "train", "data": str(data_dir), "loss": args.loss,
        "mode": args.mode, "lambda": getattr(args, "lambda"),
        "optimizer": args.optimizer, "lr": args.lr, "seed": args.seed,
        "patience_lr": args.patience_lr, "patience_stop": args.patience_stop,
        "max_epochs": args.max_epochs, "batch_size": args.batch_size,
        "height": args.height,
    }
    print("\n".join(_run_header("train", config)))
    print(f"schedule: halve lr after {args.patience_lr} stale epochs, "
          f"stop after {args.patience_stop}")

    def report(stats):
        print(f"epoch {stats.epoch}: loss={stats.train_loss:.4f} "
              f"val_cer={stats.val_cer:.4f} val_wer={stats.val_wer:.4f} "
              f"lr={stats.lr:.2e}")
        return False

    result = train(data, schedule, loss_cfg, config=model_config, epoch_callback=report)

    ckpt_path = Path(args.ckpt or data_dir / f"model-{args.loss}-seed{args.seed}.ckpt")
    model = MiniCrnn(result.config, seed=schedule.seed)
    model.load_arrays(result.params)
    save_checkpoint(ckpt_path, model, alphabet, result.optimizer_state,
                    meta={"epoch": result.best_epoch, "val_cer": result.best_val_cer})

    history_path = Path(args.history or data_dir / f"history-{args.loss}-seed{args.seed}.csv")
    with open(history_path, "w", encoding="utf-8", newline="") as fh:
        for line in _run_header("train", config):
            fh.write(line + "\n")
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_cer", "val_wer", "lr"])
        for s in result.history:
            writer.writerow([s.epoch, repr(s.train_loss), repr(s.val_cer),
                             repr(s.val_wer), repr(s.lr)])
    print(f"best val_cer {result.best_val_cer:.4f} at epoch {result.best_epoch}")
    print(f"checkpoint: {ckpt_path}\nhistory: {history_path}")
    return EXIT_OK


def cmd_lm(args) -> int:
    from .lm import save_lm, train_lm
    from .textcore import Alphabet

    corpus_path = Path(args.corpus)
    if not corpus_path.exists():
        print(f"error: corpus {corpus_path} not found", file=sys.stderr)
        return EXIT_USAGE
    alphabet = Alphabet.load(args.alphabet)
    with open(corpus_path, encoding="utf-8") as fh:
        model = train_lm(fh, args.order, alphabet)
    save_lm(model, args.out)
    print(f"character {args.order}-gram model over {len(model.vocab)} symbols "
          f"-> {args.out} (dropped {model.dropped_chars} foreign chars)")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .ctc import PosteriorGrid
    from .data import load_manifest, load_samples
    from .decode import FusionConfig, beam_decode
    from .lm import load_lm
    from .nnet import load_checkpoint
    from .nnet.train import evaluate_greedy
    from .textcore import decode_ids, edit_distance, words

    ckpt = load_checkpoint(args.ckpt)
    model = ckpt.build_model()
    manifest = load_manifest(_data_dir(args) / "manifest.jsonl")
    samples = load_samples(manifest, args.split, ckpt.alphabet)
    if not samples:
        raise EmptySplit(f"split {args.split!r} is empty")

    if args.lm is None:
        cer_value, wer_value, lines = evaluate_greedy(model, samples, ckpt.alphabet)
    else:
        lm_model = load_lm(args.lm)
        cfg = FusionConfig(beam_width=args.beam)
        char_err = char_tot = word_err = word_tot = 0
        lines = []
        for sample in samples:
            grid = PosteriorGrid(model.forward(sample.image).log_probs)
            pred = beam_decode(grid, ckpt.alphabet, lm_model, cfg)
            ref = decode_ids(sample.label, ckpt.alphabet)
            d = edit_distance(pred, ref)
            wd = edit_distance(words(pred), words(ref))
            char_err += d
            char_tot += len(ref)
            word_err += wd
            word_tot += len(words(ref))
            lines.append({"id": sample.sample_id, "reference": ref, "prediction": pred,
                          "char_errors": d, "char_total": len(ref),
                          "word_errors": wd, "word_total": len(words(ref))})
        cer_value, wer_value = char_err / char_tot, word_err / word_tot

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(lines[0].keys()))
            writer.writeheader()
            writer.writerows(lines)
    print(f"CER {cer_value:.4f}")
    print(f"WER {wer_value:.4f}")
    return EXIT_OK


def _read_history(path: Path) -> tuple[dict, list[dict]]:
    config = None
    rows = []
    with open(path, encoding="utf-8") as fh:
        data_lines = []
        for line in fh:
            if line.startswith("# config="):
                config = json.loads(line[len("# config="):])
            elif not line.startswith("#"):
                data_lines.append(line)
        reader = csv.DictReader(io.StringIO("".join(data_lines)))
        for row in reader:
            rows.append({k: float(v) for k, v in row.items()})
    if config is None or not rows:
        raise ScriptoriumError(f"{path}: not a training history file")
    return config, rows


def cmd_compare(args) -> int:
    histories = [_read_history(Path(p)) for p in args.histories]
    by_loss: dict[str, dict[int, float]] = {}
    for config, rows in histories:
        best = min(r["val_cer"] for r in rows)
        by_loss.setdefault(config["loss"], {})[int(config["seed"])] = best
    if set(by_loss) != {"ctc", "psych"}:
        print("error: need histories from both a ctc and a psych run", file=sys.stderr)
        return EXIT_USAGE
    seeds = sorted(set(by_loss["ctc"]) & set(by_loss["psych"]))
    unpaired = set(by_loss["ctc"]) ^ set(by_loss["psych"])
    if unpaired or not seeds:
        print(f"error: unpaired seeds: {sorted(unpaired)}", file=sys.stderr)
        return EXIT_USAGE

    deltas = [by_loss["psych"][s] - by_loss["ctc"][s] for s in seeds]
    wins = sum(1 for d in deltas if d < 0)
    mean = sum(deltas) / len(deltas)
    if len(deltas) > 1:
        variance = sum((d - mean) ** 2 for d in deltas) / (len(deltas) - 1)
        stderr = math.sqrt(variance / len(deltas))
    else:
        stderr = float("nan")
    print(f"{'seed':>6} {'ctc':>10} {'psych':>10} {'delta':>10}")
    for s, d in zip(seeds, deltas):
        print(f"{s:>6} {by_loss['ctc'][s]:>10.4f} {by_loss['psych'][s]:>10.4f} {d:>+10.4f}")
    print(f"pairs {len(seeds)}, psych wins {wins}/{len(seeds)}, "
          f"mean delta {mean:+.4f} +- {stderr:.4f} (standard error)")
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import load_config, serve_forever

    try:
        config = load_config(args.config)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: bad config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    serve_forever(config)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scriptorium",
        description="Handwritten line recognition with reaction-time-weighted training")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic line-image dataset")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--split", default="train", choices=["train", "validation", "test"])
    p.add_argument("--noise", type=float, default=0.03)
    p.add_argument("--rotation", type=float, default=5.0)
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train the line recognizer")
    p.add_argument("--data", default=None, help="dataset dir (or $SCRIPTORIUM_DATA)")
    p.add_argument("--loss", default="ctc", choices=["ctc", "psych"])
    p.add_argument("--mode", default="weighted", choices=["literal", "weighted"])
    p.add_argument("--lambda", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--optimizer", default="rmsprop",
                   choices=["rmsprop", "adam", "adadelta"])
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--patience-lr", type=int, default=15)
    p.add_argument("--patience-stop", type=int, default=80)
    p.add_argument("--max-epochs", type=int, default=10_000)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--ckpt", default=None)
    p.add_argument("--history", default=None)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("lm", help="train a character n-gram language model")
    p.add_argument("--corpus", required=True)
    p.add_argument("--alphabet", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--order", type=int, default=5)
    p.set_defaults(fn=cmd_lm)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--data", default=None, help="dataset dir (or $SCRIPTORIUM_DATA)")
    p.add_argument("--split", default="validation", choices=["validation", "test"])
    p.add_argument("--lm", default=None)
    p.add_argument("--beam", type=int, default=16)
    p.add_argument("--out", default=None, help="per-line CSV path")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("compare", help="paired comparison of training histories")
    p.add_argument("--histories", nargs="+", required=True)
    p.set_defaults(fn=cmd_compare)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--config", required=True)
    p.set_defaults(fn=cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.fn(args)
    except CorruptFile as exc:
        print(f"error: corrupt artifact: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except (AlphabetMismatch, EmptySplit) as exc:
        print(f"error: data mismatch: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ScriptoriumError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
