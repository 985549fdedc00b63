"""Dataset records, JSONL manifests, reaction ingestion, synthetic sets.

A manifest is UTF-8 JSON Lines: a header object, then one LineRecord per
line. The serializer is canonical (sorted keys, compact separators), so
load followed by write reproduces the file byte for byte.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import synth
from .errors import MissingImage, NoTimedRecords, SchemaError, UnknownSymbol
from .psych import PsychAnnotation, ReactionSet, annotate
from .textcore import Alphabet, encode

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MANIFEST_KIND = "scriptorium-manifest"
SPLITS = ("train", "validation", "test")
MAX_REACTION_MS = 60_000.0  # beyond this the annotator walked away


@dataclass
class LineRecord:
    id: str
    image_path: str
    transcription: str
    annotator_id: str = ""
    split: str = "train"
    char_times_ms: list[float] | None = None
    line_time_ms: float | None = None
    difficulty: int | None = None
    extra: dict = field(default_factory=dict)

    def reaction_ms(self) -> float | None:
        """Line-level reaction time, deriving from character times if needed."""
        if self.line_time_ms is not None:
            return self.line_time_ms
        if self.char_times_ms:
            return float(sum(self.char_times_ms)) / len(self.char_times_ms)
        return None

    def to_json(self) -> str:
        data = {k: v for k, v in asdict(self).items() if v is not None and k != "extra"}
        data.update(self.extra)
        return json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


_KNOWN_FIELDS = {
    "id": str, "image_path": str, "transcription": str, "annotator_id": str,
    "split": str, "line_time_ms": (int, float), "difficulty": int,
}


def record_from_dict(data: dict, line_no: int) -> LineRecord:
    for name in ("id", "image_path", "transcription"):
        if name not in data:
            raise SchemaError(f"missing field {name!r}", line_no)
    known: dict = {}
    extra: dict = {}
    for key, value in data.items():
        if key == "char_times_ms":
            if not isinstance(value, list) or not all(
                    isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
                raise SchemaError("char_times_ms must be a list of numbers", line_no)
            known[key] = [float(v) for v in value]
        elif key in _KNOWN_FIELDS:
            if not isinstance(value, _KNOWN_FIELDS[key]) or isinstance(value, bool):
                raise SchemaError(f"field {key!r} has the wrong type", line_no)
            known[key] = value
        else:
            extra[key] = value
    record = LineRecord(extra=extra, **known)
    if record.split not in SPLITS:
        raise SchemaError(f"unknown split {record.split!r}", line_no)
    if record.difficulty is not None and not 1 <= record.difficulty <= 5:
        raise SchemaError(f"difficulty {record.difficulty} outside 1..5", line_no)
    if record.char_times_ms is not None:
        if not record.char_times_ms:
            raise SchemaError("char_times_ms must not be empty when present", line_no)
        mean = sum(record.char_times_ms) / len(record.char_times_ms)
        if record.line_time_ms is not None and not math.isclose(
                record.line_time_ms, mean, rel_tol=1e-9, abs_tol=1e-6):
            raise SchemaError(
                f"line_time_ms {record.line_time_ms} != mean(char_times_ms) {mean}", line_no)
    return record


@dataclass
class Manifest:
    records: list[LineRecord]
    alphabet_path: str | None = None
    base_dir: Path = Path(".")

    def split(self, name: str) -> list[LineRecord]:
        return [r for r in self.records if r.split == name]

    def split_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in SPLITS}
        for r in self.records:
            counts[r.split] += 1
        return counts

    def load_alphabet(self) -> Alphabet | None:
        if self.alphabet_path is None:
            return None
        return Alphabet.load(self.base_dir / self.alphabet_path)

    def image_file(self, record: LineRecord) -> Path:
        return self.base_dir / record.image_path


def load_manifest(path: str | Path, require_images: bool = True) -> Manifest:
    """Parse and validate a manifest; errors carry the offending line number."""
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise SchemaError("empty manifest file", 1)
    header = _parse_json(lines[0], 1)
    if header.get("kind") != MANIFEST_KIND:
        raise SchemaError(f"not a {MANIFEST_KIND} file", 1)
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema_version {header.get('schema_version')!r}", 1)

    manifest = Manifest(records=[], alphabet_path=header.get("alphabet"), base_dir=path.parent)
    alphabet = manifest.load_alphabet()
    seen: dict[str, int] = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        record = record_from_dict(_parse_json(raw, line_no), line_no)
        if record.id in seen:
            raise SchemaError(
                f"duplicate id {record.id!r} (first at line {seen[record.id]})", line_no)
        seen[record.id] = line_no
        if alphabet is not None:
            for char in record.transcription:
                if char not in alphabet:
                    raise SchemaError(
                        f"transcription character {char!r} not in the alphabet", line_no)
        if require_images and not manifest.image_file(record).exists():
            raise MissingImage(str(manifest.image_file(record)))
        manifest.records.append(record)
    counts = manifest.split_counts()
    log.info("loaded %s: %s", path, ", ".join(f"{k}={v}" for k, v in counts.items()))
    return manifest


def _parse_json(raw: str, line_no: int) -> dict:
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc.msg}", line_no) from exc
    if not isinstance(data, dict):
        raise SchemaError("each manifest line must be a JSON object", line_no)
    return data


def write_manifest(manifest: Manifest, path: str | Path) -> None:
    header: dict = {"kind": MANIFEST_KIND, "schema_version": SCHEMA_VERSION}
    if manifest.alphabet_path is not None:
        header["alphabet"] = manifest.alphabet_path
    lines = [json.dumps(header, sort_keys=True, ensure_ascii=False, separators=(",", ":"))]
    lines += [record.to_json() for record in manifest.records]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


@dataclass
class IngestStats:
    timed: int
    total: int
    dropped_outliers: int

    @property
    def coverage(self) -> float:
        return self.timed / self.total if self.total else 0.0


def ingest_reactions(
    records: Sequence[LineRecord],
    max_reaction_ms: float = MAX_REACTION_MS,
) -> tuple[ReactionSet, dict[str, PsychAnnotation], IngestStats]:
    """Build the reaction set and per-sample penalties for timed records.

    Records above `max_reaction_ms` are treated as annotator walk-aways:
    dropped before the maximum is taken, so one such record cannot zero
    out every other penalty.
    """
    timed: list[tuple[str, float]] = []
    dropped = 0
    for record in records:
        r_ms = record.reaction_ms()
        if r_ms is None:
            continue
        if r_ms > max_reaction_ms:
            dropped += 1
            log.warning("dropping outlier reaction %.0f ms on %s", r_ms, record.id)
            continue
        timed.append((record.id, r_ms))
    if not timed:
        raise NoTimedRecords("no usable reaction times in the given records")
    reaction_set = ReactionSet.from_times([t for _, t in timed])
    annotations = {rid: annotate(rid, r_ms, reaction_set) for rid, r_ms in timed}
    stats = IngestStats(timed=len(timed), total=len(records), dropped_outliers=dropped)
    log.info("reaction coverage: %d/%d lines (%.1f%%), m=%.0f ms",
             stats.timed, stats.total, 100 * stats.coverage, reaction_set.m_ms)
    return reaction_set, annotations, stats


def synth_lines(
    corpus_lines: Iterable[str],
    style_seed: int,
    out_dir: str | Path,
    height: int = 64,
    split: str = "train",
    style: synth.SynthStyle = synth.SynthStyle(),
    start_index: int = 0,
) -> list[LineRecord]:
    """Render lines to PNGs under out_dir/images and return their records."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    records = []
    for i, text in enumerate(corpus_lines, start=start_index):
        image = synth.render_line(text, style_seed, height=height, style=style)
        rel = f"images/{split}-{i:05d}.png"
        synth.save_png(image, out_dir / rel)
        records.append(LineRecord(
            id=f"{split}-{i:05d}", image_path=rel, transcription=text,
            annotator_id="synth", split=split))
    return records


def build_synthetic_dataset(
    corpus_lines: Sequence[str],
    out_dir: str | Path,
    style_seed: int,
    height: int = 64,
    split: str = "train",
    style: synth.SynthStyle = synth.SynthStyle(),
) -> Manifest:
    """synth_lines plus alphabet + manifest files on disk."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = synth_lines(corpus_lines, style_seed, out_dir, height, split, style)
    alphabet = Alphabet.from_text("".join(corpus_lines) or " ")
    alphabet.save(out_dir / "alphabet.txt")
    manifest = Manifest(records=records, alphabet_path="alphabet.txt", base_dir=out_dir)
    write_manifest(manifest, out_dir / "manifest.jsonl")
    return manifest


def load_samples(manifest: Manifest, split: str, alphabet: Alphabet):
    """Materialize a split as training Samples (images in memory)."""
    from .nnet.train import Sample

    samples = []
    for record in manifest.split(split):
        image = synth.load_png(manifest.image_file(record))
        try:
            label = encode(record.transcription, alphabet)
        except UnknownSymbol as exc:
            from .errors import AlphabetMismatch
            raise AlphabetMismatch(f"record {record.id}: {exc}") from exc
        samples.append(Sample(record.id, image, label))
    return samples


def page_disjoint_split(
    pages: dict[str, list[str]],
    fractions: dict[str, float],
    seed: int,
) -> dict[str, str]:
    """Assign whole pages to splits so no page straddles two splits.

    fractions maps split name to a weight (normalized internally);
    returns id -> split.
    """
    names = list(fractions)
    weights = np.array([fractions[n] for n in names], dtype=float)
    weights /= weights.sum()
    order = sorted(pages)
    np.random.default_rng(seed).shuffle(order)
    bounds = np.floor(np.cumsum(weights) * len(order)).astype(int)
    assignment: dict[str, str] = {}
    start = 0
    for name, stop in zip(names, bounds):
        for page in order[start:stop]:
            for rid in pages[page]:
                assignment[rid] = name
        start = stop
    for page in order[start:]:  # rounding remainder goes to the last split
        for rid in pages[page]:
            assignment[rid] = names[-1]
    return assignment
