"""Alphabets, label encoding, the CTC collapse map, and CER/WER metrics.

Index 0 is reserved for the CTC blank everywhere; alphabet symbols get the
1-based indices defined by their order in the alphabet file.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import EmptyReference, UnknownSymbol

BLANK = 0

_SPACE_RUN = re.compile(r" +")


@dataclass(frozen=True)
class Alphabet:
    """Ordered set of recognizable symbols. Blank (index 0) is implicit."""

    symbols: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be unique")
        for s in self.symbols:
            if len(s) != 1:
                raise ValueError(f"alphabet entries must be single characters, got {s!r}")
        object.__setattr__(self, "_index", {s: i + 1 for i, s in enumerate(self.symbols)})

    def __len__(self) -> int:
        return len(self.symbols)

    @property
    def num_classes(self) -> int:
        """Total class count including the blank."""
        return len(self.symbols) + 1

    def __contains__(self, char: str) -> bool:
        return char in self._index

    def index_of(self, char: str) -> int:
        return self._index[char]

    def symbol(self, idx: int) -> str:
        if not 1 <= idx <= len(self.symbols):
            raise IndexError(f"label id {idx} outside [1, {len(self.symbols)}]")
        return self.symbols[idx - 1]

    @classmethod
    def from_text(cls, text: str) -> "Alphabet":
        """Alphabet of the distinct characters of `text`, in codepoint order."""
        return cls(tuple(sorted(set(text))))

    @classmethod
    def load(cls, path: str | Path) -> "Alphabet":
        """Read an alphabet file: one symbol per line, line 0 is `#blank=0`."""
        raw = Path(path).read_text(encoding="utf-8").split("\n")
        if not raw or not raw[0].startswith("#blank=0"):
            raise ValueError(f"{path}: missing '#blank=0' header line")
        lines = raw[1:]
        if lines and lines[-1] == "":  # trailing newline
            lines = lines[:-1]
        return cls(tuple(lines))

    def save(self, path: str | Path) -> None:
        body = "\n".join(self.symbols)
        Path(path).write_text(f"#blank=0\n{body}\n", encoding="utf-8")


def encode(text: str, alphabet: Alphabet) -> list[int]:
    """Map text to 1-based label ids; raises UnknownSymbol on foreign chars."""
    ids = []
    for pos, char in enumerate(text):
        if char not in alphabet:
            raise UnknownSymbol(char, pos)
        ids.append(alphabet.index_of(char))
    return ids


def decode_ids(ids: Sequence[int], alphabet: Alphabet) -> str:
    """Inverse of encode."""
    return "".join(alphabet.symbol(i) for i in ids)


def collapse(path: Sequence[int]) -> list[int]:
    """Many-to-one CTC map: merge adjacent duplicates, then drop blanks."""
    out = []
    prev = None
    for cls in path:
        if cls != prev:
            if cls != BLANK:
                out.append(cls)
            prev = cls
    return out


def edit_distance(a: Sequence, b: Sequence) -> int:
    """Levenshtein distance with unit insert/delete/substitute costs."""
    if len(a) < len(b):
        a, b = b, a
    if len(b) == 0:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(
                prev[j] + 1,           # delete from a
                cur[j - 1] + 1,        # insert into a
                prev[j - 1] + (ca != cb),
            ))
        prev = cur
    return prev[-1]


def cer(pred: str, ref: str) -> float:
    """Character error rate: edit distance over reference length."""
    if len(ref) == 0:
        raise EmptyReference("reference string is empty")
    return edit_distance(pred, ref) / len(ref)


def words(text: str) -> list[str]:
    """Tokenize on runs of ASCII space."""
    return [w for w in _SPACE_RUN.split(text) if w]


def wer(pred: str, ref: str) -> float:
    """Word error rate: word-level edit distance over reference word count."""
    ref_words = words(ref)
    if not ref_words:
        raise EmptyReference("reference has no words")
    return edit_distance(words(pred), ref_words) / len(ref_words)
