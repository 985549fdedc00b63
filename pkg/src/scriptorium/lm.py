"""Character n-gram language model with Witten-Bell backoff.

Counts are kept for every context length 0..n-1, with begin-of-line
padding so the first characters of a line condition on a start marker.
Smoothed probability interpolates the maximum-likelihood estimate with
the next-shorter context: p(c|ctx) = (count(ctx,c) + T(ctx)*p(c|ctx'))
/ (count(ctx) + T(ctx)) where T is the number of distinct continuations.
At the bottom the unigram interpolates with the uniform distribution, so
every vocabulary character keeps non-zero mass under every context.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from . import container
from .errors import EmptyCorpus, UnknownChar
from .textcore import Alphabet

log = logging.getLogger(__name__)

BOS = "\x02"  # line-start context marker; never a predicted character

NEG_INF = float("-inf")


@dataclass
class CharNgramModel:
    order: int
    vocab: tuple[str, ...]  # alphabet symbols plus space
    # counts[k]: context of length k -> {next char -> count}
    counts: list[dict[str, dict[str, int]]]
    dropped_chars: int = 0
    _totals: list[dict[str, int]] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if not self._totals:
            self._totals = [
                {ctx: sum(nxt.values()) for ctx, nxt in table.items()}
                for table in self.counts
            ]
        self._vocab_set = set(self.vocab)

    def log_prob(self, context: str, next_char: str, smoothing_on: bool = True) -> float:
        """Log probability of `next_char` after `context` (last n-1 chars used)."""
        if next_char not in self._vocab_set:
            raise UnknownChar(f"{next_char!r} is not in the model vocabulary")
        ctx = self._padded_context(context)
        if smoothing_on:
            return math.log(self._smoothed(ctx, next_char, len(ctx)))
        return self._mle_longest(ctx, next_char)

    def _padded_context(self, context: str) -> str:
        width = self.order - 1
        if len(context) >= width:
            return context[len(context) - width:]
        return BOS * (width - len(context)) + context

    def _smoothed(self, ctx: str, next_char: str, k: int) -> float:
        if k == 0:
            table = self.counts[0].get("", {})
            total = self._totals[0].get("", 0)
            distinct = len(table)
            uniform = 1.0 / len(self.vocab)
            if total == 0:
                return uniform
            return (table.get(next_char, 0) + distinct * uniform) / (total + distinct)
        sub = ctx[1:] if k > 1 else ""
        table = self.counts[k].get(ctx)
        if not table:
            return self._smoothed(sub, next_char, k - 1)
        total = self._totals[k][ctx]
        distinct = len(table)
        backoff = self._smoothed(sub, next_char, k - 1)
        return (table.get(next_char, 0) + distinct * backoff) / (total + distinct)

    def _mle_longest(self, ctx: str, next_char: str) -> float:
        """Pure MLE at the longest context that has been observed."""
        for k in range(len(ctx), -1, -1):
            key = ctx[len(ctx) - k:] if k else ""
            table = self.counts[k].get(key)
            if table:
                count = table.get(next_char, 0)
                if count == 0:
                    return NEG_INF
                return math.log(count / self._totals[k][key])
        return NEG_INF  # untrained model

    def add_line(self, line: str) -> None:
        """Count all n-gram events of one corpus line."""
        chars = [c for c in line if c in self._vocab_set]
        self.dropped_chars += len(line) - len(chars)
        if not chars:
            return
        padded = BOS * (self.order - 1) + "".join(chars)
        for j in range(self.order - 1, len(padded)):
            char = padded[j]
            for k in range(self.order):
                ctx = padded[j - k:j]
                table = self.counts[k].setdefault(ctx, {})
                table[char] = table.get(char, 0) + 1
                self._totals[k][ctx] = self._totals[k].get(ctx, 0) + 1


def train_lm(corpus_lines: Iterable[str], n: int, alphabet: Alphabet) -> CharNgramModel:
    """Count-based model over `alphabet` symbols plus space.

    Characters outside the vocabulary are dropped; the total appears in
    model.dropped_chars and in a log line.
    """
    if n < 1:
        raise ValueError("order must be >= 1")
    vocab = tuple(dict.fromkeys(tuple(alphabet.symbols) + (" ",)))
    model = CharNgramModel(order=n, vocab=vocab, counts=[{} for _ in range(n)])
    seen_any = False
    for line in corpus_lines:
        line = line.rstrip("\n")
        if line:
            seen_any = True
        model.add_line(line)
    if not seen_any or not model.counts[0].get("", {}):
        raise EmptyCorpus("corpus contained no usable text")
    if model.dropped_chars:
        log.info("dropped %d out-of-alphabet characters", model.dropped_chars)
    return model


def save_lm(model: CharNgramModel, path: str | Path) -> None:
    """Persist count tables in the named-array container format."""
    arrays: dict[str, np.ndarray] = {
        "meta": np.array([model.order, len(model.vocab), model.dropped_chars], dtype=np.float64),
        "vocab": np.array([ord(c) for c in model.vocab], dtype=np.float64),
    }
    for k, table in enumerate(model.counts):
        rows = []
        for ctx in sorted(table):
            for char in sorted(table[ctx]):
                rows.append([ord(c) for c in ctx] + [ord(char), table[ctx][char]])
        arrays[f"order{k}"] = (
            np.array(rows, dtype=np.float64) if rows else np.zeros((0, k + 2))
        )
    container.write_arrays(path, arrays)


def load_lm(path: str | Path) -> CharNgramModel:
    arrays = container.read_arrays(path)
    order = int(arrays["meta"][0])
    vocab = tuple(chr(int(c)) for c in arrays["vocab"])
    counts: list[dict[str, dict[str, int]]] = []
    for k in range(order):
        table: dict[str, dict[str, int]] = {}
        for row in arrays[f"order{k}"]:
            ctx = "".join(chr(int(c)) for c in row[:k])
            table.setdefault(ctx, {})[chr(int(row[k]))] = int(row[k + 1])
        counts.append(table)
    return CharNgramModel(
        order=order, vocab=vocab, counts=counts, dropped_chars=int(arrays["meta"][2])
    )
