"""Greedy best-path decoding and prefix beam search with LM fusion.

Beam hypotheses live over collapsed strings; the language model and the
word reward are charged exactly when a hypothesis grows its collapsed
prefix by one character, which is the moment duplicate frames have been
resolved and the new character is committed.

Three decoding rules restrict the standard search:
  (a) the first committed character is scored by vision alone;
  (b) at frames whose vision argmax is a punctuation mark, only that
      mark and blank are considered;
  (c) the LM query for the character right after an apostrophe runs
      unsmoothed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .ctc import PosteriorGrid
from .lm import CharNgramModel
from .textcore import BLANK, Alphabet, collapse, decode_ids

NEG_INF = float("-inf")

PUNCTUATION = set(".,;:!?'\"()-")


@dataclass(frozen=True)
class FusionConfig:
    w_vision: float = 1.0
    w_lm: float = 1.9
    w_word: float = 1.6
    beam_width: int = 16
    first_char_vision_only: bool = True
    lock_punctuation: bool = True
    apostrophe_no_smoothing: bool = True

    def __post_init__(self):
        if self.beam_width < 1:
            raise ValueError("beam width must be >= 1")
        for w in (self.w_vision, self.w_lm, self.w_word):
            if not np.isfinite(w):
                raise ValueError("fusion weights must be finite")


@dataclass
class Hypothesis:
    """One collapsed prefix with its path mass split by last frame kind."""

    prefix: str
    p_blank: float = NEG_INF     # log mass of paths ending in blank
    p_nonblank: float = NEG_INF  # log mass of paths ending in the last char
    lm_score: float = 0.0
    word_count: int = 0
    fused_score: float = NEG_INF

    @property
    def vision_score(self) -> float:
        return np.logaddexp(self.p_blank, self.p_nonblank)


def fuse(cfg: FusionConfig, vision: float, lm_score: float, word_count: int) -> float:
    """Log-linear score combination."""
    return cfg.w_vision * vision + cfg.w_lm * lm_score + cfg.w_word * word_count


@dataclass(frozen=True)
class RuleDecision:
    allowed: bool        # may this class extend at this frame at all
    lm_scored: bool      # does the LM contribute to this extension
    smoothing_on: bool   # smoothing flag for the LM query


def apply_special_rules(
    frame_log_probs: np.ndarray,
    prefix: str,
    candidate: int,
    alphabet: Alphabet,
    cfg: FusionConfig,
) -> RuleDecision:
    """Constrain one candidate extension of `prefix` by class `candidate`."""
    if cfg.lock_punctuation:
        top = int(np.argmax(frame_log_probs))
        if top != BLANK and alphabet.symbol(top) in PUNCTUATION:
            if candidate not in (top, BLANK):
                return RuleDecision(allowed=False, lm_scored=False, smoothing_on=True)
    if candidate == BLANK:
        return RuleDecision(allowed=True, lm_scored=False, smoothing_on=True)
    lm_scored = not (cfg.first_char_vision_only and prefix == "")
    smoothing_on = not (cfg.apostrophe_no_smoothing and prefix.endswith("'"))
    return RuleDecision(allowed=True, lm_scored=lm_scored, smoothing_on=smoothing_on)


def greedy_decode(grid: PosteriorGrid, alphabet: Alphabet) -> str:
    """Per-frame argmax, collapsed and rendered to text."""
    path = np.argmax(grid.log_probs, axis=1)
    return decode_ids(collapse(path.tolist()), alphabet)


def beam_decode(
    grid: PosteriorGrid,
    alphabet: Alphabet,
    lm: CharNgramModel | None = None,
    cfg: FusionConfig | None = None,
) -> str:
    """Prefix beam search over collapsed strings with log-linear fusion."""
    cfg = cfg or FusionConfig()
    final = _beam_search(grid, alphabet, lm, cfg)
    return final[0].prefix if final else ""


def _lm_increment(
    lm: CharNgramModel | None, cfg: FusionConfig, prefix: str, char: str, smoothing_on: bool
) -> float:
    if lm is None or cfg.w_lm == 0.0:
        return 0.0
    return lm.log_prob(prefix, char, smoothing_on=smoothing_on)


def _word_increment(prefix: str, char: str) -> int:
    # a word completes on the transition into a space
    return 1 if char == " " and prefix and not prefix.endswith(" ") else 0


def _finalize(hyp: Hypothesis, cfg: FusionConfig) -> Hypothesis:
    wc = hyp.word_count + (1 if hyp.prefix and not hyp.prefix.endswith(" ") else 0)
    return replace(
        hyp, word_count=wc, fused_score=fuse(cfg, hyp.vision_score, hyp.lm_score, wc)
    )


def _beam_search(
    grid: PosteriorGrid,
    alphabet: Alphabet,
    lm: CharNgramModel | None,
    cfg: FusionConfig,
) -> list[Hypothesis]:
    lp = grid.log_probs
    num_classes = grid.num_classes
    beam: dict[str, Hypothesis] = {"": Hypothesis(prefix="", p_blank=0.0)}

    for t in range(grid.num_frames):
        row = lp[t]
        nxt: dict[str, Hypothesis] = {}

        def bump(prefix: str, *, blank_mass=NEG_INF, nonblank_mass=NEG_INF,
                 lm_score=0.0, word_count=0):
            hyp = nxt.get(prefix)
            if hyp is None:
                hyp = Hypothesis(prefix=prefix, lm_score=lm_score, word_count=word_count)
                nxt[prefix] = hyp
            hyp.p_blank = np.logaddexp(hyp.p_blank, blank_mass)
            hyp.p_nonblank = np.logaddexp(hyp.p_nonblank, nonblank_mass)

        for hyp in beam.values():
            total = hyp.vision_score
            last = hyp.prefix[-1] if hyp.prefix else None

            blank_rule = apply_special_rules(row, hyp.prefix, BLANK, alphabet, cfg)
            if blank_rule.allowed:
                bump(hyp.prefix, blank_mass=total + row[BLANK],
                     lm_score=hyp.lm_score, word_count=hyp.word_count)

            for cls in range(1, num_classes):
                char = alphabet.symbol(cls)
                rule = apply_special_rules(row, hyp.prefix, cls, alphabet, cfg)
                if not rule.allowed:
                    continue
                if char == last:
                    # same frame class again: merges into the same prefix
                    bump(hyp.prefix, nonblank_mass=hyp.p_nonblank + row[cls],
                         lm_score=hyp.lm_score, word_count=hyp.word_count)
                    base = hyp.p_blank  # a repeat char needs the blank bridge
                else:
                    base = total
                if base == NEG_INF:
                    continue
                lm_inc = _lm_increment(lm, cfg, hyp.prefix, char, rule.smoothing_on) \
                    if rule.lm_scored else 0.0
                bump(hyp.prefix + char, nonblank_mass=base + row[cls],
                     lm_score=hyp.lm_score + lm_inc,
                     word_count=hyp.word_count + _word_increment(hyp.prefix, char))

        for hyp in nxt.values():
            hyp.fused_score = fuse(cfg, hyp.vision_score, hyp.lm_score, hyp.word_count)
        ranked = sorted(nxt.values(), key=lambda h: (h.fused_score, h.prefix), reverse=True)
        beam = {h.prefix: h for h in ranked[: cfg.beam_width]}

    final = [_finalize(h, cfg) for h in beam.values()]
    final.sort(key=lambda h: (h.fused_score, h.prefix), reverse=True)
    return final
