import itertools
import math

import numpy as np
import pytest

from scriptorium.ctc import PosteriorGrid
from scriptorium.decode import (
    FusionConfig, apply_special_rules, beam_decode, fuse, greedy_decode,
)
from scriptorium.lm import train_lm
from scriptorium.textcore import Alphabet, collapse, decode_ids, encode

from conftest import random_grid

AB = Alphabet(("a", "b"))


def one_hot(classes, num_classes):
    lp = np.full((len(classes), num_classes), -np.inf)
    for t, k in enumerate(classes):
        lp[t, k] = 0.0
    return PosteriorGrid(lp)


NO_FUSION = FusionConfig(w_lm=0.0, w_word=0.0, beam_width=1)


class TestGreedy:
    def test_blank_separated_repeat(self):
        assert greedy_decode(one_hot([1, 0, 1], 3), AB) == "aa"

    def test_adjacent_repeat_merges(self):
        assert greedy_decode(one_hot([1, 1, 2], 3), AB) == "ab"

    def test_all_blank(self):
        assert greedy_decode(one_hot([0, 0, 0], 3), AB) == ""


class TestBeamDegenerate:
    def test_deterministic_grids_match_greedy(self, rng):
        for _ in range(200):
            T = int(rng.integers(1, 9))
            classes = rng.integers(0, 3, size=T).tolist()
            grid = one_hot(classes, 3)
            assert beam_decode(grid, AB, None, NO_FUSION) == greedy_decode(grid, AB)

    def test_wide_beam_finds_most_probable_string(self, rng):
        # exhaustive oracle: total probability of each collapsed string
        for _ in range(30):
            T = int(rng.integers(2, 6))
            C = int(rng.integers(2, 4))
            grid = PosteriorGrid(random_grid(rng, T, C))
            totals = {}
            for path in itertools.product(range(C), repeat=T):
                text = decode_ids(collapse(path), AB)
                score = sum(grid.log_probs[t, k] for t, k in enumerate(path))
                totals[text] = np.logaddexp(totals.get(text, -np.inf), score)
            best = max(sorted(totals), key=lambda s: totals[s])
            cfg = FusionConfig(w_lm=0.0, w_word=0.0, beam_width=4096)
            assert beam_decode(grid, AB, None, cfg) == best

    def test_wider_beam_never_scores_worse(self, rng):
        from scriptorium.decode import _beam_search
        model = train_lm(["abab baba", "ab ab"], 3, AB)
        for _ in range(20):
            grid = PosteriorGrid(random_grid(rng, 5, 3))
            scores = []
            for width in (1, 2, 4, 8, 32):
                cfg = FusionConfig(beam_width=width)
                scores.append(_beam_search(grid, AB, model, cfg)[0].fused_score)
            assert all(b >= a - 1e-12 for a, b in zip(scores, scores[1:]))

    def test_output_always_within_alphabet(self, rng):
        model = train_lm(["ab ba"], 2, AB)
        for _ in range(25):
            grid = PosteriorGrid(random_grid(rng, 6, 3))
            out = beam_decode(grid, AB, model, FusionConfig(beam_width=4))
            assert set(out) <= set(AB.symbols)


class TestFusionArithmetic:
    def test_documented_weights(self):
        cfg = FusionConfig()
        assert (cfg.w_vision, cfg.w_lm, cfg.w_word) == (1.0, 1.9, 1.6)

    def test_fused_score_example(self):
        # extending by a char with log p_vision -1.0, log p_lm -0.5,
        # completing one word
        assert fuse(FusionConfig(), -1.0, -0.5, 1) == pytest.approx(-0.35)


class TestSpecialRules:
    PUNCT_AB = Alphabet(("a", ".", "'"))

    def test_first_char_skips_lm(self):
        row = np.log(np.full(4, 0.25))
        first = apply_special_rules(row, "", 1, self.PUNCT_AB, FusionConfig())
        later = apply_special_rules(row, "a", 1, self.PUNCT_AB, FusionConfig())
        assert not first.lm_scored
        assert later.lm_scored

    def test_punctuation_frame_locks_candidates(self):
        row = np.log(np.array([0.1, 0.2, 0.6, 0.1]))  # argmax is '.'
        cfg = FusionConfig()
        assert apply_special_rules(row, "a", 2, self.PUNCT_AB, cfg).allowed
        assert apply_special_rules(row, "a", 0, self.PUNCT_AB, cfg).allowed
        assert not apply_special_rules(row, "a", 1, self.PUNCT_AB, cfg).allowed
        relaxed = FusionConfig(lock_punctuation=False)
        assert apply_special_rules(row, "a", 1, self.PUNCT_AB, relaxed).allowed

    def test_apostrophe_disables_smoothing(self):
        row = np.log(np.full(4, 0.25))
        rule = apply_special_rules(row, "don'", 1, self.PUNCT_AB, FusionConfig())
        assert rule.lm_scored and not rule.smoothing_on
        plain = apply_special_rules(row, "don", 1, self.PUNCT_AB, FusionConfig())
        assert plain.smoothing_on

    def test_first_char_rule_makes_lm_free_tie(self):
        # one frame, two equally likely characters: with the first-char rule
        # the LM cannot break the tie, so fused scores are equal
        from scriptorium.decode import _beam_search
        lp = np.log(np.array([[1e-9, 0.5, 0.5 - 1e-9]]))
        lp -= np.log(np.exp(lp).sum(axis=1, keepdims=True))
        model = train_lm(["aaaa"], 2, AB)
        final = _beam_search(PosteriorGrid(lp), AB, model, FusionConfig(beam_width=8))
        scores = {h.prefix: h.fused_score for h in final}
        assert scores["a"] == pytest.approx(scores["b"], abs=1e-6)


class TestLanguageModelFlip:
    def test_corpus_consistent_string_wins(self):
        alpha = Alphabet(("e", "h", "t"))
        model = train_lm(["the the the", "the thee"], 3, alpha)
        eps = 1e-6
        rows = np.array([
            [eps, eps, eps, 1.0],      # t
            [eps, 0.55, 0.45, eps],    # corrupted char: vision prefers e
            [1.0, eps, eps, eps],      # strong blank separator
            [eps, 0.45, 0.55, eps],    # vision prefers h
        ])
        rows /= rows.sum(axis=1, keepdims=True)
        grid = PosteriorGrid(np.log(rows))
        assert greedy_decode(grid, alpha) == "teh"
        cfg = FusionConfig(beam_width=16)
        assert beam_decode(grid, alpha, model, cfg) == "the"
