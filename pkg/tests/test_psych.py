import numpy as np
import pytest
from hypothesis import given, strategies as st

from scriptorium.ctc import CtcResult, PosteriorGrid
from scriptorium.errors import EmptyMeasurements, EmptyReference, NegativeEpsilon
from scriptorium.psych import (
    PsychAnnotation, PsychLossConfig, ReactionSet, annotate, epsilon_for_sample,
    line_reaction_time, penalty, psych_loss,
)
from scriptorium.textcore import Alphabet, cer, decode_ids
from scriptorium.decode import greedy_decode

from conftest import random_grid

RSET = ReactionSet.from_times([900, 1400, 2500])


class TestLineReactionTime:
    def test_mean(self):
        assert line_reaction_time([500, 700, 900]) == 700

    def test_singleton(self):
        assert line_reaction_time([1200]) == 1200

    def test_constant(self):
        assert line_reaction_time([300, 300, 300, 300]) == 300

    def test_empty(self):
        with pytest.raises(EmptyMeasurements):
            line_reaction_time([])

    def test_nonpositive(self):
        with pytest.raises(ValueError):
            line_reaction_time([100, 0])


class TestPenalty:
    def test_arithmetic(self):
        z, z_hat = penalty(900, RSET)
        assert z == (2500 - 900) / 1000.0
        assert z == pytest.approx(1.6)
        assert z_hat == (2500 - 900) / 2500
        assert z_hat == pytest.approx(0.64)

    def test_maximum_reaction_time_zero_penalty(self):
        assert penalty(2500, RSET) == (0.0, 0.0)

    def test_late_record_clamped_with_warning(self):
        with pytest.warns(UserWarning):
            z, z_hat = penalty(3000, RSET)
        assert (z, z_hat) == (0.0, 0.0)

    def test_empty_set_rejected(self):
        with pytest.raises(EmptyMeasurements):
            ReactionSet.from_times([])

    @given(st.floats(min_value=1, max_value=2500))
    def test_range_invariants(self, r):
        z, z_hat = penalty(r, RSET)
        assert z >= 0
        assert 0 <= z_hat <= 1

    def test_strictly_decreasing_in_r(self):
        zs = [penalty(r, RSET)[0] for r in (100, 500, 1000, 2000, 2500)]
        assert all(a > b for a, b in zip(zs, zs[1:]))


def _ctc_result(rng):
    grad = rng.normal(size=(4, 3))
    grad -= grad.mean(axis=1, keepdims=True)
    return CtcResult(loss=float(rng.uniform(0.1, 3.0)), grad=grad)


class TestPsychLoss:
    def test_literal_arithmetic(self):
        ctc = CtcResult(loss=0.6931, grad=np.zeros((1, 2)))
        ann = PsychAnnotation("s", 900, z=1.6, z_hat=0.64)
        loss, grad = psych_loss(ctc, 0.5, ann, PsychLossConfig(mode="literal", lam=1.0))
        assert loss == pytest.approx(-0.1069, abs=1e-12)  # may go negative
        assert grad is ctc.grad

    def test_zero_epsilon_is_identity(self, rng):
        ctc = _ctc_result(rng)
        ann = annotate("s", 900, RSET)
        for mode in ("literal", "weighted"):
            loss, grad = psych_loss(ctc, 0.0, ann, PsychLossConfig(mode=mode))
            assert loss == ctc.loss
            assert grad is ctc.grad

    def test_weighted_scale(self, rng):
        ctc = _ctc_result(rng)
        ann = PsychAnnotation("s", 900, z=1.6, z_hat=0.64)
        loss, grad = psych_loss(ctc, 0.5, ann, PsychLossConfig(mode="weighted", lam=1.0))
        assert loss == 1.32 * ctc.loss
        assert (grad == 1.32 * ctc.grad).all()

    def test_unannotated_sample_is_plain_ctc(self, rng):
        ctc = _ctc_result(rng)
        loss, grad = psych_loss(ctc, 0.7, None, PsychLossConfig())
        assert loss == ctc.loss and grad is ctc.grad

    def test_lambda_zero_is_identity(self, rng):
        ctc = _ctc_result(rng)
        ann = annotate("s", 900, RSET)
        loss, grad = psych_loss(ctc, 0.5, ann, PsychLossConfig(lam=0.0))
        assert loss == ctc.loss and grad is ctc.grad

    def test_negative_epsilon(self, rng):
        with pytest.raises(NegativeEpsilon):
            psych_loss(_ctc_result(rng), -0.1, None, PsychLossConfig())

    def test_quick_reads_lose_more(self, rng):
        # equal error rate and equal CTC loss: the faster-read line gets
        # the larger weighted loss
        ctc = _ctc_result(rng)
        cfg = PsychLossConfig(mode="weighted", lam=1.0)
        fast, _ = psych_loss(ctc, 0.4, annotate("f", 900, RSET), cfg)
        slow, _ = psych_loss(ctc, 0.4, annotate("s", 2400, RSET), cfg)
        assert fast > slow


class TestEpsilonForSample:
    def test_perfect_decode(self):
        lp = np.full((3, 3), -np.inf)
        for t, k in enumerate((1, 0, 2)):
            lp[t, k] = 0.0
        alpha = Alphabet(("a", "b"))
        assert epsilon_for_sample(PosteriorGrid(lp), [1, 2], alpha) == 0.0

    def test_all_blank_decode_counts_deletions(self):
        lp = np.full((4, 3), -np.inf)
        lp[:, 0] = 0.0
        alpha = Alphabet(("a", "b"))
        assert epsilon_for_sample(PosteriorGrid(lp), [1, 2, 1], alpha) == 1.0

    def test_matches_composed_metric(self, rng):
        alpha = Alphabet(("a", "b", "c"))
        for _ in range(20):
            grid = PosteriorGrid(random_grid(rng, 6, 4))
            label = list(rng.integers(1, 4, size=3))
            expected = cer(greedy_decode(grid, alpha), decode_ids(label, alpha))
            assert epsilon_for_sample(grid, label, alpha) == expected

    def test_empty_label(self, rng):
        with pytest.raises(EmptyReference):
            epsilon_for_sample(PosteriorGrid(random_grid(rng, 2, 3)), [], Alphabet(("a", "b")))
