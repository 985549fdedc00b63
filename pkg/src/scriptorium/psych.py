"""Reaction-time penalties and the reaction-weighted CTC loss.

The penalty of a sample is how far its measured reaction time falls below
the slowest measurement in the set: quick reads mean legible lines, and
legible lines get the larger penalty. Two combination modes exist:

* literal: the penalty term -lambda*epsilon*z is added to the loss value;
  it is constant with respect to the network, so the gradient is the CTC
  gradient unchanged.
* weighted (default): the sample's CTC loss and gradient are scaled by
  w = 1 + lambda*epsilon*z_hat, so legible-but-wrong samples actually
  push training harder.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ctc import CtcResult, PosteriorGrid
from .decode import greedy_decode
from .errors import EmptyMeasurements, EmptyReference, NegativeEpsilon
from .textcore import Alphabet, cer, decode_ids


@dataclass(frozen=True)
class ReactionSet:
    """Fixed set of per-line reaction times; m_ms is its maximum."""

    times_ms: tuple[float, ...]
    m_ms: float

    @classmethod
    def from_times(cls, times_ms: Sequence[float]) -> "ReactionSet":
        times = tuple(float(t) for t in times_ms)
        if not times:
            raise EmptyMeasurements("reaction set is empty")
        if any(t <= 0 for t in times):
            raise ValueError("reaction times must be positive")
        return cls(times_ms=times, m_ms=max(times))


@dataclass(frozen=True)
class PsychAnnotation:
    """Penalty attached to one training sample."""

    sample_id: str
    r_ms: float
    z: float      # seconds
    z_hat: float  # z normalized by the set maximum, in [0, 1]


@dataclass(frozen=True)
class PsychLossConfig:
    mode: str = "weighted"                 # "literal" | "weighted"
    lam: float = 1.0                       # penalty scale, >= 0
    epsilon_source: str = "greedy_decode"  # "greedy_decode" | "fixed"

    def __post_init__(self):
        if self.mode not in ("literal", "weighted"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if self.epsilon_source not in ("greedy_decode", "fixed"):
            raise ValueError(f"unknown epsilon source {self.epsilon_source!r}")


def line_reaction_time(char_times_ms: Sequence[float]) -> float:
    """Per-line reaction time: mean of the per-character times."""
    if len(char_times_ms) == 0:
        raise EmptyMeasurements("no per-character times")
    if any(t <= 0 for t in char_times_ms):
        raise ValueError("per-character times must be positive")
    return float(sum(char_times_ms)) / len(char_times_ms)


def penalty(r_ms: float, reaction_set: ReactionSet) -> tuple[float, float]:
    """Penalty for one reaction time: (z in seconds, z_hat in [0, 1])."""
    if r_ms > reaction_set.m_ms:
        warnings.warn(
            f"reaction time {r_ms} ms exceeds the set maximum "
            f"{reaction_set.m_ms} ms; clamping", stacklevel=2)
        r_ms = reaction_set.m_ms
    z = (reaction_set.m_ms - r_ms) / 1000.0
    z_hat = (reaction_set.m_ms - r_ms) / reaction_set.m_ms
    return z, z_hat


def annotate(sample_id: str, r_ms: float, reaction_set: ReactionSet) -> PsychAnnotation:
    z, z_hat = penalty(r_ms, reaction_set)
    return PsychAnnotation(sample_id=sample_id, r_ms=r_ms, z=z, z_hat=z_hat)


def psych_loss(
    ctc: CtcResult,
    epsilon: float,
    ann: PsychAnnotation | None,
    cfg: PsychLossConfig,
) -> tuple[float, np.ndarray]:
    """Combine a sample's CTC result with its reaction penalty.

    Samples without an annotation pass through untouched, as does any
    sample whose penalty term is zero: those cases return the CTC loss
    and the very same gradient array, bit for bit.
    """
    if epsilon < 0:
        raise NegativeEpsilon(f"character error rate {epsilon} < 0")
    if ann is None:
        return ctc.loss, ctc.grad
    if cfg.mode == "literal":
        term = cfg.lam * epsilon * ann.z
        if term == 0.0:
            return ctc.loss, ctc.grad
        return ctc.loss - term, ctc.grad
    weight = 1.0 + cfg.lam * epsilon * ann.z_hat
    if weight == 1.0:
        return ctc.loss, ctc.grad
    return weight * ctc.loss, weight * ctc.grad


def epsilon_for_sample(grid: PosteriorGrid, label: Sequence[int], alphabet: Alphabet) -> float:
    """Character error rate of the current greedy decode against the label.

    Treated as a constant in the loss: the decode is an argmax, so this
    value carries no gradient.
    """
    if len(label) == 0:
        raise EmptyReference("label is empty")
    reference = decode_ids(label, alphabet)
    return cer(greedy_decode(grid, alphabet), reference)
