"""CTC loss, analytic gradient, and a path-enumeration verification oracle.

The forward-backward recursion is the hot kernel: a compiled version is
used when available, with a pure-numpy fallback selected at import time.
Set SCRIPTORIUM_PURE_PY=1 to force the fallback.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _ctc_py
from .errors import ImpossibleLabel, TooLarge
from .textcore import collapse

if os.environ.get("SCRIPTORIUM_PURE_PY") == "1":
    _kernel = _ctc_py
    BACKEND = "python"
else:
    try:
        from . import _ctc_fast as _kernel
        BACKEND = "compiled"
    except ImportError:
        _kernel = _ctc_py
        BACKEND = "python"

ENUMERATION_BOUND = 10_000_000


def backend_name() -> str:
    """Which forward-backward kernel this process is running."""
    return BACKEND


@dataclass(frozen=True)
class PosteriorGrid:
    """Per-frame class log-probabilities produced by a recognizer.

    Shape (T, C): T frames, C classes with class 0 the blank. Every row
    must exponentiate and sum to 1.
    """

    log_probs: np.ndarray

    def __post_init__(self):
        lp = np.asarray(self.log_probs, dtype=np.float64)
        if lp.ndim != 2 or lp.shape[0] < 1 or lp.shape[1] < 2:
            raise ValueError(f"grid must be (T>=1, C>=2), got {lp.shape}")
        object.__setattr__(self, "log_probs", lp)

    @property
    def num_frames(self) -> int:
        return self.log_probs.shape[0]

    @property
    def num_classes(self) -> int:
        return self.log_probs.shape[1]

    def validate(self, tol: float = 1e-9) -> None:
        row_sums = np.exp(self.log_probs).sum(axis=1)
        bad = np.abs(row_sums - 1.0) > tol
        if bad.any():
            t = int(np.argmax(bad))
            raise ValueError(f"grid row {t} sums to {row_sums[t]!r}, not 1")


@dataclass(frozen=True)
class CtcResult:
    """Loss in nats plus gradient with respect to the pre-softmax logits."""

    loss: float
    grad: np.ndarray  # (T, C), rows sum to 0


def required_frames(label: Sequence[int]) -> int:
    """Minimum frame count able to emit the label (repeats need a blank)."""
    label = list(label)
    repeats = sum(1 for i in range(1, len(label)) if label[i] == label[i - 1])
    return len(label) + repeats


def _check_instance(grid: PosteriorGrid, label: Sequence[int]) -> np.ndarray:
    label_arr = np.asarray(label, dtype=np.int64)
    if label_arr.size and (label_arr.min() < 1 or label_arr.max() >= grid.num_classes):
        raise ValueError("label ids must lie in [1, C-1]")
    need = required_frames(label)
    if grid.num_frames < need:
        raise ImpossibleLabel(
            f"label needs at least {need} frames, grid has {grid.num_frames}"
        )
    return label_arr


def ctc_loss(grid: PosteriorGrid, label: Sequence[int]) -> CtcResult:
    """Negative log-likelihood of the label and its analytic gradient.

    The gradient is softmax(logits) - gamma, i.e. with respect to the
    logits feeding the recognizer's final log-softmax, so it composes
    directly with the last linear layer.
    """
    label_arr = _check_instance(grid, label)
    grid.validate()
    nll, gamma = _kernel.forward_backward(grid.log_probs, label_arr)
    if not math.isfinite(nll):
        raise ImpossibleLabel("label has probability exactly 0 under this grid")
    grad = np.exp(grid.log_probs) - gamma
    return CtcResult(loss=nll, grad=grad)


def alignment_posteriors(grid: PosteriorGrid, label: Sequence[int]) -> np.ndarray:
    """(T, C) matrix: posterior that frame t emits class k given the label."""
    label_arr = _check_instance(grid, label)
    grid.validate()
    nll, gamma = _kernel.forward_backward(grid.log_probs, label_arr)
    if not math.isfinite(nll):
        raise ImpossibleLabel("label has probability exactly 0 under this grid")
    return gamma


def ctc_loss_bruteforce(grid: PosteriorGrid, label: Sequence[int]) -> float:
    """Reference loss by explicit enumeration of all C**T frame paths.

    Deliberately independent of the forward-backward recursion; used to
    verify it. Only viable on tiny instances.
    """
    T, C = grid.num_frames, grid.num_classes
    if C ** T > ENUMERATION_BOUND:
        raise TooLarge(f"{C}**{T} paths exceed the enumeration bound")
    target = list(label)
    lp = grid.log_probs
    total = -np.inf
    for path in itertools.product(range(C), repeat=T):
        if collapse(path) == target:
            score = sum(lp[t, k] for t, k in enumerate(path))
            total = np.logaddexp(total, score)
    return float(-total)
