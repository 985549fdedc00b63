"""Training loop: batching, per-sample loss weighting, LR schedule.

Validation runs a greedy decode after every epoch (no language model).
The learning rate halves after every `patience_lr` consecutive epochs
without a validation-CER improvement and training stops after
`patience_stop`; the returned parameters are the best-validation ones.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..ctc import PosteriorGrid, ctc_loss
from ..decode import greedy_decode
from ..errors import AlphabetMismatch, EmptySplit
from ..psych import PsychAnnotation, PsychLossConfig, epsilon_for_sample, psych_loss
from ..textcore import Alphabet, decode_ids, edit_distance, words
from .model import CrnnConfig, MiniCrnn, frame_count
from .optim import DEFAULT_LR, make_optimizer


@dataclass
class Sample:
    sample_id: str
    image: np.ndarray          # (H, W) grayscale in [0, 1]
    label: list[int]
    annotation: PsychAnnotation | None = None


@dataclass
class TrainData:
    train: list[Sample]
    validation: list[Sample]
    alphabet: Alphabet


@dataclass
class TrainSchedule:
    patience_lr: int = 15
    patience_stop: int = 80
    optimizer: str = "rmsprop"
    base_lr: float | None = None   # per-optimizer default when None
    seed: int = 0
    max_epochs: int = 10_000
    batch_size: int = 8

    def __post_init__(self):
        if not 0 < self.patience_lr <= self.patience_stop:
            raise ValueError("need 0 < patience_lr <= patience_stop")


class SchedulePolicy:
    """Pure improvement tracker: feeds on validation CER, decides LR/stop."""

    def __init__(self, patience_lr: int, patience_stop: int, lr: float):
        self.patience_lr = patience_lr
        self.patience_stop = patience_stop
        self.lr = lr
        self.best = math.inf
        self.epochs_since_improvement = 0

    def update(self, val_cer: float) -> tuple[bool, bool]:
        """Returns (improved, stop). Halves lr on every patience_lr-th
        consecutive non-improving epoch."""
        if val_cer < self.best:
            self.best = val_cer
            self.epochs_since_improvement = 0
            return True, False
        self.epochs_since_improvement += 1
        if self.epochs_since_improvement >= self.patience_stop:
            return False, True
        if self.epochs_since_improvement % self.patience_lr == 0:
            self.lr /= 2.0
        return False, False


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_cer: float
    val_wer: float
    lr: float


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    optimizer_state: dict[str, np.ndarray]
    config: CrnnConfig
    best_epoch: int
    best_val_cer: float
    history: list[EpochStats] = field(default_factory=list)


def _check_data(data: TrainData, num_classes: int) -> None:
    for split_name, split in (("train", data.train), ("validation", data.validation)):
        if not split:
            raise EmptySplit(f"{split_name} split is empty")
        for s in split:
            if any(not 1 <= i < num_classes for i in s.label):
                raise AlphabetMismatch(
                    f"sample {s.sample_id}: label id outside the alphabet")


def _batch_arrays(samples: list[Sample], height: int) -> tuple[np.ndarray, np.ndarray]:
    widths = [s.image.shape[1] for s in samples]
    max_w = max(widths)
    images = np.ones((len(samples), height, max_w, 1))  # white background pad
    for b, s in enumerate(samples):
        images[b, :, : widths[b], 0] = s.image
    lengths = np.array([frame_count(w) for w in widths])
    return images, lengths


def train(
    data: TrainData,
    schedule: TrainSchedule,
    loss_cfg: PsychLossConfig | None = None,
    config: CrnnConfig | None = None,
    epoch_callback: Callable[[EpochStats], bool] | None = None,
) -> TrainResult:
    """Train a recognizer; `loss_cfg=None` is the plain CTC baseline.

    Deterministic given (seed, data, configs): the RNG drives only the
    weight init and the per-epoch shuffle, identically in every mode.
    """
    alphabet = data.alphabet
    config = config or CrnnConfig(num_classes=alphabet.num_classes)
    if config.num_classes != alphabet.num_classes:
        raise AlphabetMismatch(
            f"model has {config.num_classes} classes, alphabet wants {alphabet.num_classes}")
    _check_data(data, config.num_classes)

    model = MiniCrnn(config, seed=schedule.seed)
    lr0 = DEFAULT_LR[schedule.optimizer] if schedule.base_lr is None else schedule.base_lr
    optimizer = make_optimizer(schedule.optimizer, lr0)
    policy = SchedulePolicy(schedule.patience_lr, schedule.patience_stop, lr0)
    rng = np.random.default_rng(schedule.seed)

    best_params = model.export_arrays()
    best_state: dict[str, np.ndarray] = {}
    best_epoch = 0
    history: list[EpochStats] = []

    for epoch in range(1, schedule.max_epochs + 1):
        order = rng.permutation(len(data.train))
        epoch_loss = 0.0
        for start in range(0, len(order), schedule.batch_size):
            batch = [data.train[i] for i in order[start:start + schedule.batch_size]]
            epoch_loss += _train_batch(model, optimizer, batch, alphabet, loss_cfg)
        mean_loss = epoch_loss / len(data.train)

        val_cer, val_wer, _ = evaluate_greedy(model, data.validation, alphabet)
        stats = EpochStats(epoch, mean_loss, val_cer, val_wer, optimizer.lr)
        history.append(stats)

        improved, stop = policy.update(val_cer)
        optimizer.lr = policy.lr
        if improved:
            best_params = model.export_arrays()
            best_state = {k: v.copy() for k, v in optimizer.state.items()}
            best_epoch = epoch
        if stop or (epoch_callback is not None and epoch_callback(stats)):
            break

    return TrainResult(
        params=best_params,
        optimizer_state=best_state,
        config=config,
        best_epoch=best_epoch,
        best_val_cer=policy.best,
        history=history,
    )


def _train_batch(
    model: MiniCrnn,
    optimizer: make_optimizer,
    batch: list[Sample],
    alphabet: Alphabet,
    loss_cfg: PsychLossConfig | None,
) -> float:
    images, lengths = _batch_arrays(batch, model.config.height)
    log_probs = model.forward_batch(images, lengths)
    upstream = np.zeros_like(log_probs.data)
    total = 0.0
    for b, sample in enumerate(batch):
        grid = PosteriorGrid(log_probs.data[b, : lengths[b]])
        result = ctc_loss(grid, sample.label)
        if loss_cfg is None or sample.annotation is None:
            loss_value, grad = result.loss, result.grad
        else:
            if loss_cfg.epsilon_source == "fixed":
                epsilon = 1.0
            elif sample.label:
                epsilon = epsilon_for_sample(grid, sample.label, alphabet)
            else:
                epsilon = 0.0
            loss_value, grad = psych_loss(result, epsilon, sample.annotation, loss_cfg)
        upstream[b, : lengths[b]] = grad
        total += loss_value
    model.zero_grad()
    log_probs.backward(upstream)
    grads = {name: p.grad if p.grad is not None else np.zeros_like(p.data)
             for name, p in model.params.items()}
    optimizer.step({name: p.data for name, p in model.params.items()}, grads)
    return total


def evaluate_greedy(
    model: MiniCrnn,
    samples: list[Sample],
    alphabet: Alphabet,
    batch_size: int = 32,
) -> tuple[float, float, list[dict]]:
    """Corpus-level CER/WER of the greedy decode plus per-line detail.

    Samples are grouped by width so batching never pads (padding would
    perturb the recurrent pass for shorter lines in the batch).
    """
    if not samples:
        raise EmptySplit("nothing to evaluate")
    by_width: dict[int, list[int]] = {}
    for i, s in enumerate(samples):
        by_width.setdefault(s.image.shape[1], []).append(i)

    predictions: dict[int, str] = {}
    for width in sorted(by_width):
        idxs = by_width[width]
        for start in range(0, len(idxs), batch_size):
            chunk = idxs[start:start + batch_size]
            images, lengths = _batch_arrays([samples[i] for i in chunk], model.config.height)
            out = model.forward_batch(images, lengths).data
            for j, i in enumerate(chunk):
                grid = PosteriorGrid(out[j, : lengths[j]])
                predictions[i] = greedy_decode(grid, alphabet)

    char_errors = char_total = word_errors = word_total = 0
    lines = []
    for i, s in enumerate(samples):
        ref = decode_ids(s.label, alphabet)
        pred = predictions[i]
        distance = edit_distance(pred, ref)
        char_errors += distance
        char_total += len(ref)
        w_dist = edit_distance(words(pred), words(ref))
        word_errors += w_dist
        word_total += len(words(ref))
        lines.append({
            "id": s.sample_id, "reference": ref, "prediction": pred,
            "char_errors": distance, "char_total": len(ref),
            "word_errors": w_dist, "word_total": len(words(ref)),
        })
    if char_total == 0 or word_total == 0:
        raise EmptySplit("evaluation references are empty")
    return char_errors / char_total, word_errors / word_total, lines
