"""Small convolutional-recurrent line recognizer.

Two same-padded 3x3 conv layers (tanh, 2x2 ceil-mode max-pool after each)
reduce a height-64 grayscale line to quarter-width frames; a bidirectional
gated recurrent layer reads the frames; a linear head emits per-frame
class log-probabilities. Width W yields ceil(W/4) output frames.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..ctc import PosteriorGrid
from ..errors import BadShape
from . import autodiff as ad
from .autodiff import Tensor


def frame_count(width: int) -> int:
    """Output frames for an input width: two ceil-halvings."""
    return -(-width // 4)


@dataclass(frozen=True)
class CrnnConfig:
    num_classes: int
    height: int = 64
    conv1: int = 8
    conv2: int = 16
    kernel: int = 3
    hidden: int = 64

    @property
    def frame_features(self) -> int:
        return self.conv2 * (self.height // 4)


class MiniCrnn:
    def __init__(self, config: CrnnConfig, seed: int = 0):
        if config.height % 4 != 0:
            raise BadShape("input height must be divisible by 4")
        self.config = config
        self.params: dict[str, Tensor] = {}
        rng = np.random.default_rng(seed)
        c = config
        self._add_param(rng, "conv1.w", (c.conv1, 1, c.kernel, c.kernel),
                        fan_in=c.kernel ** 2, fan_out=c.conv1 * c.kernel ** 2)
        self._add_zero("conv1.b", (c.conv1,))
        self._add_param(rng, "conv2.w", (c.conv2, c.conv1, c.kernel, c.kernel),
                        fan_in=c.conv1 * c.kernel ** 2, fan_out=c.conv2 * c.kernel ** 2)
        self._add_zero("conv2.b", (c.conv2,))
        feat = c.frame_features
        for direction in ("fw", "bw"):
            self._add_param(rng, f"gru_{direction}.wx", (feat, 3 * c.hidden),
                            fan_in=feat, fan_out=3 * c.hidden)
            self._add_param(rng, f"gru_{direction}.wh", (c.hidden, 3 * c.hidden),
                            fan_in=c.hidden, fan_out=3 * c.hidden)
            self._add_zero(f"gru_{direction}.b", (3 * c.hidden,))
        self._add_param(rng, "out.w", (2 * c.hidden, c.num_classes),
                        fan_in=2 * c.hidden, fan_out=c.num_classes)
        self._add_zero("out.b", (c.num_classes,))

    def _add_param(self, rng, name, shape, fan_in, fan_out):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        self.params[name] = Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)

    def _add_zero(self, name, shape):
        self.params[name] = Tensor(np.zeros(shape), requires_grad=True)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, tensor in self.params.items():
            value = arrays[name]
            if value.shape != tensor.data.shape:
                raise BadShape(f"{name}: stored {value.shape} != model {tensor.data.shape}")
            tensor.data = value.astype(np.float64).copy()

    def export_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def _gru_direction(self, frames: Tensor, prefix: str) -> Tensor:
        p = self.params
        gates_x = ad.add(ad.matmul(frames, p[f"{prefix}.wx"]), p[f"{prefix}.b"])
        return ad.gru_sequence(gates_x, p[f"{prefix}.wh"])

    def forward_batch(self, images: np.ndarray, frame_lengths: np.ndarray) -> Tensor:
        """Batched forward pass.

        images: (B, H, Wmax, 1) in [0, 1], right-padded with background.
        frame_lengths: per-sample true frame counts; rows past a sample's
        length are runoff and must be masked out by the caller.
        Returns per-frame log-probabilities, shape (B, T, C).
        """
        if images.ndim != 4 or images.shape[1] != self.config.height:
            raise BadShape(f"expected (B, {self.config.height}, W, 1), got {images.shape}")
        p = self.params
        x = Tensor(images)
        x = ad.maxpool2(ad.tanh(ad.conv2d(x, p["conv1.w"], p["conv1.b"])))
        x = ad.maxpool2(ad.tanh(ad.conv2d(x, p["conv2.w"], p["conv2.b"])))
        frames = ad.frames_from_maps(x)  # (B, T, H/4 * C2)
        batch, steps = frames.shape[0], frames.shape[1]

        forward = self._gru_direction(frames, "gru_fw")
        reverse_index = _reverse_index(frame_lengths, steps)
        backward = ad.gather_time(
            self._gru_direction(ad.gather_time(frames, reverse_index), "gru_bw"),
            reverse_index)
        merged = ad.concat_last(forward, backward)

        flat = ad.reshape(merged, (batch * steps, 2 * self.config.hidden))
        logits = ad.add(ad.matmul(flat, p["out.w"]), p["out.b"])
        logits = ad.reshape(logits, (batch, steps, self.config.num_classes))
        return ad.log_softmax(logits)

    def forward(self, image: np.ndarray) -> PosteriorGrid:
        """Single-line forward: (H, W) grayscale in [0, 1] -> PosteriorGrid."""
        image = np.asarray(image, dtype=np.float64)
        if image.ndim != 2 or image.shape[0] != self.config.height:
            raise BadShape(f"expected ({self.config.height}, W), got {image.shape}")
        if image.shape[1] < 8:
            raise BadShape("line images must be at least 8 px wide")
        if image.min() < 0.0 or image.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")
        steps = frame_count(image.shape[1])
        out = self.forward_batch(image[None, :, :, None], np.array([steps]))
        return PosteriorGrid(out.data[0])

    def backward(self, image: np.ndarray, upstream: np.ndarray) -> dict[str, np.ndarray]:
        """Parameter gradients of (upstream . forward(image)).

        upstream must match the forward output grid (T, C); it is the
        gradient with respect to the per-frame log-probabilities.
        """
        image = np.asarray(image, dtype=np.float64)
        steps = frame_count(image.shape[1])
        upstream = np.asarray(upstream, dtype=np.float64)
        if upstream.shape != (steps, self.config.num_classes):
            raise BadShape(
                f"upstream shape {upstream.shape} != ({steps}, {self.config.num_classes})")
        self.zero_grad()
        out = self.forward_batch(image[None, :, :, None], np.array([steps]))
        out.backward(upstream[None])
        return {name: p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for name, p in self.params.items()}


def _reverse_index(frame_lengths: np.ndarray, steps: int) -> np.ndarray:
    """Row b: reversed(range(L_b)) then range(L_b, T).

    Feeding this to gather_time puts each sample's valid frames first in
    reverse order, so the reverse-direction recurrence never reads padding
    before real frames. Applying the same index again restores frame order.
    """
    index = np.empty((len(frame_lengths), steps), dtype=np.intp)
    for b, length in enumerate(frame_lengths):
        index[b, :length] = np.arange(length - 1, -1, -1)
        index[b, length:] = np.arange(length, steps)
    return index
