"""Reverse-mode automatic differentiation over dense float64 arrays.

A Tensor wraps a numpy array and remembers how it was made; calling
`backward` on a scalar-seeded output walks the graph in reverse
topological order and accumulates gradients into every reachable leaf.
Only the operations the line recognizer needs are provided.
"""

from __future__ import annotations

import numpy as np

from ..errors import BadShape


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backprop", "requires_grad")

    def __init__(self, data, parents=(), backprop=None, requires_grad=False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._parents: tuple[Tensor, ...] = parents
        self._backprop = backprop
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)

    @property
    def shape(self):
        return self.data.shape

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)

    def backward(self, seed: np.ndarray) -> None:
        """Accumulate gradients of (seed . self) into the graph's leaves."""
        seed = np.asarray(seed, dtype=np.float64)
        if seed.shape != self.data.shape:
            raise BadShape(f"seed shape {seed.shape} != tensor shape {self.data.shape}")
        order: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:  # iterative DFS; graphs can exceed the recursion limit
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = seed.copy()
        for node in reversed(order):
            if node._backprop is not None and node.grad is not None:
                node._backprop(node.grad)

    def zero_grad(self):
        self.grad = None


def _accumulate(tensor: Tensor, grad: np.ndarray, owned: bool = False) -> None:
    """Add `grad` into tensor.grad; `owned` marks a fresh array safe to keep."""
    if tensor.grad is None:
        tensor.grad = grad if owned else grad.copy()
    else:
        tensor.grad += grad


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a broadcast gradient back down to the original shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data, (a, b))

    def backprop(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(g, b.data.shape))
    out._backprop = backprop
    return out


def sub(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data, (a, b))

    def backprop(g):
        _accumulate(a, _unbroadcast(g, a.data.shape))
        _accumulate(b, _unbroadcast(-g, b.data.shape))
    out._backprop = backprop
    return out


def mul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data, (a, b))

    def backprop(g):
        _accumulate(a, _unbroadcast(g * b.data, a.data.shape), owned=True)
        _accumulate(b, _unbroadcast(g * a.data, b.data.shape), owned=True)
    out._backprop = backprop
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, (a, b))

    def backprop(g):
        _accumulate(a, g @ b.data.swapaxes(-1, -2), owned=True)
        _accumulate(b, _unbroadcast(a.data.swapaxes(-1, -2) @ g, b.data.shape), owned=True)
    out._backprop = backprop
    return out


def tanh(x: Tensor) -> Tensor:
    value = np.tanh(x.data)
    out = Tensor(value, (x,))

    def backprop(g):
        _accumulate(x, g * (1.0 - value * value), owned=True)
    out._backprop = backprop
    return out


def sigmoid(x: Tensor) -> Tensor:
    value = np.empty_like(x.data)
    pos = x.data >= 0
    value[pos] = 1.0 / (1.0 + np.exp(-x.data[pos]))
    ex = np.exp(x.data[~pos])
    value[~pos] = ex / (1.0 + ex)
    out = Tensor(value, (x,))

    def backprop(g):
        _accumulate(x, g * value * (1.0 - value), owned=True)
    out._backprop = backprop
    return out


def log_softmax(x: Tensor) -> Tensor:
    """Log-softmax along the last axis."""
    shifted = x.data - x.data.max(axis=-1, keepdims=True)
    value = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
    out = Tensor(value, (x,))

    def backprop(g):
        _accumulate(x, g - np.exp(value) * g.sum(axis=-1, keepdims=True), owned=True)
    out._backprop = backprop
    return out


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape), (x,))

    def backprop(g):
        _accumulate(x, g.reshape(x.data.shape))
    out._backprop = backprop
    return out


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    """Slice [start:stop] along the last axis."""
    out = Tensor(x.data[..., start:stop], (x,))

    def backprop(g):
        full = np.zeros_like(x.data)
        full[..., start:stop] = g
        _accumulate(x, full, owned=True)
    out._backprop = backprop
    return out


def select_time(x: Tensor, t: int) -> Tensor:
    """Pick frame t from a (B, T, F) sequence -> (B, F)."""
    out = Tensor(x.data[:, t], (x,))

    def backprop(g):
        full = np.zeros_like(x.data)
        full[:, t] = g
        _accumulate(x, full, owned=True)
    out._backprop = backprop
    return out


def stack_time(frames: list[Tensor]) -> Tensor:
    """Stack T (B, F) frames into (B, T, F)."""
    out = Tensor(np.stack([f.data for f in frames], axis=1), tuple(frames))

    def backprop(g):
        for t, frame in enumerate(frames):
            _accumulate(frame, g[:, t])
    out._backprop = backprop
    return out


def gather_time(x: Tensor, index: np.ndarray) -> Tensor:
    """Per-sample frame permutation: out[b, t] = x[b, index[b, t]].

    index must hold a permutation of range(T) in every row.
    """
    batch = np.arange(x.data.shape[0])[:, None]
    out = Tensor(x.data[batch, index], (x,))

    def backprop(g):
        full = np.zeros_like(x.data)
        np.add.at(full, (batch, index), g)
        _accumulate(x, full, owned=True)
    out._backprop = backprop
    return out


def concat_last(a: Tensor, b: Tensor) -> Tensor:
    split = a.data.shape[-1]
    out = Tensor(np.concatenate([a.data, b.data], axis=-1), (a, b))

    def backprop(g):
        _accumulate(a, g[..., :split])
        _accumulate(b, g[..., split:])
    out._backprop = backprop
    return out


def gru_sequence(gates_x: Tensor, wh: Tensor) -> Tensor:
    """Fused gated recurrent pass over a sequence, zero initial state.

    gates_x: (B, T, 3H) input-side gate pre-activations (x @ Wx + b),
    laid out [reset | update | candidate]. wh: (H, 3H) recurrent weights.
    Returns hidden states (B, T, H). One graph node for the whole loop;
    the step recurrence is h = (1 - z) * n + z * h_prev.
    """
    gx = gates_x.data
    batch, steps, triple = gx.shape
    hidden = triple // 3
    w = wh.data

    hs = np.empty((batch, steps, hidden))
    resets = np.empty_like(hs)
    updates = np.empty_like(hs)
    cands = np.empty_like(hs)
    rec_cands = np.empty_like(hs)  # recurrent half of the candidate gate

    h = np.zeros((batch, hidden))
    for t in range(steps):
        gh = h @ w
        r = _sigmoid_inplace(gx[:, t, :hidden] + gh[:, :hidden])
        z = _sigmoid_inplace(gx[:, t, hidden:2 * hidden] + gh[:, hidden:2 * hidden])
        gh_n = gh[:, 2 * hidden:]
        n = np.tanh(gx[:, t, 2 * hidden:] + r * gh_n)
        resets[:, t], updates[:, t], cands[:, t], rec_cands[:, t] = r, z, n, gh_n
        h = n + z * (h - n)
        hs[:, t] = h

    out = Tensor(hs, (gates_x, wh))

    def backprop(g):
        dgx = np.empty_like(gx)
        dw = np.zeros_like(w)
        dh = np.zeros((batch, hidden))
        dgh = np.empty((batch, 3 * hidden))
        for t in range(steps - 1, -1, -1):
            dh = dh + g[:, t]
            r, z, n, gh_n = resets[:, t], updates[:, t], cands[:, t], rec_cands[:, t]
            h_prev = hs[:, t - 1] if t > 0 else np.zeros((batch, hidden))
            dn = dh * (1.0 - z)
            dz = dh * (h_prev - n)
            dh_next = dh * z
            da_n = dn * (1.0 - n * n)
            da_z = dz * z * (1.0 - z)
            da_r = (da_n * gh_n) * r * (1.0 - r)
            dgx[:, t, :hidden] = da_r
            dgx[:, t, hidden:2 * hidden] = da_z
            dgx[:, t, 2 * hidden:] = da_n
            dgh[:, :hidden] = da_r
            dgh[:, hidden:2 * hidden] = da_z
            dgh[:, 2 * hidden:] = da_n * r
            dw += h_prev.T @ dgh
            dh = dh_next + dgh @ w.T
        _accumulate(gates_x, dgx, owned=True)
        _accumulate(wh, dw, owned=True)
    out._backprop = backprop
    return out


def _sigmoid_inplace(x: np.ndarray) -> np.ndarray:
    pos = x >= 0
    np.negative(x, where=pos, out=x)
    np.exp(x, out=x)
    x += 1.0
    np.reciprocal(x, out=x)
    np.subtract(1.0, x, where=~pos, out=x)
    return x


def frames_from_maps(x: Tensor) -> Tensor:
    """Feature maps (B, H, W, C) to width-major frames (B, W, H*C)."""
    batch, height, width, chan = x.data.shape
    value = np.ascontiguousarray(x.data.transpose(0, 2, 1, 3)).reshape(
        batch, width, height * chan)
    out = Tensor(value, (x,))

    def backprop(g):
        _accumulate(x, np.ascontiguousarray(
            g.reshape(batch, width, height, chan).transpose(0, 2, 1, 3)), owned=True)
    out._backprop = backprop
    return out


def _im2col(x: np.ndarray, kernel: int, pad: int) -> np.ndarray:
    """Channels-last im2col: (B, H, W, C) -> (B*H*W, C*k*k)."""
    batch, height, width, chan = x.shape
    padded = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kernel, kernel), axis=(1, 2))
    # (B, H, W, C, k, k) -> rows ordered to match weight.reshape(Co, Ci*k*k)
    return windows.reshape(batch * height * width, chan * kernel * kernel)


def _col2im(gcols: np.ndarray, xshape, kernel: int, pad: int) -> np.ndarray:
    batch, height, width, chan = xshape
    gx = np.zeros((batch, height + 2 * pad, width + 2 * pad, chan))
    g6 = gcols.reshape(batch, height, width, chan, kernel, kernel)
    for i in range(kernel):
        for j in range(kernel):
            gx[:, i:i + height, j:j + width, :] += g6[:, :, :, :, i, j]
    return np.ascontiguousarray(gx[:, pad:pad + height, pad:pad + width, :])


def conv2d(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """Same-padded stride-1 convolution, channels last.

    x: (B, H, W, Ci); weight: (Co, Ci, k, k); bias: (Co,). Output
    (B, H, W, Co). The input gradient is only formed when x needs it,
    which spares the big scatter-add on the raw image layer.
    """
    batch, height, width, _ = x.data.shape
    out_chan, _, kernel, _ = weight.data.shape
    pad = kernel // 2
    cols = _im2col(x.data, kernel, pad)
    flat_w = weight.data.reshape(out_chan, -1).T  # (Ci*k*k, Co)
    value = (cols @ flat_w + bias.data).reshape(batch, height, width, out_chan)
    out = Tensor(value, (x, weight, bias))

    def backprop(g):
        gflat = g.reshape(-1, out_chan)
        _accumulate(weight, (cols.T @ gflat).T.reshape(weight.data.shape), owned=True)
        _accumulate(bias, gflat.sum(axis=0), owned=True)
        if x.requires_grad:
            _accumulate(x, _col2im(gflat @ flat_w.T, x.data.shape, kernel, pad), owned=True)
    out._backprop = backprop
    return out


def maxpool2(x: Tensor) -> Tensor:
    """2x2 stride-2 max pooling (channels last) with ceil-mode padding."""
    batch, height, width, chan = x.data.shape
    out_h, out_w = -(-height // 2), -(-width // 2)
    padded = np.full((batch, out_h * 2, out_w * 2, chan), -np.inf)
    padded[:, :height, :width, :] = x.data
    windows = padded.reshape(batch, out_h, 2, out_w, 2, chan)
    flat = np.ascontiguousarray(windows.transpose(0, 1, 3, 5, 2, 4)).reshape(
        batch, out_h, out_w, chan, 4)
    winner = flat.argmax(axis=-1)
    out = Tensor(np.take_along_axis(flat, winner[..., None], axis=-1)[..., 0], (x,))

    def backprop(g):
        gflat = np.zeros_like(flat)
        np.put_along_axis(gflat, winner[..., None], g[..., None], axis=-1)
        gpad = np.ascontiguousarray(
            gflat.reshape(batch, out_h, out_w, chan, 2, 2).transpose(0, 1, 4, 2, 5, 3)
        ).reshape(batch, out_h * 2, out_w * 2, chan)
        _accumulate(x, np.ascontiguousarray(gpad[:, :height, :width, :]), owned=True)
    out._backprop = backprop
    return out
