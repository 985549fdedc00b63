"""First-order optimizers: RMSProp (recognizer default), Adam, Adadelta.

State lives in a flat dict of float64 arrays so it serializes through the
checkpoint container unchanged. Updates are in-place and deterministic:
parameters are visited in their (fixed) dict order.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch

KINDS = ("rmsprop", "adam", "adadelta")

RMSPROP_DECAY = 0.9
RMSPROP_EPS = 1e-8
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
ADADELTA_RHO = 0.95
ADADELTA_EPS = 1e-6

DEFAULT_LR = {"rmsprop": 5e-4, "adam": 1e-3, "adadelta": 1.0}


def optimizer_step(
    kind: str,
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    state: dict[str, np.ndarray],
    lr: float,
) -> None:
    """Apply one update in place; lazily initializes missing state slots."""
    if kind not in KINDS:
        raise ValueError(f"unknown optimizer {kind!r}")
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {p.shape}")

    if kind == "adam":
        t = int(state.get("t", np.zeros(()))) + 1
        state["t"] = np.array(float(t))

    for name, p in params.items():
        g = grads[name]
        if kind == "rmsprop":
            sq = state.setdefault(f"sq.{name}", np.zeros_like(p))
            sq *= RMSPROP_DECAY
            sq += (1.0 - RMSPROP_DECAY) * g * g
            p -= lr * g / np.sqrt(sq + RMSPROP_EPS)
        elif kind == "adam":
            m = state.setdefault(f"m.{name}", np.zeros_like(p))
            v = state.setdefault(f"v.{name}", np.zeros_like(p))
            m *= ADAM_BETA1
            m += (1.0 - ADAM_BETA1) * g
            v *= ADAM_BETA2
            v += (1.0 - ADAM_BETA2) * g * g
            m_hat = m / (1.0 - ADAM_BETA1 ** t)
            v_hat = v / (1.0 - ADAM_BETA2 ** t)
            p -= lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        else:  # adadelta
            acc_g = state.setdefault(f"accg.{name}", np.zeros_like(p))
            acc_d = state.setdefault(f"accd.{name}", np.zeros_like(p))
            acc_g *= ADADELTA_RHO
            acc_g += (1.0 - ADADELTA_RHO) * g * g
            delta = -np.sqrt(acc_d + ADADELTA_EPS) / np.sqrt(acc_g + ADADELTA_EPS) * g
            acc_d *= ADADELTA_RHO
            acc_d += (1.0 - ADADELTA_RHO) * delta * delta
            p += lr * delta


class make_optimizer:
    """Stateful wrapper binding a kind and its running state."""

    def __init__(self, kind: str, lr: float | None = None):
        if kind not in KINDS:
            raise ValueError(f"unknown optimizer {kind!r}")
        self.kind = kind
        self.lr = DEFAULT_LR[kind] if lr is None else lr
        self.state: dict[str, np.ndarray] = {}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        optimizer_step(self.kind, params, grads, self.state, self.lr)
