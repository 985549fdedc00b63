"""Pure-numpy CTC forward-backward kernel.

Fallback used when the compiled extension (scriptorium._ctc_fast) is not
available. Both kernels share one contract: `forward_backward` returns the
negative log-likelihood of the label and the per-frame class posteriors.
All recursions run in log space; impossible mass is represented as -inf.
"""

from __future__ import annotations

import numpy as np

NEG_INF = -np.inf


def forward_backward(log_probs: np.ndarray, labels: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact marginalization over all frame paths that collapse to `labels`.

    log_probs: (T, C) float64 log-probabilities, class 0 is the blank.
    labels: (L,) int array of 1-based class ids, no blanks.

    Returns (nll, gamma) where nll = -log p(labels | log_probs) and
    gamma[t, k] is the posterior probability that frame t emits class k
    given the label. Feasibility (T large enough) is the caller's job;
    a zero-probability label yields nll = +inf.
    """
    T, C = log_probs.shape
    L = len(labels)
    S = 2 * L + 1

    ext = np.zeros(S, dtype=np.int64)  # blank at even s, labels at odd s
    if L:
        ext[1::2] = labels
    em = log_probs[:, ext]  # (T, S) emission scores per extended state

    # skip[s]: the s-2 -> s transition is legal (non-blank, distinct labels)
    skip = np.zeros(S, dtype=bool)
    if S > 2:
        skip[2:] = (ext[2:] != 0) & (ext[2:] != ext[:-2])

    alpha = np.full((T, S), NEG_INF)
    alpha[0, 0] = em[0, 0]
    if S > 1:
        alpha[0, 1] = em[0, 1]
    for t in range(1, T):
        prev = alpha[t - 1]
        acc = prev.copy()
        acc[1:] = np.logaddexp(acc[1:], prev[:-1])
        if S > 2:
            acc[2:] = np.logaddexp(acc[2:], np.where(skip[2:], prev[:-2], NEG_INF))
        alpha[t] = acc + em[t]

    log_p = alpha[T - 1, S - 1]
    if S > 1:
        log_p = np.logaddexp(log_p, alpha[T - 1, S - 2])
    if log_p == NEG_INF:
        return np.inf, np.zeros((T, C))

    beta = np.full((T, S), NEG_INF)
    beta[T - 1, S - 1] = em[T - 1, S - 1]
    if S > 1:
        beta[T - 1, S - 2] = em[T - 1, S - 2]
    for t in range(T - 2, -1, -1):
        nxt = beta[t + 1]
        acc = nxt.copy()
        acc[:-1] = np.logaddexp(acc[:-1], nxt[1:])
        if S > 2:
            acc[:-2] = np.logaddexp(acc[:-2], np.where(skip[2:], nxt[2:], NEG_INF))
        beta[t] = acc + em[t]

    # alpha and beta both include the emission at t; divide one copy out
    occupancy = np.exp(alpha + beta - em - log_p)  # (T, S)
    gamma = np.zeros((T, C))
    rows = np.broadcast_to(np.arange(T)[:, None], (T, S))
    cols = np.broadcast_to(ext, (T, S))
    np.add.at(gamma, (rows, cols), occupancy)
    return float(-log_p), gamma
