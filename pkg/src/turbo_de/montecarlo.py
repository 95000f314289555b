"""Monte-Carlo estimate of BCJR extrinsic erasure rates on the BEC.

Decoding is done by explicit state-set propagation over all 2^m trellis
states of a terminated trellis; no subspace algebra is involved, so the
estimate is an independent check of :mod:`turbo_de.transfer`. The all-zero
codeword is transmitted, which loses no generality for linear codes on
the erasure channel.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .trellis import Trellis


@dataclass(frozen=True)
class McConfig:
    sections: int = 2000
    trials: int = 200
    seed: int = 0
    window: float = 0.5  # central fraction of sections that is measured

    def window_range(self, memory: int) -> range:
        if self.sections < 4 * memory:
            raise ValueError("sections must be at least 4 * memory")
        if self.trials < 10:
            raise ValueError("trials must be at least 10")
        width = int(round(self.sections * self.window))
        start = (self.sections - width) // 2
        stop = start + width
        if start < memory or self.sections - stop < memory or width < 1:
            raise ValueError("measurement window must leave memory sections at each end")
        return range(start, stop)


@dataclass(frozen=True)
class McEstimate:
    """Per-stream extrinsic erasure rate.

    ``stderr`` is the standard error of the mean over independent trials
    (batch means); positions inside one trial are strongly correlated, so the
    binomial figure ``binomial_stderr`` understates the spread.
    """

    mean: np.ndarray
    stderr: np.ndarray
    binomial_stderr: np.ndarray
    samples: int


class _Branches:
    """Flat branch tables of a trellis: branch b = state * 2^k + input."""

    def __init__(self, trellis: Trellis):
        ns, sym = trellis.tables()
        n_states, n_inputs = ns.shape
        self.n_states = n_states
        self.state = np.repeat(np.arange(n_states), n_inputs)
        self.next = ns.reshape(-1)
        self.sym = sym.reshape(n_states * n_inputs, -1).astype(bool)
        n_streams = self.sym.shape[1]
        masks = np.arange(1 << n_streams)
        erased = ((masks[:, None] >> np.arange(n_streams)) & 1).astype(bool)
        # ok[mask, b]: every observed symbol of branch b is zero
        self.ok = np.all(erased[:, None, :] | ~self.sym[None, :, :], axis=-1)
        self.to_next = np.zeros((self.state.size, n_states), dtype=np.int64)
        self.to_next[np.arange(self.state.size), self.next] = 1
        self.to_state = np.zeros((self.state.size, n_states), dtype=np.int64)
        self.to_state[np.arange(self.state.size), self.state] = 1


def sample_masks(probs, n_streams: int, sections: int, seed: int, trials: int) -> np.ndarray:
    """Erasure masks of shape (trials, sections); trial i uses seed (seed, i)."""
    probs = np.asarray(probs, dtype=float)
    weights = 1 << np.arange(n_streams)
    out = np.empty((trials, sections), dtype=np.int64)
    for i in range(trials):
        rng = np.random.default_rng([seed, i])
        erased = rng.random((sections, n_streams)) < probs
        out[i] = erased @ weights
    return out


def forward_sets(trellis: Trellis, masks: np.ndarray, br: _Branches | None = None) -> np.ndarray:
    """alpha[t, trial, state]: state reachable at time t from state 0."""
    br = br or _Branches(trellis)
    trials, n_sec = masks.shape
    alpha = np.zeros((n_sec + 1, trials, br.n_states), dtype=bool)
    alpha[0, :, 0] = True
    for t in range(n_sec):
        live = alpha[t][:, br.state] & br.ok[masks[:, t]]
        alpha[t + 1] = (live.astype(np.int64) @ br.to_next) > 0
    return alpha


def backward_sets(trellis: Trellis, masks: np.ndarray, br: _Branches | None = None) -> np.ndarray:
    """beta[t, trial, state]: a consistent path leads from state at time t to
    the zero state at the end."""
    br = br or _Branches(trellis)
    trials, n_sec = masks.shape
    beta = np.zeros((n_sec + 1, trials, br.n_states), dtype=bool)
    beta[n_sec, :, 0] = True
    for t in range(n_sec - 1, -1, -1):
        live = beta[t + 1][:, br.next] & br.ok[masks[:, t]]
        beta[t] = (live.astype(np.int64) @ br.to_state) > 0
    return beta


def simulate_extrinsic(trellis: Trellis, probs, cfg: McConfig = McConfig()) -> McEstimate:
    """Per-stream extrinsic erasure rate over the central window."""
    probs = np.asarray(probs, dtype=float)
    n_str = trellis.num_streams
    window = cfg.window_range(trellis.memory)
    br = _Branches(trellis)
    masks = sample_masks(probs, n_str, cfg.sections, cfg.seed, cfg.trials)
    alpha = forward_sets(trellis, masks, br)
    beta = backward_sets(trellis, masks, br)
    w = np.arange(window.start, window.stop)
    reach = alpha[w][..., br.state] & beta[w + 1][..., br.next]
    win_masks = masks[:, w].T
    counts = np.zeros((cfg.trials, n_str), dtype=np.int64)
    for s in range(n_str):
        cons = reach & br.ok[win_masks | (1 << s)]
        ones = np.any(cons & br.sym[:, s], axis=-1)
        zeros = np.any(cons & ~br.sym[:, s], axis=-1)
        counts[:, s] = np.count_nonzero(ones & zeros, axis=0)
    samples = cfg.trials * len(window)
    # integer totals keep the aggregate independent of trial order
    mean = counts.sum(axis=0) / samples
    per_trial = counts / len(window)
    stderr = per_trial.std(axis=0, ddof=1) / np.sqrt(cfg.trials)
    binomial = np.sqrt(mean * (1.0 - mean) / samples)
    return McEstimate(mean, stderr, binomial, samples)
