"""Probabilistic HMM with GMM emissions: forward, backward, Viterbi, Baum-Welch."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import gmm as gmm_mod
from .gmm import GMM


class HMMError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HmmParams:
    """Transition matrix, initial distribution and per-state GMMs.

    ``mask[i, j]`` marks the allowed transitions; entries of ``transmat``
    outside the mask must be zero.
    """

    transmat: np.ndarray
    startprob: np.ndarray
    emissions: tuple[GMM, ...]
    mask: np.ndarray | None = None
    trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        a = np.array(self.transmat, dtype=float)
        pi = np.array(self.startprob, dtype=float)
        n = pi.shape[0]
        mask = np.ones((n, n), bool) if self.mask is None else np.array(self.mask, dtype=bool)
        if a.shape != (n, n) or mask.shape != (n, n):
            raise HMMError(f"transition matrix must be {n}x{n}")
        if len(self.emissions) != n:
            raise HMMError(f"need {n} emission GMMs, got {len(self.emissions)}")
        if len({g.dim for g in self.emissions}) != 1:
            raise HMMError("emission GMMs disagree on feature dimension")
        if np.any(a < 0) or np.any(np.abs(a.sum(1) - 1) > 1e-9):
            raise HMMError("transition rows must be distributions")
        if np.any(a[~mask] != 0):
            raise HMMError("transition matrix has mass outside the topology mask")
        if np.any(pi < 0) or abs(pi.sum() - 1) > 1e-9:
            raise HMMError("initial probabilities must be a distribution")
        for name, arr in [("transmat", a), ("startprob", pi), ("mask", mask)]:
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "emissions", tuple(self.emissions))

    @property
    def n_states(self) -> int:
        return self.startprob.shape[0]

    @property
    def dim(self) -> int:
        return self.emissions[0].dim

    def log_emissions(self, obs) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        if obs.shape[1] != self.dim:
            raise HMMError(f"observation dimension {obs.shape[1]} != model dimension {self.dim}")
        return gmm_mod.state_log_likelihoods(self.emissions, obs)


def make_left_right(n_states: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Left-right topology: ``(mask, transmat, startprob)`` with self-loops and one-step advances."""
    if n_states < 1:
        raise HMMError("need at least one state")
    mask = np.eye(n_states, dtype=bool) | np.eye(n_states, k=1, dtype=bool)
    transmat = mask / mask.sum(axis=1, keepdims=True)
    startprob = np.zeros(n_states)
    startprob[0] = 1.0
    return mask, transmat, startprob


# ---------------------------------------------------------------------------
# Core recursions on a (T, N) log-emission matrix

def _forward(transmat, startprob, log_b):
    """Scaled forward pass; returns normalized alphas and per-step log normalizers.

    Emissions of step ``t`` are shifted by their maximum over the states that
    carry predicted mass, and zeroed elsewhere, so that a strong emission in an
    unreachable state cannot underflow the reachable ones.
    """
    T, n = log_b.shape
    shift = np.full(T, -np.inf)
    b = np.zeros((T, n))
    alpha = np.zeros((T, n))
    log_c = np.full(T, -np.inf)
    pred = startprob
    for t in range(T):
        live = pred > 0
        if live.any():
            shift[t] = np.max(log_b[t, live])
        if not np.isfinite(shift[t]):
            break
        b[t, live] = np.exp(log_b[t, live] - shift[t])
        a = pred * b[t]
        s = a.sum()
        if not s > 0:
            break
        alpha[t] = a / s
        log_c[t] = np.log(s) + shift[t]
        pred = alpha[t] @ transmat
    return alpha, log_c, b, shift


def forward_emissions(transmat, startprob, log_b) -> tuple[float, np.ndarray, np.ndarray]:
    """Forward pass on precomputed log emissions.

    Returns ``(log_likelihood, alpha, log_norm)`` where ``alpha[t]`` is the
    filtered state distribution and ``log_norm[t] = log P(O_t | O_1..O_{t-1})``.
    """
    alpha, log_c, _, _ = _forward(np.asarray(transmat), np.asarray(startprob), np.asarray(log_b, float))
    return float(log_c.sum()), alpha, log_c


def _backward(transmat, b, log_c, shift):
    T, n = b.shape
    beta = np.zeros((T, n))
    if not np.isfinite(log_c[-1]):
        return beta
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        scale = np.exp(log_c[t + 1] - shift[t + 1])
        beta[t] = transmat @ (b[t + 1] * beta[t + 1]) / scale
    return beta


def backward_emissions(transmat, startprob, log_b) -> np.ndarray:
    """Backward variables scaled with the forward normalizers (so ``sum_i alpha*beta == 1``)."""
    transmat = np.asarray(transmat)
    _, log_c, b, shift = _forward(transmat, np.asarray(startprob), np.asarray(log_b, float))
    return _backward(transmat, b, log_c, shift)


def viterbi_emissions(transmat, startprob, log_b) -> tuple[np.ndarray, float]:
    """Max-product decoding in the log domain; ties go to the lower state index."""
    log_b = np.asarray(log_b, float)
    T, n = log_b.shape
    with np.errstate(divide="ignore"):
        log_a = np.log(np.asarray(transmat))
        delta = np.log(np.asarray(startprob)) + log_b[0]
    ptr = np.zeros((T, n), dtype=int)
    for t in range(1, T):
        cand = delta[:, None] + log_a
        ptr[t] = np.argmax(cand, axis=0)
        delta = cand[ptr[t], np.arange(n)] + log_b[t]
    path = np.empty(T, dtype=int)
    path[-1] = int(np.argmax(delta))
    for t in range(T - 1, 0, -1):
        path[t - 1] = ptr[t, path[t]]
    return path, float(delta[path[-1]])


# ---------------------------------------------------------------------------
# Model-level API

def forward(params: HmmParams, obs) -> tuple[float, np.ndarray]:
    """``(log P(O | params), normalized alpha)``; an impossible sequence gives ``-inf``."""
    ll, alpha, _ = forward_emissions(params.transmat, params.startprob, params.log_emissions(obs))
    return ll, alpha


def backward(params: HmmParams, obs) -> np.ndarray:
    return backward_emissions(params.transmat, params.startprob, params.log_emissions(obs))


def viterbi(params: HmmParams, obs) -> tuple[np.ndarray, float]:
    return viterbi_emissions(params.transmat, params.startprob, params.log_emissions(obs))


def uniform_segments(n_frames: int, n_states: int) -> list[np.ndarray]:
    """Frame indices of ``n_states`` contiguous, near-equal chunks."""
    if n_frames < n_states:
        raise HMMError(f"sequence of {n_frames} frames is shorter than {n_states} states")
    return np.array_split(np.arange(n_frames), n_states)


def fit_state_gmms(sequences: Sequence[np.ndarray], n_states: int, n_mix: int, seed: int) -> list[GMM]:
    """Flat start: pool uniform-segmentation chunks per state and fit one GMM each.

    The mixture count is reduced when a state has fewer frames than components.
    """
    pools = [[] for _ in range(n_states)]
    for seq in sequences:
        seq = np.atleast_2d(seq)
        for j, idx in enumerate(uniform_segments(len(seq), n_states)):
            pools[j].append(seq[idx])
    gmms = []
    for j, parts in enumerate(pools):
        data = np.concatenate(parts)
        gmms.append(gmm_mod.em_fit(data, min(n_mix, len(data)), seed=seed + j))
    return gmms


def init_left_right(sequences, n_states: int = 3, n_mix: int = 2, seed: int = 0) -> HmmParams:
    """Left-right model with uniform-segmentation GMMs, ready for Baum-Welch."""
    if not len(sequences):
        raise HMMError("empty training set")
    mask, transmat, startprob = make_left_right(n_states)
    return HmmParams(transmat, startprob, fit_state_gmms(sequences, n_states, n_mix, seed), mask)


def baum_welch(params: HmmParams, sequences, max_iter: int = 50, tol: float = 1e-4) -> HmmParams:
    """Re-estimate transitions, initial distribution and GMMs from several sequences.

    Expected counts are accumulated over all sequences. The returned model
    carries in ``trace`` the total log-likelihood seen at each iteration;
    iteration stops when it improves by less than ``tol``.
    """
    seqs = [np.atleast_2d(np.asarray(s, dtype=float)) for s in sequences]
    if not seqs:
        raise HMMError("empty training set")
    if np.any((params.transmat * params.mask).sum(axis=1) <= 0):
        raise HMMError("topology mask leaves a state without outgoing transitions")
    n = params.n_states
    frames = np.concatenate(seqs)
    trace = []
    current = params
    for it in range(max_iter):
        xi_sum = np.zeros((n, n))
        start_sum = np.zeros(n)
        gammas = []
        total = 0.0
        for obs in seqs:
            log_b = current.log_emissions(obs)
            alpha, log_c, b, shift = _forward(current.transmat, current.startprob, log_b)
            ll = log_c.sum()
            total += ll
            if not np.isfinite(ll):
                gammas.append(np.zeros_like(log_b))
                continue
            beta = _backward(current.transmat, b, log_c, shift)
            gamma = alpha * beta
            gamma /= gamma.sum(axis=1, keepdims=True)
            gammas.append(gamma)
            start_sum += gamma[0]
            scale = np.exp(log_c[1:] - shift[1:])
            w = b[1:] * beta[1:] / scale[:, None]
            xi_sum += current.transmat * (alpha[:-1].T @ w)
        trace.append(float(total))
        if it > 0 and total - trace[-2] < tol:
            break
        gamma_all = np.concatenate(gammas)
        rows = xi_sum.sum(axis=1, keepdims=True)
        transmat = np.where(rows > 0, xi_sum / np.where(rows > 0, rows, 1.0), current.transmat)
        transmat = np.where(current.mask, transmat, 0.0)
        transmat /= transmat.sum(axis=1, keepdims=True)
        startprob = start_sum / start_sum.sum() if start_sum.sum() > 0 else current.startprob
        emissions = [gmm_mod.reestimate(g, frames, gamma_all[:, j]) for j, g in enumerate(current.emissions)]
        current = HmmParams(transmat, startprob, emissions, current.mask)
    return HmmParams(current.transmat, current.startprob, current.emissions, current.mask, tuple(trace))


def train(sequences, n_states: int = 3, n_mix: int = 2, seed: int = 0, max_iter: int = 50, tol: float = 1e-4) -> HmmParams:
    """Flat-start left-right initialization followed by Baum-Welch."""
    return baum_welch(init_left_right(sequences, n_states, n_mix, seed), sequences, max_iter, tol)
