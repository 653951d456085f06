"""Labeled observation sequences and the synthetic corpus generator."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np


class CorpusError(ValueError):
    pass


class Item(NamedTuple):
    label: str
    obs: np.ndarray
    source: str


class Corpus:
    """Ordered list of ``(label, observation sequence, source id)`` sharing one feature dimension."""

    def __init__(self, items=()):
        self.items: list[Item] = []
        for it in items:
            self.add(*it)

    def add(self, label: str, obs, source: str) -> None:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        if not label:
            raise CorpusError("labels must be non-empty")
        if obs.shape[0] < 1:
            raise CorpusError(f"{source}: empty observation sequence")
        if self.items and obs.shape[1] != self.dim:
            raise CorpusError(f"{source}: dimension {obs.shape[1]} differs from corpus dimension {self.dim}")
        self.items.append(Item(str(label), obs, str(source)))

    @property
    def dim(self) -> int:
        if not self.items:
            raise CorpusError("empty corpus has no dimension")
        return self.items[0].obs.shape[1]

    @property
    def labels(self) -> list[str]:
        return sorted({it.label for it in self.items})

    def by_class(self) -> dict[str, list[Item]]:
        out: dict[str, list[Item]] = {}
        for it in self.items:
            out.setdefault(it.label, []).append(it)
        return dict(sorted(out.items()))

    def __iter__(self) -> Iterator[Item]:
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    def __getitem__(self, i) -> Item:
        return self.items[i]


# ---------------------------------------------------------------------------
# Synthetic corpus

@dataclass
class SyntheticSpec:
    """Recipe for a corpus of left-right state sequences with Gaussian emissions.

    Each state of a class emits from ``modes`` equally likely Gaussians.  When
    ``state_means`` (shape ``(n_classes, n_states, modes, dim)``) is not
    given, the mode means are drawn from a shared inventory of
    ``inventory`` prototype vectors (``spread`` standard deviation): every
    class arranges distinct prototypes into its states, and no two classes
    group the same prototypes into more than one state.  Classes therefore
    reuse the same sounds in different groupings and orders.

    Every exemplar has its own noise gain, log-uniform in ``gain_range``, so
    a frame is ``mean + gain * noise_scale * sqrt(variance) * N(0, 1)``.
    With ``duration_jitter == 0`` every state lasts ``T // n_states`` frames;
    otherwise state shares are a Dirichlet draw of that relative spread on
    top of ``min_duration`` frames each.
    """

    n_classes: int = 7
    n_states: int = 3
    dim: int = 4
    exemplars: int = 15
    length_range: tuple[int, int] = (30, 60)
    min_duration: int = 2
    modes: int = 2
    inventory: int = 6
    spread: float = 10.0
    gain_range: tuple[float, float] = (0.01, 4.0)
    duration_jitter: float = 0.0
    noise_scale: float = 1.0
    state_means: np.ndarray | None = None
    state_variances: np.ndarray | None = None
    seed: int = 0
    labels: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.n_classes < 2:
            raise CorpusError("need at least two classes")
        if self.n_states < 1 or self.modes < 1 or self.dim < 1 or self.exemplars < 1:
            raise CorpusError("states, modes, dimension and exemplars must be positive")
        lo, hi = self.length_range
        if lo > hi or lo < self.n_states * max(self.min_duration, 1):
            raise CorpusError("sequence lengths must allow min_duration frames in every state")
        g_lo, g_hi = self.gain_range
        if not 0 < g_lo <= g_hi:
            raise CorpusError("gain range must be positive and ordered")
        if self.noise_scale < 0 or self.duration_jitter < 0:
            raise CorpusError("noise scale and duration jitter must be non-negative")
        if self.state_means is None and self.inventory < self.n_states * self.modes:
            raise CorpusError("inventory too small for distinct prototypes in every state")
        if not self.labels:
            self.labels = tuple(f"u{k}" for k in range(self.n_classes))
        if len(self.labels) != self.n_classes:
            raise CorpusError("one label per class required")

    @property
    def mean_shape(self) -> tuple[int, int, int, int]:
        return (self.n_classes, self.n_states, self.modes, self.dim)


def class_means(spec: SyntheticSpec, rng: np.random.Generator) -> np.ndarray:
    """``(n_classes, n_states, modes, dim)`` mode means."""
    if spec.state_means is not None:
        means = np.asarray(spec.state_means, dtype=float)
        if means.ndim == 3:
            means = means[:, :, None, :]
        if means.shape != spec.mean_shape:
            raise CorpusError(f"state_means must have shape {spec.mean_shape}")
        return means
    pool = spec.spread * rng.normal(size=(spec.inventory, spec.dim))
    groupings: list[set[frozenset[int]]] = []
    plans = []
    attempts = 0
    while len(plans) < spec.n_classes:
        attempts += 1
        if attempts > 10000:
            raise CorpusError("could not draw enough distinct class arrangements from the inventory")
        plan = rng.permutation(spec.inventory)[: spec.n_states * spec.modes].reshape(spec.n_states, spec.modes)
        groups = {frozenset(row.tolist()) for row in plan}
        if any(len(groups & other) > min(1, spec.n_states - 1) for other in groupings):
            continue
        groupings.append(groups)
        plans.append(plan)
    return pool[np.array(plans)]


def _durations(rng, T, n_states, min_duration, jitter):
    if jitter == 0:
        return np.full(n_states, T // n_states)
    free = T - n_states * min_duration
    share = rng.dirichlet(np.full(n_states, 1.0 / (n_states * jitter**2)))
    extra = np.floor(share * free).astype(int)
    extra[rng.choice(n_states, size=free - extra.sum(), replace=False)] += 1
    return min_duration + extra


def synth_corpus(spec: SyntheticSpec) -> Corpus:
    """Deterministic (given ``spec.seed``) corpus following ``spec``."""
    rng = np.random.default_rng(spec.seed)
    means = class_means(spec, rng)
    if spec.state_variances is None:
        variances = np.ones_like(means)
    else:
        variances = np.broadcast_to(np.asarray(spec.state_variances, dtype=float), means.shape)
    log_lo, log_hi = np.log(spec.gain_range)
    corpus = Corpus()
    for k in range(spec.exemplars):
        for c, label in enumerate(spec.labels):
            T = int(rng.integers(spec.length_range[0], spec.length_range[1] + 1))
            states = np.repeat(np.arange(spec.n_states),
                               _durations(rng, T, spec.n_states, spec.min_duration, spec.duration_jitter))
            T = len(states)
            modes = rng.integers(spec.modes, size=T)
            gain = np.exp(rng.uniform(log_lo, log_hi))
            noise = rng.normal(size=(T, spec.dim)) * np.sqrt(variances[c, states, modes])
            obs = means[c, states, modes] + gain * spec.noise_scale * noise
            corpus.add(label, obs, f"{label}-{k:02d}")
    return corpus
