"""Per-class model banks and isolated-unit recognition."""

from __future__ import annotations

import logging
import math
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import bhmm, phmm
from .corpus import Corpus, Item

log = logging.getLogger(__name__)

PROBABILISTIC = "prob"
BELIEF = "belief"
KINDS = (PROBABILISTIC, BELIEF)


class BankError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ModelBank:
    """``classes`` maps each label to one :class:`HmmParams` (``kind='prob'``)
    or to a list of :class:`BeliefHmm`, one per training exemplar (``kind='belief'``)."""

    kind: str
    classes: Mapping[str, object]

    def __post_init__(self):
        if self.kind not in KINDS:
            raise BankError(f"unknown bank kind {self.kind!r}")
        if not self.classes:
            raise BankError("model bank has no classes")
        classes = {}
        for label in sorted(self.classes):
            models = self.classes[label]
            if self.kind == BELIEF:
                models = tuple(models)
                if not models:
                    raise BankError(f"class {label!r} has no models")
            classes[label] = models
        object.__setattr__(self, "classes", classes)
        dims = {m.dim for m in self.models()}
        if len(dims) != 1:
            raise BankError(f"models disagree on feature dimension: {sorted(dims)}")

    @property
    def labels(self) -> list[str]:
        return list(self.classes)

    @property
    def dim(self) -> int:
        return next(iter(self.models())).dim

    def models(self) -> Iterable:
        for models in self.classes.values():
            if self.kind == BELIEF:
                yield from models
            else:
                yield models

    def __len__(self) -> int:
        return sum(1 for _ in self.models())


@dataclass(frozen=True)
class Recognition:
    label: str | None  # None: no decision (every class scored -inf)
    scores: dict[str, float]


@dataclass
class RecognitionReport:
    items: list[tuple[str | None, str, dict[str, float]]] = field(default_factory=list)

    @property
    def correct(self) -> int:
        return sum(pred == true for pred, true, _ in self.items)

    @property
    def total(self) -> int:
        return len(self.items)

    @property
    def rate(self) -> float:
        return self.correct / self.total if self.items else 0.0


def model_seed(seed: int, source: str) -> int:
    """Training seed of one exemplar's belief model, stable across subsets of the corpus."""
    return int(np.random.SeedSequence([seed, zlib.crc32(source.encode())]).generate_state(1)[0])


def _check_sequence(items: Sequence[Item], n_states: int, label: str) -> list[Item]:
    kept = [it for it in items if len(it.obs) >= n_states]
    for it in items:
        if len(it.obs) < n_states:
            log.warning("skipping %s (%d frames < %d states)", it.source, len(it.obs), n_states)
    if not kept:
        raise BankError(f"class {label!r} has no usable training sequence")
    return kept


def train_bank(corpus: Corpus, kind: str, n_states: int = 3, n_mix: int = 2, seed: int = 0) -> ModelBank:
    """Train a probabilistic bank (one Baum-Welch HMM per class) or a belief bank
    (one belief HMM per training exemplar)."""
    if kind not in KINDS:
        raise BankError(f"unknown bank kind {kind!r}")
    classes = {}
    for label, items in corpus.by_class().items():
        if not items:
            raise BankError(f"class {label!r} has no training sequences")
        items = _check_sequence(items, n_states, label)
        if kind == BELIEF:
            classes[label] = [
                bhmm.train_belief_model(it.obs, n_states, n_mix, model_seed(seed, it.source))
                for it in items
            ]
        else:
            classes[label] = phmm.train([it.obs for it in items], n_states, n_mix, seed)
    if not classes:
        raise BankError("training corpus is empty")
    return ModelBank(kind, classes)


def _decide(scores: dict[str, float]) -> str | None:
    best, best_score = None, -math.inf
    for label in sorted(scores):
        if scores[label] > best_score:
            best, best_score = label, scores[label]
    return best


def _check_dim(bank: ModelBank, obs: np.ndarray) -> np.ndarray:
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    if obs.shape[1] != bank.dim:
        raise BankError(f"observation dimension {obs.shape[1]} does not match bank dimension {bank.dim}")
    return obs


def belief_scores(models: Sequence[bhmm.BeliefHmm], obs) -> float:
    """Arithmetic mean of the conflict metric over a class's models."""
    return float(np.mean([bhmm.conflict_metric(m, obs) for m in models]))


def recognize_belief(bank: ModelBank, obs) -> Recognition:
    if bank.kind != BELIEF:
        raise BankError("recognize_belief needs a belief bank")
    obs = _check_dim(bank, obs)
    scores = {label: belief_scores(models, obs) for label, models in bank.classes.items()}
    return Recognition(_decide(scores), scores)


def recognize_prob(bank: ModelBank, obs) -> Recognition:
    if bank.kind != PROBABILISTIC:
        raise BankError("recognize_prob needs a probabilistic bank")
    obs = _check_dim(bank, obs)
    scores = {label: phmm.forward(model, obs)[0] for label, model in bank.classes.items()}
    return Recognition(_decide(scores), scores)


def recognize(bank: ModelBank, obs) -> Recognition:
    return recognize_belief(bank, obs) if bank.kind == BELIEF else recognize_prob(bank, obs)


def evaluate(bank: ModelBank, test: Corpus) -> RecognitionReport:
    """Recognize every test item; no-decision outcomes count as errors."""
    if not len(test):
        raise BankError("empty test corpus")
    if test.dim != bank.dim:
        raise BankError(f"test corpus dimension {test.dim} does not match bank dimension {bank.dim}")
    report = RecognitionReport()
    for it in test:
        res = recognize(bank, it.obs)
        report.items.append((res.label, it.label, res.scores))
    return report
