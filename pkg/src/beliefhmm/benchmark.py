"""Recognition rate as a function of the number of training exemplars per class."""

from __future__ import annotations

import csv
import io
import logging
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import bhmm
from .corpus import Corpus
from .recognizer import BELIEF, KINDS, PROBABILISTIC, BankError, _decide, evaluate, model_seed, train_bank

log = logging.getLogger(__name__)

CSV_HEADER = ("kind", "count", "seed", "rate")


@dataclass(frozen=True)
class BenchmarkRow:
    kind: str
    count: int
    seed: int
    rate: float


def split(corpus: Corpus, count: int, seed: int, resubstitution: bool = False) -> tuple[Corpus, Corpus]:
    """First ``count`` exemplars of each class (after a seeded shuffle) for training, the rest for test.

    With ``resubstitution`` the test set is the training set itself.
    """
    train, test = Corpus(), Corpus()
    for label, items in corpus.by_class().items():
        if count < 1:
            raise BankError("exemplar count must be at least 1")
        if count > len(items) or (count == len(items) and not resubstitution):
            raise BankError(
                f"class {label!r} has {len(items)} exemplars; training on {count} leaves no test data "
                "(request resubstitution explicitly)"
            )
        rng = np.random.default_rng([seed, zlib.crc32(label.encode())])
        order = rng.permutation(len(items))
        for rank, i in enumerate(order):
            it = items[i]
            in_train = rank < count
            if in_train:
                train.add(*it)
            if in_train == resubstitution:
                test.add(*it)
    return train, test


class _BeliefCache:
    """Belief models and conflict metrics per (seed, exemplar); a belief bank is
    a set of independent per-exemplar models, so nested training sets share them."""

    def __init__(self, n_states, n_mix):
        self.n_states, self.n_mix = n_states, n_mix
        self.models: dict[tuple[int, str], bhmm.BeliefHmm] = {}
        self.scores: dict[tuple[int, str, str], float] = {}

    def model(self, seed, item):
        key = (seed, item.source)
        if key not in self.models:
            self.models[key] = bhmm.train_belief_model(item.obs, self.n_states, self.n_mix, model_seed(seed, item.source))
        return self.models[key]

    def rate(self, train: Corpus, test: Corpus, seed: int) -> float:
        classes = train.by_class()
        correct = 0
        for it in test:
            scores = {}
            for label, items in classes.items():
                vals = []
                for tr in items:
                    key = (seed, tr.source, it.source)
                    if key not in self.scores:
                        self.scores[key] = bhmm.conflict_metric(self.model(seed, tr), it.obs)
                    vals.append(self.scores[key])
                scores[label] = float(np.mean(vals))
            correct += _decide(scores) == it.label
        return correct / len(test)


def run(
    corpus: Corpus,
    counts: Sequence[int],
    seeds: Sequence[int],
    kinds: Iterable[str] = KINDS,
    n_states: int = 3,
    n_mix: int = 2,
    resubstitution: bool = False,
) -> list[BenchmarkRow]:
    """One row per (kind, count, seed): train on ``count`` exemplars per class, score the rest."""
    kinds = list(kinds)
    for kind in kinds:
        if kind not in KINDS:
            raise BankError(f"unknown bank kind {kind!r}")
    log.info("benchmark mode: %s", "resubstitution" if resubstitution else "held-out")
    cache = _BeliefCache(n_states, n_mix)
    rows = []
    for kind in kinds:
        for seed in seeds:
            for count in counts:
                train, test = split(corpus, count, seed, resubstitution)
                if kind == BELIEF:
                    rate = cache.rate(train, test, seed)
                else:
                    rate = evaluate(train_bank(train, PROBABILISTIC, n_states, n_mix, seed), test).rate
                rows.append(BenchmarkRow(kind, int(count), int(seed), rate))
                log.debug("%s count=%d seed=%d rate=%.4f", kind, count, seed, rate)
    return rows


def to_csv(rows: Iterable[BenchmarkRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for r in rows:
        writer.writerow([r.kind, r.count, r.seed, repr(r.rate)])
    return buf.getvalue()


def mean_rates(rows: Iterable[BenchmarkRow]) -> dict[tuple[str, int], float]:
    """Mean rate over seeds for every (kind, count)."""
    acc: dict[tuple[str, int], list[float]] = {}
    for r in rows:
        acc.setdefault((r.kind, r.count), []).append(r.rate)
    return {k: float(np.mean(v)) for k, v in acc.items()}
