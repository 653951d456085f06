import pytest

from beliefhmm import benchmark, recognizer
from beliefhmm.benchmark import BenchmarkRow
from beliefhmm.corpus import SyntheticSpec, synth_corpus
from beliefhmm.recognizer import BankError


@pytest.fixture(scope="module")
def small():
    return synth_corpus(SyntheticSpec(n_classes=3, exemplars=4, seed=1))


def sources(c):
    return {it.source for it in c}


def test_split_partitions_each_class(small):
    train, test = benchmark.split(small, 1, seed=0)
    assert len(train) == 3 and len(test) == 9
    assert sources(train).isdisjoint(sources(test))
    assert sources(train) | sources(test) == sources(small)
    assert all(len(v) == 1 for v in train.by_class().values())


def test_split_is_seeded_and_nested(small):
    a, _ = benchmark.split(small, 2, seed=5)
    b, _ = benchmark.split(small, 2, seed=5)
    assert sources(a) == sources(b)
    one, _ = benchmark.split(small, 1, seed=5)
    three, _ = benchmark.split(small, 3, seed=5)
    assert sources(one) < sources(a) < sources(three)
    others = [sources(benchmark.split(small, 1, seed=s)[0]) for s in range(6)]
    assert len({frozenset(o) for o in others}) > 1


def test_split_exhausting_a_class_needs_resubstitution(small):
    with pytest.raises(BankError, match="resubstitution"):
        benchmark.split(small, 4, seed=0)
    with pytest.raises(BankError):
        benchmark.split(small, 5, seed=0, resubstitution=True)
    with pytest.raises(BankError):
        benchmark.split(small, 0, seed=0)
    train, test = benchmark.split(small, 4, seed=0, resubstitution=True)
    assert sources(train) == sources(test) == sources(small)


def test_resubstitution_tests_on_training_set(small):
    train, test = benchmark.split(small, 2, seed=3, resubstitution=True)
    assert sources(train) == sources(test)


def test_belief_cache_matches_direct_evaluation(small):
    rows = benchmark.run(small, [1, 2], [0], kinds=["belief"])
    for row in rows:
        train, test = benchmark.split(small, row.count, row.seed)
        bank = recognizer.train_bank(train, "belief", seed=row.seed)
        assert row.rate == recognizer.evaluate(bank, test).rate


def test_prob_rows_match_direct_evaluation(small):
    (row,) = benchmark.run(small, [2], [1], kinds=["prob"])
    train, test = benchmark.split(small, 2, 1)
    assert row.rate == recognizer.evaluate(recognizer.train_bank(train, "prob", seed=1), test).rate


def test_run_row_order_and_bounds(small):
    rows = benchmark.run(small, [1, 2], [0, 1])
    assert [(r.kind, r.seed, r.count) for r in rows] == [
        (k, s, c) for k in recognizer.KINDS for s in (0, 1) for c in (1, 2)
    ]
    assert all(0.0 <= r.rate <= 1.0 for r in rows)


def test_unknown_kind(small):
    with pytest.raises(BankError):
        benchmark.run(small, [1], [0], kinds=["fuzzy"])


def test_csv_and_means():
    rows = [BenchmarkRow("prob", 1, 0, 0.5), BenchmarkRow("prob", 1, 1, 0.25), BenchmarkRow("belief", 1, 0, 1.0)]
    text = benchmark.to_csv(rows)
    assert text.splitlines() == ["kind,count,seed,rate", "prob,1,0,0.5", "prob,1,1,0.25", "belief,1,0,1.0"]
    assert benchmark.mean_rates(rows) == {("prob", 1): 0.375, ("belief", 1): 1.0}
