import math

import numpy as np
import pytest

from beliefhmm import bhmm, recognizer, tbm
from beliefhmm.corpus import Corpus, SyntheticSpec, synth_corpus
from beliefhmm.gmm import GMM
from beliefhmm.recognizer import BankError, ModelBank


@pytest.fixture(scope="module")
def easy():
    """Well separated classes with little noise: both recognizers should be perfect."""
    spec = SyntheticSpec(n_classes=3, exemplars=4, gain_range=(0.3, 0.5), seed=7)
    c = synth_corpus(spec)
    train = Corpus([it for it in c if it.source.endswith(("-00", "-01"))])
    test = Corpus([it for it in c if not it.source.endswith(("-00", "-01"))])
    return train, test


@pytest.mark.parametrize("kind", ["prob", "belief"])
def test_easy_corpus_is_recognized(kind, easy):
    train, test = easy
    bank = recognizer.train_bank(train, kind)
    report = recognizer.evaluate(bank, test)
    assert report.total == len(test)
    assert report.rate == 1.0


def test_belief_bank_has_one_model_per_exemplar(easy):
    train, _ = easy
    bank = recognizer.train_bank(train, "belief")
    assert bank.labels == ["u0", "u1", "u2"]
    assert len(bank) == len(train)
    assert all(len(ms) == 2 for ms in bank.classes.values())


def test_prob_bank_has_one_model_per_class(easy):
    train, _ = easy
    bank = recognizer.train_bank(train, "prob")
    assert len(bank) == 3


def test_training_is_deterministic(easy):
    train, test = easy
    a = recognizer.train_bank(train, "belief", seed=3)
    b = recognizer.train_bank(train, "belief", seed=3)
    it = test[0]
    assert recognizer.recognize(a, it.obs).scores == recognizer.recognize(b, it.obs).scores


def test_model_seed_depends_on_source_only():
    assert recognizer.model_seed(0, "a-00") == recognizer.model_seed(0, "a-00")
    assert recognizer.model_seed(0, "a-00") != recognizer.model_seed(0, "a-01")
    assert recognizer.model_seed(0, "a-00") != recognizer.model_seed(1, "a-00")


def test_belief_score_is_mean_of_conflict_metrics(easy):
    train, test = easy
    bank = recognizer.train_bank(train, "belief")
    obs = test[0].obs
    res = recognizer.recognize_belief(bank, obs)
    for label, models in bank.classes.items():
        expected = np.mean([bhmm.conflict_metric(m, obs) for m in models])
        assert res.scores[label] == pytest.approx(expected, abs=1e-15)
    assert res.label == max(res.scores, key=res.scores.get)


def _vacuous_model():
    f = tbm.Frame.of_size(1)
    return bhmm.BeliefHmm(tbm.BBA.vacuous(f), tbm.ConditionalBBA.vacuous(f, f), (GMM.single([0.0], [1.0]),))


def test_ties_go_to_first_sorted_label():
    m = _vacuous_model()
    bank = ModelBank("belief", {"zeta": [m], "alpha": [m], "mid": [m]})
    res = recognizer.recognize(bank, np.zeros((4, 1)))
    assert set(res.scores.values()) == {0.0}
    assert res.label == "alpha"


def test_all_minus_inf_is_no_decision():
    assert recognizer._decide({"a": -math.inf, "b": -math.inf}) is None
    assert recognizer._decide({"b": -1.0, "a": -1.0}) == "a"


def test_no_decision_counts_as_error(monkeypatch, easy):
    train, test = easy
    bank = recognizer.train_bank(train, "prob")
    monkeypatch.setattr(recognizer, "recognize",
                        lambda b, o: recognizer.Recognition(None, {l: -math.inf for l in b.labels}))
    report = recognizer.evaluate(bank, test)
    assert report.correct == 0 and report.rate == 0.0


def test_shift_invariance_of_prob_decision(easy):
    train, test = easy
    bank = recognizer.train_bank(train, "prob")
    res = recognizer.recognize(bank, test[0].obs)
    shifted = {k: v + 123.0 for k, v in res.scores.items()}
    assert recognizer._decide(shifted) == res.label


def test_kind_mismatch_rejected(easy):
    train, test = easy
    bank = recognizer.train_bank(train, "prob")
    with pytest.raises(BankError):
        recognizer.recognize_belief(bank, test[0].obs)
    with pytest.raises(BankError):
        recognizer.train_bank(train, "fuzzy")


def test_dimension_mismatch_rejected(easy):
    train, _ = easy
    bank = recognizer.train_bank(train, "prob")
    with pytest.raises(BankError, match="dimension"):
        recognizer.recognize(bank, np.zeros((5, 3)))
    with pytest.raises(BankError, match="dimension"):
        recognizer.evaluate(bank, Corpus([("u0", np.zeros((5, 3)), "x")]))


def test_empty_inputs_rejected(easy):
    train, _ = easy
    bank = recognizer.train_bank(train, "prob")
    with pytest.raises(BankError, match="empty test"):
        recognizer.evaluate(bank, Corpus())
    with pytest.raises(BankError):
        recognizer.train_bank(Corpus(), "prob")
    with pytest.raises(BankError):
        ModelBank("belief", {})
    with pytest.raises(BankError):
        ModelBank("belief", {"a": []})


def test_short_training_sequences_are_skipped(caplog):
    rng = np.random.default_rng(0)
    c = Corpus([("a", rng.normal(size=(12, 2)), "a0"), ("a", rng.normal(size=(2, 2)), "a1"),
                ("b", rng.normal(size=(12, 2)) + 5, "b0")])
    bank = recognizer.train_bank(c, "belief")
    assert len(bank.classes["a"]) == 1
    assert "skipping a1" in caplog.text
    with pytest.raises(BankError, match="no usable"):
        recognizer.train_bank(Corpus([("a", rng.normal(size=(2, 2)), "a1")]), "prob")


def test_class_model_counts_may_differ():
    m = _vacuous_model()
    bank = ModelBank("belief", {"a": [m], "b": [m, m, m]})
    assert len(bank) == 4
