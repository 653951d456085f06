"""Acceptance criteria, one test per criterion.

A summary line per criterion is printed at the end of the pytest run.
"""

import math
import time

import numpy as np
import pytest

from beliefhmm import benchmark, bhmm, gmm, phmm, recognizer, storage, tbm
from beliefhmm.bhmm import BeliefHmm
from beliefhmm.corpus import Corpus, SyntheticSpec, synth_corpus
from beliefhmm.gmm import GMM

from oracles import bayes, bayesian_case, hmm_path_sum, random_masses, random_stochastic

criterion = pytest.mark.criterion


def _monotone(trace, rel=1e-9):
    t = np.asarray(trace, float)
    return bool(np.all(np.diff(t) >= -rel * (1.0 + np.abs(t[:-1]))))


@criterion(1, "TBM transforms round-trip and both combination paths agree to 1e-12 (1000 BBAs, N 1-4, < 10 s)")
def test_tbm_kernel_exactness():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst = 0.0
    for k in range(1000):
        n = 1 + k % 4
        f = tbm.Frame.of_size(n)
        m = tbm.BBA(f, random_masses(rng, n))
        bel, pl, q = m.bel(), m.pl(), m.q()
        worst = max(
            worst,
            np.max(np.abs(tbm.m_from_bel(bel, f).masses - m.masses)),
            np.max(np.abs(tbm.m_from_pl(pl, f).masses - m.masses)),
            np.max(np.abs(tbm.m_from_q(q, f).masses - m.masses)),
            np.max(np.abs(tbm.bel_from_m(tbm.m_from_bel(bel, f)) - bel)),
            np.max(np.abs(tbm.pl_from_m(tbm.m_from_pl(pl, f)) - pl)),
            np.max(np.abs(tbm.q_from_m(tbm.m_from_q(q, f)) - q)),
        )
        other = tbm.BBA(f, random_masses(rng, n))
        direct = tbm.conjunctive_combine(m, other).masses
        via_q = tbm.conjunctive_combine_via_q(m, other).masses
        worst = max(worst, np.max(np.abs(direct - via_q)))
    elapsed = time.perf_counter() - start
    print(f"max deviation {worst:.2e}, {elapsed:.2f} s")
    assert worst <= 1e-12
    assert elapsed < 10.0


@criterion(2, "forward likelihood (1e-9) and Viterbi path (exact) match enumeration on 200 models")
def test_probabilistic_oracle_equivalence():
    rng = np.random.default_rng(7)
    for _ in range(200):
        n, T = int(rng.integers(1, 4)), int(rng.integers(1, 6))
        A, pi = random_stochastic(rng, (n, n)), random_stochastic(rng, n)
        B = rng.random((T, n)) + 0.01
        if rng.random() < 0.3:
            B[rng.random((T, n)) < 0.3] = 0.0
            B[:, 0] = np.maximum(B[:, 0], 0.01)
        total, path, _ = hmm_path_sum(A, pi, B)
        with np.errstate(divide="ignore"):
            log_b = np.log(B)
        ll, _, _ = phmm.forward_emissions(A, pi, log_b)
        assert ll == pytest.approx(math.log(total), abs=1e-9)
        vpath, _ = phmm.viterbi_emissions(A, pi, log_b)
        assert tuple(vpath) == path


@criterion(3, "Bayesian belief HMMs reduce to the probabilistic forward to 1e-9 per step (100 models)")
def test_bayesian_reduction():
    rng = np.random.default_rng(11)
    for _ in range(100):
        n, T = int(rng.integers(1, 4)), int(rng.integers(1, 7))
        A, pi, B, table = bayesian_case(rng, n, T)
        res = bhmm.forward_pass(bayes(pi), table, bayes(B))
        _, alpha, _ = phmm.forward_emissions(A, pi, np.log(B))
        singletons = res.masses[:, [1 << i for i in range(n)]]
        np.testing.assert_allclose(singletons, alpha, rtol=0, atol=1e-9)


@criterion(4, "conflict metric: 0 when vacuous, log 0.5 at constant half conflict, matched > mismatched in >= 95/100")
def test_conflict_metric_contract():
    f = tbm.Frame.of_size(3)
    g = GMM.single([0.0], [1.0])
    vacuous = BeliefHmm(tbm.BBA.vacuous(f), tbm.ConditionalBBA.vacuous(f, f), [g] * 3)
    obs = np.random.default_rng(0).normal(size=(9, 1))
    assert bhmm.conflict_metric(vacuous, obs) == 0.0

    f2 = tbm.Frame.of_size(2)
    table = np.zeros((4, 4))
    table[0, 0] = 1.0
    table[1:, 1] = 1.0
    half = BeliefHmm(tbm.BBA.categorical(f2, ["s1"]), tbm.ConditionalBBA(f2, f2, table),
                     [GMM.single([0.0], [1.0]), GMM.single([1.0], [1.0])])
    # at this point the second state is twice as likely: pl = (0.5, 1), so half the mass conflicts
    x = 0.5 - math.log(0.5)
    assert bhmm.conflict_metric(half, np.full((6, 1), x)) == pytest.approx(math.log(0.5), abs=1e-12)

    wins = 0
    for seed in range(100):
        pair = synth_corpus(SyntheticSpec(n_classes=2, exemplars=2, seed=seed)).by_class()
        (a_train, a_query), (b_train, _) = pair["u0"], pair["u1"]
        matched = bhmm.train_belief_model(a_train.obs, seed=seed)
        mismatched = bhmm.train_belief_model(b_train.obs, seed=seed)
        wins += bhmm.conflict_metric(matched, a_query.obs) > bhmm.conflict_metric(mismatched, a_query.obs)
    print(f"matched model wins {wins}/100")
    assert wins >= 95


def _fuzz_sequences(rng):
    dim = int(rng.integers(1, 4))
    out = []
    for _ in range(int(rng.integers(1, 4))):
        T = int(rng.integers(8, 26))
        levels = rng.normal(scale=rng.uniform(0.5, 5.0), size=(int(rng.integers(1, 4)), dim))
        idx = np.sort(rng.integers(len(levels), size=T))
        out.append(levels[idx] + rng.uniform(0.1, 2.0) * rng.normal(size=(T, dim)))
    return out


@criterion(5, "GMM-EM and Baum-Welch never decrease; ITS best iterate never below its start (500 fuzz runs)")
def test_em_monotonicity():
    collapsed = 0
    for run in range(500):
        rng = np.random.default_rng([5, run])
        seqs = _fuzz_sequences(rng)
        n_states, n_mix = int(rng.integers(1, 4)), int(rng.integers(1, 3))
        try:
            g = gmm.em_fit(np.concatenate(seqs), n_mix, seed=run)
            assert _monotone(g.trace), f"GMM-EM run {run}: {g.trace}"
        except gmm.CollapsedComponent:
            collapsed += 1
        if min(len(s) for s in seqs) >= 2 * n_states * n_mix:
            model = phmm.train(seqs, n_states, n_mix, seed=run, max_iter=15)
            assert _monotone(model.trace), f"Baum-Welch run {run}: {model.trace}"
            base = bhmm.train_belief_model(seqs[0], n_states, n_mix, seed=run, its=False)
            refined = bhmm.its_refine(base, seqs[0])
            assert bhmm.conflict_metric(refined, seqs[0]) >= bhmm.conflict_metric(base, seqs[0]), f"ITS run {run}"
    print(f"{collapsed} GMM fits ended in a collapsed component")


@pytest.fixture(scope="module")
def default_corpus():
    return synth_corpus(SyntheticSpec())


@criterion(6, "default corpus, 1 exemplar per class, 10 seeds: belief >= 0.80 and beats prob by >= 20 points, < 5 min")
def test_single_exemplar_advantage(default_corpus):
    start = time.perf_counter()
    rates = benchmark.mean_rates(benchmark.run(default_corpus, [1], range(10)))
    elapsed = time.perf_counter() - start
    belief, prob = rates["belief", 1], rates["prob", 1]
    print(f"belief {belief:.4f}, prob {prob:.4f}, {elapsed:.1f} s")
    assert belief >= 0.80
    assert belief - prob >= 0.20
    assert elapsed < 300.0


@criterion(7, "rate vs exemplar count 1-10: belief non-decreasing within 5 points, prob gains >= 20 points")
def test_curve_shape(default_corpus):
    counts = range(1, 11)
    rates = benchmark.mean_rates(benchmark.run(default_corpus, counts, range(10)))
    belief = [rates["belief", k] for k in counts]
    prob = [rates["prob", k] for k in counts]
    print("belief", " ".join(f"{r:.3f}" for r in belief))
    print("prob  ", " ".join(f"{r:.3f}" for r in prob))
    assert all(r >= max(belief[:i + 1]) - 0.05 for i, r in enumerate(belief))
    assert prob[-1] - prob[0] >= 0.20


@criterion(8, "saved and reloaded banks of both kinds reproduce every score to 1e-12 on 50 items")
def test_serialization_fidelity(tmp_path):
    corpus = synth_corpus(SyntheticSpec(n_classes=5, exemplars=12, seed=3))
    by_class = corpus.by_class()
    train = Corpus([it for items in by_class.values() for it in items[:2]])
    test = Corpus([it for items in by_class.values() for it in items[2:]])
    assert len(test) == 50
    for kind in recognizer.KINDS:
        bank = recognizer.train_bank(train, kind)
        path = tmp_path / f"{kind}.json"
        storage.save_bank(path, bank)
        loaded = storage.load_bank(path)
        for it in test:
            a = recognizer.recognize(bank, it.obs)
            b = recognizer.recognize(loaded, it.obs)
            assert a.label == b.label
            for label in bank.labels:
                assert abs(a.scores[label] - b.scores[label]) <= 1e-12
