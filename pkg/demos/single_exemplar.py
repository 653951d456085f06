"""Training on one exemplar per class: belief HMMs against probabilistic HMMs."""

# %% A synthetic vocabulary of seven words, fifteen utterances each
from beliefhmm import benchmark, recognizer
from beliefhmm.corpus import SyntheticSpec, synth_corpus

corpus = synth_corpus(SyntheticSpec())
print(f"{len(corpus)} utterances, {len(corpus.labels)} classes, {corpus.dim}-dimensional frames")

# %% Keep one utterance per class for training, test on the other fourteen
train, test = benchmark.split(corpus, count=1, seed=0)
banks = {kind: recognizer.train_bank(train, kind) for kind in recognizer.KINDS}
for kind, bank in banks.items():
    print(f"{kind:6s} rate {recognizer.evaluate(bank, test).rate:.3f}")

# %% Scores for a single query
# Probabilistic scores are log-likelihoods; belief scores are mean log
# non-conflict, so 0 would mean no conflict at all.
query = test[0]
for kind, bank in banks.items():
    res = recognizer.recognize(bank, query.obs)
    ranked = sorted(res.scores.items(), key=lambda kv: -kv[1])[:3]
    print(kind, query.label, "->", res.label, [(l, round(s, 2)) for l, s in ranked])

# %% Rate against the number of training exemplars (three split seeds)
rows = benchmark.run(corpus, counts=[1, 2, 4, 8], seeds=range(3))
for (kind, count), rate in sorted(benchmark.mean_rates(rows).items()):
    print(f"{kind:6s} count {count:2d}  {rate:.3f}")
