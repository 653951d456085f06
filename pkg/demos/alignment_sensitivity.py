"""How much the belief recognizer depends on equal-length state segments.

Belief models are initialized by cutting the single training sequence into
equal chunks and are never re-aligned. When the true state durations vary,
the chunks straddle state boundaries and the models degrade.
"""

# %%
from beliefhmm import benchmark
from beliefhmm.corpus import SyntheticSpec, synth_corpus

for jitter in (0.0, 0.1, 0.3, 1.0):
    corpus = synth_corpus(SyntheticSpec(duration_jitter=jitter))
    rates = benchmark.mean_rates(benchmark.run(corpus, counts=[1], seeds=range(3)))
    print(f"duration jitter {jitter:.1f}: belief {rates['belief', 1]:.3f}  prob {rates['prob', 1]:.3f}")
