"""Belief functions on a small frame: encodings, pooling and conflict."""

# %% A frame of three hypotheses and a mass function over its subsets
import numpy as np

from beliefhmm import tbm

frame = tbm.Frame(("rain", "sun", "snow"))
m = tbm.BBA.from_dict(frame, {("rain",): 0.5, ("rain", "snow"): 0.3, ("rain", "sun", "snow"): 0.2})
print("focal sets:", m.focal_sets())

# %% The same evidence seen as belief, plausibility and commonality
for name, f in [("bel", m.bel()), ("pl", m.pl()), ("q", m.q())]:
    print(name, np.round(f, 3))

# Each encoding is invertible; recovering the masses is exact up to rounding.
print("max round-trip error:", np.max(np.abs(tbm.m_from_q(m.q(), frame).masses - m.masses)))

# %% Pooling two independent sources
other = tbm.BBA.from_dict(frame, {("sun",): 0.6, ("rain", "sun", "snow"): 0.4})
pooled = m & other
print("pooled:", pooled.focal_sets())
print("conflict (mass on the empty set):", round(pooled.conflict, 3))

# The commonality route gives the same answer with a pointwise product.
print("paths agree:", np.allclose(pooled.masses, tbm.conjunctive_combine_via_q(m, other).masses))

# %% Normalizing redistributes the conflict over the non-empty subsets
print("normalized:", tbm.normalize(pooled).focal_sets())
