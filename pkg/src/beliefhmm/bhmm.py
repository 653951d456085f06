"""Belief (credal) hidden Markov models under the Transferable Belief Model.

A :class:`BeliefHmm` holds a prior BBA over the states, one conditional
transition BBA per non-empty subset of states, and a GMM per state from
which observation BBAs are derived.  Scoring uses the credal forward
recursion and the conflict metric: the time-average of
``log(1 - conflict)`` where the conflict is the empty-set mass produced at
each step before the forward BBA is renormalized.

Lattice arrays follow :mod:`beliefhmm.tbm`: the last axis is indexed by
subset bitmasks of the state frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from . import gmm as gmm_mod
from . import phmm, tbm
from .gmm import GMM

MAX_STATES = 4
TOTAL_CONFLICT_KEEP = 1e-300


class BeliefHmmError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class BeliefHmm:
    prior: tbm.BBA
    transitions: tbm.ConditionalBBA
    emissions: tuple[GMM, ...]
    pl_floor: float = gmm_mod.PL_FLOOR
    trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        n = self.prior.frame.size
        if n > MAX_STATES:
            raise BeliefHmmError(f"belief HMMs are limited to {MAX_STATES} states")
        if self.transitions.source != self.prior.frame or self.transitions.target != self.prior.frame:
            raise BeliefHmmError("transition frames must match the prior frame")
        if len(self.emissions) != n:
            raise BeliefHmmError(f"need {n} emission GMMs, got {len(self.emissions)}")
        if len({g.dim for g in self.emissions}) != 1:
            raise BeliefHmmError("emission GMMs disagree on feature dimension")
        object.__setattr__(self, "emissions", tuple(self.emissions))

    @property
    def frame(self) -> tbm.Frame:
        return self.prior.frame

    @property
    def n_states(self) -> int:
        return self.frame.size

    @property
    def dim(self) -> int:
        return self.emissions[0].dim

    @cached_property
    def transition_q(self) -> np.ndarray:
        return tbm.superset_sum(self.transitions.table)

    def observation_masses(self, obs) -> np.ndarray:
        obs = np.atleast_2d(np.asarray(obs, dtype=float))
        if obs.shape[1] != self.dim:
            raise BeliefHmmError(f"observation dimension {obs.shape[1]} != model dimension {self.dim}")
        return gmm_mod.observation_masses(self.emissions, obs, self.pl_floor)

    def observation_bbas(self, obs) -> list[tbm.BBA]:
        return [tbm.BBA(self.frame, m) for m in self.observation_masses(obs)]


@dataclass(frozen=True, eq=False)
class CredalForwardResult:
    """Per-step output of the credal forward recursion.

    ``combined[t]`` is the unnormalized BBA after combining the prediction
    with observation ``t``; ``masses[t]`` is its normalized version that is
    propagated (vacuous after a total conflict); ``conflict[t]`` is
    ``combined[t][emptyset]`` and ``log_keep[t] = log(1 - conflict[t])``
    computed from the non-empty masses so it stays accurate near 1.
    """

    combined: np.ndarray
    masses: np.ndarray
    conflict: np.ndarray
    log_keep: np.ndarray

    @property
    def conflict_metric(self) -> float:
        return float(np.mean(self.log_keep))


# ---------------------------------------------------------------------------
# Array-level recursions

def _mobius_matrix(n_subsets: int) -> np.ndarray:
    # m = q @ M inverts the superset zeta transform
    return tbm.superset_mobius(np.eye(n_subsets))


def forward_pass(prior, transitions, obs_masses) -> CredalForwardResult:
    """Credal forward recursion on explicit lattice arrays.

    ``prior`` is a mass vector, ``transitions`` a ``(2**N, 2**N)`` table of
    conditional mass vectors (row = conditioning subset) and ``obs_masses``
    the ``(T, 2**N)`` observation BBAs.  The prediction for step ``t+1`` is
    the mixture ``sum_S m_t(S) q_a[S]`` of conditional commonalities,
    multiplied pointwise by the observation commonality.
    """
    prior = np.asarray(prior, dtype=float)
    obs_q = tbm.superset_sum(np.atleast_2d(obs_masses))
    trans_q = tbm.superset_sum(np.asarray(transitions, dtype=float))
    T, size = obs_q.shape
    mob = _mobius_matrix(size)
    vacuous = np.zeros(size)
    vacuous[-1] = 1.0
    combined = np.zeros((T, size))
    masses = np.zeros((T, size))
    conflict = np.zeros(T)
    log_keep = np.zeros(T)
    q = tbm.superset_sum(prior) * obs_q[0]
    for t in range(T):
        m = np.maximum(q @ mob, 0.0)
        keep = m[1:].sum()
        combined[t] = m
        if keep <= TOTAL_CONFLICT_KEEP:
            conflict[t] = 1.0
            log_keep[t] = -math.inf
            masses[t] = vacuous
        else:
            conflict[t] = min(m[0], 1.0)
            log_keep[t] = math.log(keep)
            masses[t, 1:] = m[1:] / keep
        if t + 1 < T:
            q = (masses[t] @ trans_q) * obs_q[t + 1]
    return CredalForwardResult(combined, masses, conflict, log_keep)


def backward_pass(transitions, obs_masses) -> np.ndarray:
    """Credal backward recursion, from a vacuous BBA at the last step.

    At each step the backward BBA of ``t+1`` is combined with observation
    ``t+1`` and normalized; the plausibility of each state ``i`` at ``t`` is
    the expectation, under that BBA, of the conditional plausibility
    ``pl_a[{i}]``, and the step-``t`` BBA is rebuilt from these singleton
    plausibilities with the GBT product form.
    """
    obs = np.atleast_2d(np.asarray(obs_masses, dtype=float))
    table = np.asarray(transitions, dtype=float)
    T, size = obs.shape
    n = size.bit_length() - 1
    full = size - 1
    idx = np.arange(size)
    trans_pl = 1.0 - tbm.subset_sum(table)[:, full ^ idx]
    singleton_pl = trans_pl[[1 << i for i in range(n)]]  # (n, size): pl_a[{i}](C)
    mob = _mobius_matrix(size)
    vacuous = np.zeros(size)
    vacuous[-1] = 1.0
    beta = np.zeros((T, size))
    beta[-1] = vacuous
    for t in range(T - 2, -1, -1):
        m = np.maximum((tbm.superset_sum(beta[t + 1]) * tbm.superset_sum(obs[t + 1])) @ mob, 0.0)
        keep = m[1:].sum()
        if keep <= TOTAL_CONFLICT_KEEP:
            beta[t] = vacuous
            continue
        m[0] = 0.0
        m /= keep
        pl = np.clip(singleton_pl @ m, 0.0, 1.0)
        beta[t] = gmm_mod.gbt_masses(pl[None])[0]
    return beta


def singleton_plausibilities(masses) -> np.ndarray:
    """``pl({i})`` for every state, on the last axis of a stack of mass vectors."""
    masses = np.asarray(masses, dtype=float)
    n = masses.shape[-1].bit_length() - 1
    idx = np.arange(masses.shape[-1])
    return np.stack([masses[..., (idx >> i) & 1 == 1].sum(-1) for i in range(n)], axis=-1)


def decode_pass(prior, transitions, obs_masses) -> tuple[np.ndarray, float]:
    """Most plausible singleton state path and its log-plausibility.

    Maximizes ``pl_prior(s1) * prod pl_a[s_{t-1}](s_t) * prod pl_b_t(s_t)``
    by max-product dynamic programming; ties go to the lower state index.
    """
    table = np.asarray(transitions, dtype=float)
    n = table.shape[0].bit_length() - 1
    pl_prior = singleton_plausibilities(prior)
    pl_trans = singleton_plausibilities(table[[1 << i for i in range(n)]])
    with np.errstate(divide="ignore"):
        log_b = np.log(singleton_plausibilities(np.atleast_2d(obs_masses)))
    return phmm.viterbi_emissions(pl_trans, pl_prior, log_b)


def rectangle_joint(left_masses, right_masses) -> np.ndarray:
    """Average of ``outer(left[t], right[t])`` over ``t``, normalized to sum 1.

    Entry ``[B, C]`` is the mass of the product set ``B x C``: the conjunctive
    combination of the vacuous extensions of a BBA on the left factor and
    one on the right factor only has such rectangles as focal sets.
    """
    left = np.atleast_2d(left_masses)
    right = np.atleast_2d(right_masses)
    joint = left.T @ right / left.shape[0]
    total = joint.sum()
    if not total > 0:
        raise BeliefHmmError("joint transition BBA has no mass")
    return joint / total


def conditionals_from_rectangles(joint: np.ndarray) -> np.ndarray:
    """Condition a rectangle-supported joint BBA on every non-empty left subset.

    Row ``s`` of the result is the unnormalized TBM conditional on
    ``s x right`` marginalized on the right factor: rectangles ``B x C`` with
    ``B`` meeting ``s`` keep their mass on ``C``, all others go to the empty set.
    """
    size = joint.shape[0]
    subsets = np.arange(size)
    hit = (subsets[:, None] & subsets[None, :]) != 0  # hit[s, B]
    table = hit.astype(float) @ joint
    table[:, 0] += (~hit).astype(float) @ joint.sum(axis=1)
    table[0] = 0.0
    table[0, 0] = 1.0
    return table


def joint_bba(left: tbm.BBA, right: tbm.BBA) -> tbm.BBA:
    """Conjunctive combination of the vacuous extensions of two BBAs to ``left x right``."""
    return tbm.conjunctive_combine_via_q(
        tbm.vacuous_extend(left, right.frame, "left"),
        tbm.vacuous_extend(right, left.frame, "right"),
    )


# ---------------------------------------------------------------------------
# Model-level API

def credal_forward(model: BeliefHmm, obs) -> CredalForwardResult:
    return forward_pass(model.prior.masses, model.transitions.table, model.observation_masses(obs))


def conflict_metric(model: BeliefHmm, obs) -> float:
    """Time-averaged ``log(1 - conflict)``; 0 for no conflict, ``-inf`` after a total conflict."""
    return credal_forward(model, obs).conflict_metric


def credal_backward(model: BeliefHmm, obs) -> np.ndarray:
    return backward_pass(model.transitions.table, model.observation_masses(obs))


def decode_plausibility(model: BeliefHmm, obs) -> tuple[np.ndarray, float]:
    return decode_pass(model.prior.masses, model.transitions.table, model.observation_masses(obs))


def _as_mass_array(obs_bbas) -> np.ndarray:
    if isinstance(obs_bbas, np.ndarray):
        return np.atleast_2d(obs_bbas)
    return np.stack([b.masses for b in obs_bbas])


def estimate_transitions(obs_bbas, frame: tbm.Frame | None = None) -> tbm.ConditionalBBA:
    """Conditional transition BBAs from consecutive observation BBAs.

    Consecutive pairs are vacuously extended to the product frame, combined
    conjunctively, averaged over the ``T - 1`` pairs and normalized; the
    conditionals come from TBM conditioning of that joint.
    """
    m = _as_mass_array(obs_bbas)
    if m.shape[0] < 2:
        raise BeliefHmmError("need at least two observations to estimate transitions")
    n = m.shape[1].bit_length() - 1
    if n > MAX_STATES:
        raise BeliefHmmError(f"belief HMMs are limited to {MAX_STATES} states")
    frame = frame or tbm.Frame.of_size(n)
    table = conditionals_from_rectangles(rectangle_joint(m[:-1], m[1:]))
    return tbm.ConditionalBBA(frame, frame, table)


def its_refine(model: BeliefHmm, obs, tol: float = 1e-4, max_iter: int = 20) -> BeliefHmm:
    """Iterative transition specialization.

    Each round re-estimates the joint transition BBA with the left operand
    of every consecutive pair replaced by the current forward BBA, then
    rescores.  Stops once the conflict metric changes by less than ``tol``;
    the best-scoring model seen (the input included) is returned, with the
    metric history in ``trace``.
    """
    obs_m = model.observation_masses(obs)
    if obs_m.shape[0] < 2:
        return model
    fwd = forward_pass(model.prior.masses, model.transitions.table, obs_m)
    best, best_lc = model, fwd.conflict_metric
    prev = best_lc
    history = [best_lc]
    current = model
    for it in range(max_iter):
        table = conditionals_from_rectangles(rectangle_joint(fwd.masses[:-1], obs_m[1:]))
        cand = replace(current, transitions=tbm.ConditionalBBA(model.frame, model.frame, table), trace=())
        fwd = forward_pass(cand.prior.masses, table, obs_m)
        lc = fwd.conflict_metric
        history.append(lc)
        if it == 0 and abs(lc - prev) < tol:
            return model
        if lc > best_lc:
            best, best_lc = cand, lc
        if abs(lc - prev) < tol or not np.isfinite(lc):
            break
        prev, current = lc, cand
    return replace(best, trace=tuple(history))


def train_belief_model(obs, n_states: int = 3, n_mix: int = 2, seed: int = 0, *,
                       its: bool = True, tol: float = 1e-4, max_iter: int = 20,
                       pl_floor: float = gmm_mod.PL_FLOOR) -> BeliefHmm:
    """Belief HMM from a single observation sequence.

    Flat start: the sequence is cut into ``n_states`` equal chunks, one GMM
    is fitted per chunk, transitions are estimated from the resulting
    observation BBAs and refined by :func:`its_refine`.  The prior is vacuous.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=float))
    if n_states > MAX_STATES:
        raise BeliefHmmError(f"belief HMMs are limited to {MAX_STATES} states")
    if len(obs) < n_states:
        raise BeliefHmmError(f"sequence of {len(obs)} frames is shorter than {n_states} states")
    emissions = phmm.fit_state_gmms([obs], n_states, n_mix, seed)
    frame = tbm.Frame.of_size(n_states)
    obs_m = gmm_mod.observation_masses(emissions, obs, pl_floor)
    if len(obs) >= 2:
        transitions = estimate_transitions(obs_m, frame)
    else:
        transitions = tbm.ConditionalBBA.vacuous(frame, frame)
    model = BeliefHmm(tbm.BBA.vacuous(frame), transitions, emissions, pl_floor)
    if its:
        model = its_refine(model, obs, tol=tol, max_iter=max_iter)
    return model
