"""Transferable Belief Model on finite frames.

Subsets of a frame with ``N`` elements are encoded as bitmasks in
``[0, 2**N)`` (bit ``i`` set means element ``i`` is in the subset), and a
basic belief assignment is a dense vector of ``2**N`` masses indexed by
those bitmasks.  Mass on the empty set (index 0) is allowed: it is the
conflict produced by unnormalized conjunctive combination.

All transforms between mass, belief, plausibility and commonality run as
fast zeta/Moebius transforms in ``O(N * 2**N)`` and accept arrays with
leading batch dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MAX_FRAME_SIZE = 16
MASS_TOL = 1e-9
CONFLICT_TOL = 1e-12


class FrameError(ValueError):
    """Frame construction or frame compatibility problem."""


class InvalidBBA(ValueError):
    """Mass vector violating the BBA invariants."""


class TotalConflict(ArithmeticError):
    """Raised when normalizing a BBA whose whole mass sits on the empty set."""


# ---------------------------------------------------------------------------
# Frames

@dataclass(frozen=True)
class Frame:
    """Ordered frame of discernment.

    ``factors`` is set only for product frames built by :func:`product_frame`;
    pair element ``(i, j)`` then has index ``i * len(right) + j``.
    """

    labels: tuple[str, ...]
    factors: tuple["Frame", "Frame"] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        labels = tuple(str(l) for l in self.labels)
        object.__setattr__(self, "labels", labels)
        if not 1 <= len(labels) <= MAX_FRAME_SIZE:
            raise FrameError(f"frame size must be in [1, {MAX_FRAME_SIZE}], got {len(labels)}")
        if any(not l for l in labels):
            raise FrameError("frame labels must be non-empty")
        if len(set(labels)) != len(labels):
            raise FrameError(f"duplicate frame labels: {labels}")

    @classmethod
    def of_size(cls, n: int, prefix: str = "s") -> "Frame":
        return cls(tuple(f"{prefix}{i + 1}" for i in range(n)))

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def n_subsets(self) -> int:
        return 1 << len(self.labels)

    @property
    def full(self) -> int:
        return self.n_subsets - 1

    def subset(self, items: Iterable[str | int]) -> int:
        """Bitmask for a collection of labels or element indices."""
        mask = 0
        for it in items:
            if isinstance(it, (int, np.integer)):
                if not 0 <= it < self.size:
                    raise FrameError(f"element index {it} out of range")
                mask |= 1 << int(it)
            else:
                try:
                    mask |= 1 << self.labels.index(it)
                except ValueError:
                    raise FrameError(f"unknown label {it!r}") from None
        return mask

    def elements(self, mask: int) -> tuple[str, ...]:
        return tuple(l for i, l in enumerate(self.labels) if mask >> i & 1)


def product_frame(left: Frame, right: Frame) -> Frame:
    """Cartesian product frame ``left x right``."""
    if left.size * right.size > MAX_FRAME_SIZE:
        raise FrameError(
            f"product frame of {left.size}x{right.size} elements exceeds the "
            f"{MAX_FRAME_SIZE}-element lattice cap"
        )
    labels = tuple(f"({a},{b})" for a in left.labels for b in right.labels)
    return Frame(labels, factors=(left, right))


# ---------------------------------------------------------------------------
# Fast lattice transforms (last axis is the subset axis)

def _n_bits(v: np.ndarray) -> int:
    size = v.shape[-1]
    n = size.bit_length() - 1
    if size != 1 << n:
        raise FrameError(f"lattice vector length {size} is not a power of two")
    return n


def _butterfly(v, sign: float, upward: bool) -> np.ndarray:
    out = np.array(v, dtype=float, copy=True)
    n = _n_bits(out)
    batch = out.shape[:-1]
    for i in range(n):
        w = out.reshape(*batch, -1, 2, 1 << i)
        if upward:
            w[..., 0, :] += sign * w[..., 1, :]
        else:
            w[..., 1, :] += sign * w[..., 0, :]
    return out


def subset_sum(v) -> np.ndarray:
    """``f(A) = sum_{B subset of A} v(B)`` (zeta transform over subsets)."""
    return _butterfly(v, 1.0, upward=False)


def subset_mobius(f) -> np.ndarray:
    """Inverse of :func:`subset_sum`."""
    return _butterfly(f, -1.0, upward=False)


def superset_sum(v) -> np.ndarray:
    """``f(A) = sum_{B superset of A} v(B)`` (zeta transform over supersets)."""
    return _butterfly(v, 1.0, upward=True)


def superset_mobius(f) -> np.ndarray:
    """Inverse of :func:`superset_sum`."""
    return _butterfly(f, -1.0, upward=True)


def popcount(n_bits: int) -> np.ndarray:
    """Cardinality of every subset of an ``n_bits`` frame."""
    idx = np.arange(1 << n_bits)
    return np.array([bin(i).count("1") for i in idx], dtype=int)


# ---------------------------------------------------------------------------
# BBAs

def _as_frame(frame: Frame | int) -> Frame:
    return frame if isinstance(frame, Frame) else Frame.of_size(int(frame))


@dataclass(frozen=True, eq=False)
class BBA:
    """Basic belief assignment on ``frame``; immutable after construction."""

    frame: Frame
    masses: np.ndarray

    def __post_init__(self):
        frame = _as_frame(self.frame)
        object.__setattr__(self, "frame", frame)
        m = np.array(self.masses, dtype=float).reshape(-1)
        if m.shape[0] != frame.n_subsets:
            raise InvalidBBA(f"expected {frame.n_subsets} masses, got {m.shape[0]}")
        if not np.all(np.isfinite(m)):
            raise InvalidBBA("masses must be finite")
        if m.min() < -MASS_TOL:
            raise InvalidBBA(f"negative mass {m.min():.3g}")
        total = m.sum()
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidBBA(f"masses sum to {total!r}, not 1")
        m = np.clip(m, 0.0, None)
        m.flags.writeable = False
        object.__setattr__(self, "masses", m)

    @classmethod
    def vacuous(cls, frame: Frame | int) -> "BBA":
        frame = _as_frame(frame)
        m = np.zeros(frame.n_subsets)
        m[frame.full] = 1.0
        return cls(frame, m)

    @classmethod
    def categorical(cls, frame: Frame | int, subset: int | Iterable[str | int]) -> "BBA":
        frame = _as_frame(frame)
        mask = subset if isinstance(subset, (int, np.integer)) else frame.subset(subset)
        m = np.zeros(frame.n_subsets)
        m[int(mask)] = 1.0
        return cls(frame, m)

    @classmethod
    def from_dict(cls, frame: Frame | int, focal: Mapping) -> "BBA":
        """Build from ``{subset: mass}`` where subset is a bitmask or an iterable of labels."""
        frame = _as_frame(frame)
        m = np.zeros(frame.n_subsets)
        for key, value in focal.items():
            mask = key if isinstance(key, (int, np.integer)) else frame.subset(key)
            m[int(mask)] += value
        return cls(frame, m)

    @property
    def conflict(self) -> float:
        return float(self.masses[0])

    def __getitem__(self, subset) -> float:
        mask = subset if isinstance(subset, (int, np.integer)) else self.frame.subset(subset)
        return float(self.masses[int(mask)])

    def focal_sets(self) -> dict[tuple[str, ...], float]:
        return {self.frame.elements(i): float(v) for i, v in enumerate(self.masses) if v > 0}

    def is_bayesian(self) -> bool:
        singletons = [1 << i for i in range(self.frame.size)]
        return bool(np.isclose(self.masses[singletons].sum(), 1.0, atol=MASS_TOL))

    def bel(self) -> np.ndarray:
        return bel_from_m(self)

    def pl(self) -> np.ndarray:
        return pl_from_m(self)

    def q(self) -> np.ndarray:
        return q_from_m(self)

    def __and__(self, other: "BBA") -> "BBA":
        return conjunctive_combine(self, other)

    def __repr__(self):
        inner = ", ".join(
            "{" + ",".join(k) + "}: " + f"{v:.6g}" for k, v in self.focal_sets().items()
        )
        return f"BBA({inner})"


@dataclass(frozen=True, eq=False)
class ConditionalBBA:
    """Family of BBAs on ``target`` indexed by non-empty subsets of ``source``.

    ``table[s]`` is the BBA given subset ``s``; row 0 is unused and kept as the
    categorical empty-set BBA so the table stays a valid stack of mass vectors.
    """

    source: Frame
    target: Frame
    table: np.ndarray

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.shape != (self.source.n_subsets, self.target.n_subsets):
            raise InvalidBBA(
                f"conditional table must be {self.source.n_subsets}x{self.target.n_subsets}, got {t.shape}"
            )
        t[0] = 0.0
        t[0, 0] = 1.0
        _check_mass_rows(t)
        t = np.clip(t, 0.0, None)
        t.flags.writeable = False
        object.__setattr__(self, "table", t)

    def __getitem__(self, subset) -> BBA:
        mask = subset if isinstance(subset, (int, np.integer)) else self.source.subset(subset)
        if mask == 0:
            raise FrameError("conditional BBAs are defined for non-empty subsets only")
        return BBA(self.target, self.table[int(mask)])

    @classmethod
    def vacuous(cls, source: Frame, target: Frame) -> "ConditionalBBA":
        t = np.zeros((source.n_subsets, target.n_subsets))
        t[:, target.full] = 1.0
        return cls(source, target, t)


def _check_mass_rows(m: np.ndarray) -> None:
    if not np.all(np.isfinite(m)):
        raise InvalidBBA("masses must be finite")
    if m.size and m.min() < -MASS_TOL:
        raise InvalidBBA(f"negative mass {m.min():.3g}")
    bad = np.abs(m.sum(axis=-1) - 1.0) > MASS_TOL
    if np.any(bad):
        raise InvalidBBA("mass rows must sum to 1")


def _same_frame(m1: BBA, m2: BBA) -> Frame:
    if m1.frame != m2.frame:
        raise FrameError(f"frame mismatch: {m1.frame.labels} vs {m2.frame.labels}")
    return m1.frame


def _recovered(frame: Frame, masses: np.ndarray, what: str) -> BBA:
    if masses.min() < -MASS_TOL:
        raise InvalidBBA(f"input is not a valid {what} function (recovered mass {masses.min():.3g})")
    return BBA(frame, masses)


# ---------------------------------------------------------------------------
# Conversions

def bel_from_m(m: BBA) -> np.ndarray:
    """Belief: total mass of the non-empty subsets of each ``A``."""
    bel = subset_sum(m.masses)
    return bel - m.masses[0]


def m_from_bel(bel, frame: Frame | int | None = None) -> BBA:
    """Moebius inversion of a belief function.

    ``bel`` carries no information about ``m(emptyset)``, which is restored
    from the sum-to-one constraint.
    """
    bel = np.asarray(bel, dtype=float)
    frame = _as_frame(frame if frame is not None else _n_bits(bel))
    masses = subset_mobius(bel)
    masses[0] = 1.0 - masses[1:].sum()
    return _recovered(frame, masses, "belief")


def pl_from_m(m: BBA) -> np.ndarray:
    """Plausibility: total mass of the subsets intersecting each ``A``."""
    implicability = subset_sum(m.masses)
    full = m.frame.full
    idx = np.arange(m.frame.n_subsets)
    return 1.0 - implicability[full ^ idx]


def m_from_pl(pl, frame: Frame | int | None = None) -> BBA:
    """Inverse plausibility transform.

    Evaluates ``m(A) = sum_{B subset A} (-1)^(|A|-|B|-1) pl(complement B)``
    for non-empty ``A``; the empty-set mass is ``1 - pl(frame)``.
    """
    pl = np.asarray(pl, dtype=float)
    frame = _as_frame(frame if frame is not None else _n_bits(pl))
    idx = np.arange(frame.n_subsets)
    masses = -subset_mobius(pl[frame.full ^ idx])
    masses[0] = 1.0 - pl[frame.full]
    return _recovered(frame, masses, "plausibility")


def q_from_m(m: BBA) -> np.ndarray:
    """Commonality: total mass of the supersets of each ``A``."""
    return superset_sum(m.masses)


def m_from_q(q, frame: Frame | int | None = None) -> BBA:
    q = np.asarray(q, dtype=float)
    frame = _as_frame(frame if frame is not None else _n_bits(q))
    return _recovered(frame, superset_mobius(q), "commonality")


# ---------------------------------------------------------------------------
# Combination

def conjunctive_combine(m1: BBA, m2: BBA) -> BBA:
    """Unnormalized conjunctive rule, by direct summation over focal-set pairs."""
    frame = _same_frame(m1, m2)
    a = np.flatnonzero(m1.masses)
    b = np.flatnonzero(m2.masses)
    inter = np.bitwise_and.outer(a, b).ravel()
    weights = np.multiply.outer(m1.masses[a], m2.masses[b]).ravel()
    out = np.bincount(inter, weights=weights, minlength=frame.n_subsets)
    return BBA(frame, out)


def conjunctive_combine_via_q(m1: BBA, m2: BBA) -> BBA:
    """Unnormalized conjunctive rule as a pointwise product of commonalities."""
    frame = _same_frame(m1, m2)
    q = superset_sum(m1.masses) * superset_sum(m2.masses)
    masses = np.clip(superset_mobius(q), 0.0, None)
    return BBA(frame, masses / masses.sum())


def combine_all(bbas: Sequence[BBA]) -> BBA:
    """Conjunctive combination of several BBAs (vacuous when empty is not allowed)."""
    if not bbas:
        raise ValueError("need at least one BBA")
    out = bbas[0]
    for m in bbas[1:]:
        out = conjunctive_combine(out, m)
    return out


def normalize(m: BBA) -> BBA:
    """Dempster normalization: redistribute the conflict proportionally."""
    k = m.masses[0]
    if k >= 1.0 - CONFLICT_TOL:
        raise TotalConflict(f"cannot normalize: conflict mass {k!r}")
    out = m.masses.copy()
    out[0] = 0.0
    return BBA(m.frame, out / out.sum())


# ---------------------------------------------------------------------------
# Product frames

def _cylinder_masks(left: Frame, right: Frame) -> tuple[np.ndarray, np.ndarray]:
    """Product-frame bitmask of ``{i} x right`` and of ``left x {j}``."""
    nr = right.size
    row = np.array([((1 << nr) - 1) << (i * nr) for i in range(left.size)], dtype=np.int64)
    col = np.array(
        [sum(1 << (i * nr + j) for i in range(left.size)) for j in range(nr)], dtype=np.int64
    )
    return row, col


def _expand(masks_per_bit: np.ndarray, n_bits: int) -> np.ndarray:
    """Union of ``masks_per_bit[i]`` over the set bits ``i`` of every subset."""
    out = np.zeros(1 << n_bits, dtype=np.int64)
    for i in range(n_bits):
        half = 1 << i
        out[half: 2 * half] = out[:half] | masks_per_bit[i]
    return out


def cylinder(joint: Frame, subset: int, side: str) -> int:
    """Product-frame mask of ``subset x right`` (side='left') or ``left x subset``."""
    left, right = _factors(joint)
    row, col = _cylinder_masks(left, right)
    if side == "left":
        return int(_expand(row, left.size)[subset])
    if side == "right":
        return int(_expand(col, right.size)[subset])
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def _factors(joint: Frame) -> tuple[Frame, Frame]:
    if joint.factors is None:
        raise FrameError("not a product frame")
    return joint.factors


def vacuous_extend(m: BBA, other: Frame, side: str = "left") -> BBA:
    """Vacuous extension of ``m`` to a product frame.

    With ``side='left'`` the result lives on ``m.frame x other`` and ``m(B)`` is
    moved to ``B x other``; with ``side='right'`` it lives on ``other x m.frame``
    and ``m(B)`` is moved to ``other x B``.
    """
    if side == "left":
        joint = product_frame(m.frame, other)
        row, _ = _cylinder_masks(m.frame, other)
        target = _expand(row, m.frame.size)
    elif side == "right":
        joint = product_frame(other, m.frame)
        _, col = _cylinder_masks(other, m.frame)
        target = _expand(col, m.frame.size)
    else:
        raise ValueError(f"side must be 'left' or 'right', got {side!r}")
    out = np.zeros(joint.n_subsets)
    out[target] = m.masses
    return BBA(joint, out)


def projection(joint: Frame, onto: str) -> np.ndarray:
    """For every product-frame subset, the bitmask of its projection on one factor."""
    left, right = _factors(joint)
    row, col = _cylinder_masks(left, right)
    idx = np.arange(joint.n_subsets, dtype=np.int64)
    if onto == "left":
        parts = row
    elif onto == "right":
        parts = col
    else:
        raise ValueError(f"onto must be 'left' or 'right', got {onto!r}")
    out = np.zeros_like(idx)
    for k, part in enumerate(parts):
        out |= ((idx & part) != 0).astype(np.int64) << k
    return out


def marginalize(j: BBA, onto: str = "left") -> BBA:
    """Marginal of a joint BBA: each mass moves to the projection of its subset."""
    left, right = _factors(j.frame)
    target = left if onto == "left" else right
    proj = projection(j.frame, onto)
    out = np.bincount(proj, weights=j.masses, minlength=target.n_subsets)
    return BBA(target, out)


def condition_joint(j: BBA, s: int | Iterable[str | int]) -> BBA:
    """TBM conditioning of a joint BBA on ``s x right``, marginalized on the right factor.

    The result is left unnormalized: mass of joint focal sets that miss the
    cylinder ends up on the empty set.
    """
    left, right = _factors(j.frame)
    mask = s if isinstance(s, (int, np.integer)) else left.subset(s)
    if mask == 0:
        raise FrameError("conditioning set must be non-empty")
    cyl = cylinder(j.frame, int(mask), "left")
    idx = np.arange(j.frame.n_subsets, dtype=np.int64)
    conditioned = np.bincount(idx & cyl, weights=j.masses, minlength=j.frame.n_subsets)
    return marginalize(BBA(j.frame, conditioned), onto="right")


def conditional_from_joint(j: BBA) -> ConditionalBBA:
    """Condition a joint BBA on every non-empty subset of its left factor."""
    left, right = _factors(j.frame)
    table = np.zeros((left.n_subsets, right.n_subsets))
    for s in range(1, left.n_subsets):
        table[s] = condition_joint(j, s).masses
    return ConditionalBBA(left, right, table)
