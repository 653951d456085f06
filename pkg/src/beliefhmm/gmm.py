"""Diagonal-covariance Gaussian mixtures and the observation BBAs built from them."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from . import tbm

log = logging.getLogger(__name__)

VAR_FLOOR = 1e-6
PL_FLOOR = 1e-12
LOG_2PI = np.log(2.0 * np.pi)


class GMMError(ValueError):
    pass


class CollapsedComponent(GMMError):
    """A mixture component lost all its responsibility even after re-seeding."""


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    variances: np.ndarray


@dataclass(frozen=True, eq=False)
class GMM:
    """Gaussian mixture with diagonal covariances.

    Components are stored in a standardized space ``z = (x - shift) / scale``;
    densities returned by :meth:`log_pdf` are in the original feature units.
    ``trace`` holds the per-iteration mean log-likelihood of the fit that
    produced the model (empty for hand-built models).
    """

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    shift: np.ndarray
    scale: np.ndarray
    trace: tuple = field(default=(), repr=False)

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        mu = np.atleast_2d(np.asarray(self.means, dtype=float))
        var = np.atleast_2d(np.asarray(self.variances, dtype=float))
        d = mu.shape[1]
        shift = np.zeros(d) if self.shift is None else np.asarray(self.shift, dtype=float).reshape(d)
        scale = np.ones(d) if self.scale is None else np.asarray(self.scale, dtype=float).reshape(d)
        if mu.shape != var.shape or w.shape != (mu.shape[0],):
            raise GMMError(f"inconsistent shapes: weights {w.shape}, means {mu.shape}, variances {var.shape}")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise GMMError("mixture weights must be non-negative and sum to 1")
        if np.any(var <= 0) or np.any(scale <= 0):
            raise GMMError("variances and scales must be positive")
        for name, arr in [("weights", w), ("means", mu), ("variances", var), ("shift", shift), ("scale", scale)]:
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @classmethod
    def single(cls, mean, variances) -> "GMM":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        return cls(np.ones(1), mean[None], np.broadcast_to(variances, mean.shape)[None], None, None)

    @property
    def n_components(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def components(self) -> list[Gaussian]:
        """Components expressed in the original feature units."""
        return [
            Gaussian(self.means[k] * self.scale + self.shift, self.variances[k] * self.scale**2)
            for k in range(self.n_components)
        ]

    def standardize(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.shift) / self.scale

    def _component_logpdf(self, z: np.ndarray) -> np.ndarray:
        # (T, M) log w_m N(z; mu_m, var_m) in standardized space
        diff = z[:, None, :] - self.means[None]
        quad = np.sum(diff**2 / self.variances[None], axis=-1)
        norm = np.sum(np.log(self.variances), axis=-1) + self.dim * LOG_2PI
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        return logw[None] - 0.5 * (quad + norm[None])

    def log_pdf(self, x) -> np.ndarray | float:
        """Log density at one D-vector (returns a float) or at T frames (returns T values)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x2 = np.atleast_2d(x)
        if x2.shape[-1] != self.dim:
            raise GMMError(f"dimension mismatch: model has D={self.dim}, input has {x2.shape[-1]}")
        z = self.standardize(x2)
        out = logsumexp(self._component_logpdf(z), axis=1) - np.sum(np.log(self.scale))
        return float(out[0]) if single else out


def _standardization(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    shift = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale < 1e-12] = 1.0
    return shift, scale


def _kmeans_pp(z: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    n = z.shape[0]
    centers = [z[rng.integers(n)]]
    for _ in range(1, m):
        d2 = np.min(((z[:, None, :] - np.asarray(centers)[None]) ** 2).sum(-1), axis=1)
        total = d2.sum()
        idx = rng.integers(n) if total <= 0 else rng.choice(n, p=d2 / total)
        centers.append(z[idx])
    return np.asarray(centers)


def _m_step(z, resp, old_means, old_vars, var_floor):
    nk = resp.sum(axis=0)
    weights = nk / nk.sum()
    means = old_means.copy()
    variances = old_vars.copy()
    live = nk > 0
    means[live] = (resp[:, live].T @ z) / nk[live, None]
    sq = resp[:, live].T @ (z**2) / nk[live, None] - means[live] ** 2
    variances[live] = np.maximum(sq, var_floor)
    return weights, means, variances, nk


def em_fit(
    data,
    n_components: int,
    seed: int = 0,
    *,
    max_iter: int = 200,
    tol: float = 1e-6,
    var_floor: float = VAR_FLOOR,
) -> GMM:
    """Fit a diagonal GMM by EM after per-dimension z-scoring.

    Initialization is k-means++ drawn from ``seed``; a component that loses
    all responsibility triggers one re-seed, then :class:`CollapsedComponent`.
    Stops when the mean per-sample log-likelihood improves by less than
    ``tol`` or after ``max_iter`` iterations.
    """
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.shape[0] == 0:
        raise GMMError("cannot fit a GMM to empty data")
    if n_components < 1:
        raise GMMError("need at least one mixture component")
    if x.shape[0] < n_components:
        raise GMMError(f"{x.shape[0]} samples cannot support {n_components} components")
    shift, scale = _standardization(x)
    z = (x - shift) / scale
    rng = np.random.default_rng(seed)
    for attempt in range(2):
        try:
            return _em(z, n_components, rng, shift, scale, max_iter, tol, var_floor)
        except CollapsedComponent:
            if attempt:
                raise
            log.debug("GMM component collapsed; re-seeding")
    raise AssertionError("unreachable")


def _em(z, m, rng, shift, scale, max_iter, tol, var_floor) -> GMM:
    centers = _kmeans_pp(z, m, rng)
    var0 = np.maximum(z.var(axis=0), var_floor)
    g = GMM(np.full(m, 1.0 / m), centers, np.tile(var0, (m, 1)), shift, scale)
    trace = []
    prev = -np.inf
    for _ in range(max_iter):
        lp = g._component_logpdf(z)
        total = logsumexp(lp, axis=1)
        ll = float(total.mean())
        trace.append(ll)
        if ll - prev < tol:
            break
        prev = ll
        resp = np.exp(lp - total[:, None])
        weights, means, variances, nk = _m_step(z, resp, g.means, g.variances, var_floor)
        if np.any(nk < 1e-10):
            raise CollapsedComponent(f"component with responsibility {nk.min():.3g}")
        g = GMM(weights, means, variances, shift, scale)
    return GMM(g.weights, g.means, g.variances, shift, scale, tuple(trace))


def reestimate(g: GMM, data, occupancy, var_floor: float = VAR_FLOOR) -> GMM:
    """One weighted EM update of ``g`` keeping its standardization.

    ``occupancy[t]`` is the posterior weight of frame ``t`` for this state, as
    produced by the forward-backward pass. Components that receive no
    weight keep their previous parameters with weight zero.
    """
    x = np.atleast_2d(np.asarray(data, dtype=float))
    occ = np.asarray(occupancy, dtype=float)
    if occ.sum() <= 0:
        return g
    z = g.standardize(x)
    lp = g._component_logpdf(z)
    total = logsumexp(lp, axis=1)
    resp = np.exp(lp - total[:, None]) * occ[:, None]
    resp[~np.isfinite(resp)] = 0.0
    weights, means, variances, _ = _m_step(z, resp, g.means, g.variances, var_floor)
    return GMM(weights, means, variances, g.shift, g.scale)


# ---------------------------------------------------------------------------
# Observation BBAs

def state_log_likelihoods(gmms, x) -> np.ndarray:
    """``(T, N)`` log densities of each frame under each state's GMM."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.stack([g.log_pdf(x) for g in gmms], axis=1)


def relative_plausibilities(log_lik, pl_floor: float = PL_FLOOR) -> np.ndarray:
    """Max-normalized likelihoods ``pdf_i / max_j pdf_j`` floored at ``pl_floor``.

    Frames where every state density underflowed get plausibility 1 for
    every state, which yields the vacuous BBA.
    """
    ll = np.atleast_2d(np.asarray(log_lik, dtype=float))
    top = ll.max(axis=1, keepdims=True)
    dead = ~np.isfinite(top[:, 0])
    with np.errstate(invalid="ignore"):
        pl = np.exp(ll - top)
    pl[dead] = 1.0
    return np.clip(np.nan_to_num(pl, nan=0.0), pl_floor, 1.0)


def gbt_masses(pl) -> np.ndarray:
    """Masses ``m(A) = prod_{i in A} pl_i * prod_{i not in A} (1 - pl_i)`` for each row of ``pl``."""
    pl = np.atleast_2d(pl)
    m = np.ones((pl.shape[0], 1))
    for i in range(pl.shape[1]):
        p = pl[:, i:i + 1]
        m = np.concatenate([m * (1.0 - p), m * p], axis=1)
    return m


def gbt_commonalities(pl) -> np.ndarray:
    """Commonalities of :func:`gbt_masses`: ``q(A) = prod_{i in A} pl_i``."""
    pl = np.atleast_2d(pl)
    q = np.ones((pl.shape[0], 1))
    for i in range(pl.shape[1]):
        q = np.concatenate([q, q * pl[:, i:i + 1]], axis=1)
    return q


def observation_bba(gmms, x, frame: tbm.Frame | None = None, pl_floor: float = PL_FLOOR) -> tbm.BBA:
    """BBA over the hidden states given one observation vector."""
    if len(gmms) > 4:
        raise GMMError("observation BBAs are limited to N <= 4 states")
    frame = frame or tbm.Frame.of_size(len(gmms))
    x = np.asarray(x, dtype=float).reshape(1, -1)
    pl = relative_plausibilities(state_log_likelihoods(gmms, x), pl_floor)
    return tbm.BBA(frame, gbt_masses(pl)[0])


def observation_masses(gmms, obs, pl_floor: float = PL_FLOOR) -> np.ndarray:
    """``(T, 2**N)`` observation BBAs for a whole sequence."""
    return gbt_masses(relative_plausibilities(state_log_likelihoods(gmms, obs), pl_floor))
