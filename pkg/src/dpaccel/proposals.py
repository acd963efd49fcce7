"""Data-driven feature proposals with a Metropolis-Hastings correction.

New cluster parameters are proposed either from the prior or from an
empirical distribution over the observations themselves, weighted toward
the points that fit their current clusters worst (weights proportional to
the inverse likelihood). Draws from the prior are always accepted; draws
from the empirical component are corrected by an independence MH ratio
that treats the branch actually sampled as the proposal distribution, so
the kernel leaves the prior invariant. In accelerated mode the correction
is skipped and proposals are accepted unconditionally.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .likelihood import log_prior_density, sample_prior

logger = logging.getLogger(__name__)

__all__ = [
    "ProposalContext",
    "empirical_weights",
    "datapoint_to_theta",
    "propose",
    "log_mixture_density",
    "log_accept_ratio",
    "mh_step",
]

# Tolerance for deciding that a simplex point coincides with a smoothed,
# normalized data point (independently computed vectors rarely match bitwise).
ATOM_TOL = 1e-12

BRANCH_EMPIRICAL = "empirical"
BRANCH_PRIOR = "prior"


@dataclass
class ProposalContext:
    """Snapshot of the data visible to a proposer.

    ``x`` holds the shard's count vectors, ``row_log_coeff`` their log
    multinomial coefficients, and ``assigned_theta`` the parameter vector of
    each observation's current cluster (one row per observation, already
    resolved through the assignment vector).
    """

    x: np.ndarray                   # (n, D) int64
    row_log_coeff: np.ndarray       # (n,)
    assigned_theta: np.ndarray      # (n, D)
    rho: float
    gamma: float
    smoothing_eps: float
    _weights: np.ndarray | None = field(default=None, repr=False)
    _atoms: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def dim(self) -> int:
        return int(self.x.shape[1])

    def weights(self) -> np.ndarray:
        if self._weights is None:
            self._weights = empirical_weights(self)
        return self._weights

    def atoms(self) -> np.ndarray:
        """Smoothed, normalized data points: the support of the empirical branch."""
        if self._atoms is None:
            totals = self.x.sum(axis=1, keepdims=True)
            self._atoms = (self.x + self.smoothing_eps) / (
                totals + self.smoothing_eps * self.dim
            )
        return self._atoms


def datapoint_to_theta(x: np.ndarray, smoothing_eps: float) -> np.ndarray:
    """Map a count vector to the interior of the simplex.

    Returns (x + eps) / (total + eps * D); with eps = 0 this is plain
    normalization (and may sit on the boundary).
    """
    x = np.asarray(x, dtype=np.float64)
    total = x.sum()
    if total <= 0:
        raise ValueError("cannot normalize an all-zero count vector")
    return (x + smoothing_eps) / (total + smoothing_eps * x.shape[0])


def _assigned_log_liks(ctx: ProposalContext) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        lt = np.where(ctx.assigned_theta > 0.0, np.log(ctx.assigned_theta), -np.inf)
        contrib = np.where(ctx.x > 0, ctx.x * lt, 0.0)
    return ctx.row_log_coeff + contrib.sum(axis=1)


def empirical_weights(ctx: ProposalContext) -> np.ndarray:
    """Normalized weights proportional to the inverse likelihood of each point.

    Computed in log space; observations whose assigned cluster gives them a
    log likelihood of -inf are clamped to the largest finite negated value
    in the shard so that no NaN can be produced.
    """
    if ctx.n == 0:
        raise ValueError("empty context has no empirical weights")
    neg = -_assigned_log_liks(ctx)
    bad = ~np.isfinite(neg)
    if bad.any():
        logger.warning("clamping %d observation(s) with degenerate likelihood", int(bad.sum()))
        finite = neg[~bad]
        neg[bad] = finite.max() if finite.size else 0.0
    neg -= neg.max()
    w = np.exp(neg)
    return w / w.sum()


def _atom_weight(theta: np.ndarray, ctx: ProposalContext) -> float:
    """Summed empirical weight of all data atoms coinciding with ``theta``."""
    if ctx.n == 0:
        return 0.0
    match = np.abs(ctx.atoms() - theta).max(axis=1) <= ATOM_TOL
    if not match.any():
        return 0.0
    return float(ctx.weights()[match].sum())


def propose(ctx: ProposalContext, rng: np.random.Generator):
    """Draw a candidate parameter vector; returns (theta, branch).

    With probability ``rho`` an observation index is drawn from the
    empirical weights and its smoothed normalization returned; otherwise a
    fresh prior draw. An empty shard falls back to the prior branch.
    """
    if ctx.rho > 0.0 and ctx.n == 0:
        logger.warning("empty shard: falling back to prior proposal")
        return sample_prior(ctx.gamma, ctx.dim, rng), BRANCH_PRIOR
    if ctx.rho > 0.0 and rng.random() < ctx.rho:
        w = ctx.weights()
        i = int(np.searchsorted(np.cumsum(w), rng.random()))
        i = min(i, ctx.n - 1)
        return ctx.atoms()[i].copy(), BRANCH_EMPIRICAL
    return sample_prior(ctx.gamma, ctx.dim, rng), BRANCH_PRIOR


def log_mixture_density(theta: np.ndarray, ctx: ProposalContext) -> float:
    """Log density of the full proposal mixture at ``theta``.

    The mixture combines a continuous prior component with point masses at
    the smoothed data atoms; against the natural dominating measure the
    atom mass dominates wherever ``theta`` coincides with an atom, and only
    the continuous component contributes elsewhere.
    """
    theta = np.asarray(theta, dtype=np.float64)
    if ctx.rho > 0.0:
        w = _atom_weight(theta, ctx)
        if w > 0.0:
            return float(np.log(ctx.rho) + np.log(w))
    if ctx.rho < 1.0:
        return float(np.log1p(-ctx.rho) + log_prior_density(theta, ctx.gamma))
    return float("-inf")


def log_accept_ratio(
    theta_current: np.ndarray,
    theta_star: np.ndarray,
    branch: str,
    ctx: ProposalContext,
) -> float:
    """Log MH ratio for a move proposed from the given branch.

    The proposal density is that of the branch actually sampled: for prior
    proposals the ratio cancels to exactly 0.0 in log space; for empirical
    proposals it is prior(theta*) weight(current) / (prior(current)
    weight(theta*)), which is -inf whenever the current state carries no
    atom mass (a continuous point can never be reached by the empirical
    branch, so such moves are rejected).
    """
    if branch == BRANCH_PRIOR:
        return 0.0
    w_star = _atom_weight(theta_star, ctx)
    if w_star <= 0.0:
        raise ValueError("empirical proposal does not coincide with any data atom")
    w_cur = _atom_weight(theta_current, ctx)
    if w_cur <= 0.0:
        return float("-inf")
    return (log_prior_density(theta_star, ctx.gamma) - np.log(w_star)) + (
        np.log(w_cur) - log_prior_density(theta_current, ctx.gamma)
    )


def mh_step(
    theta_current: np.ndarray, ctx: ProposalContext, rng: np.random.Generator
):
    """One Metropolis-Hastings update of an uninstantiated feature location.

    Returns (theta_next, accepted). Prior-branch proposals are accepted
    unconditionally (the ratio is identically one); a non-finite ratio that
    is not a plain rejection is logged as a numerical incident and rejected.
    """
    theta_star, branch = propose(ctx, rng)
    if branch == BRANCH_PRIOR:
        return theta_star, True
    lb = log_accept_ratio(theta_current, theta_star, branch, ctx)
    if np.isnan(lb) or lb == float("inf"):
        logger.warning("non-finite MH log ratio (%r): rejecting proposal", lb)
        return theta_current, False
    if lb >= 0.0:
        return theta_star, True
    u = rng.random()
    if u > 0.0 and np.log(u) < lb:
        return theta_star, True
    return theta_current, False
