"""Core value types shared across the samplers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import gammaln

# Cluster status codes. GLOBAL clusters are instantiated everywhere, NEW
# clusters exist on a single worker since the last synchronization, EMPTY
# rows are unoccupied auxiliary slots.
STATUS_GLOBAL = 0
STATUS_NEW = 1
STATUS_EMPTY = 2


class CountDataset:
    """A matrix of non-negative integer count vectors, one row per observation.

    Parameters
    ----------
    counts : array-like, shape (N, D)
        Non-negative integers; every row must have a positive total.
    ids : array-like of int, optional
        Stable observation identifiers; defaults to 0..N-1.
    """

    def __init__(self, counts, ids=None):
        x = np.asarray(counts)
        if x.ndim != 2:
            raise ValueError("counts must be a 2-d array (observations x dimensions)")
        if x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("counts must be non-empty with dimension >= 1")
        if not np.issubdtype(x.dtype, np.integer):
            if not np.all(np.equal(np.mod(x, 1), 0)):
                raise ValueError("counts must be integers")
        x = x.astype(np.int64)
        if np.any(x < 0):
            bad = int(np.argmax(np.any(x < 0, axis=1)))
            raise ValueError(f"negative count at row {bad}")
        totals = x.sum(axis=1)
        if np.any(totals < 1):
            bad = int(np.argmax(totals < 1))
            raise ValueError(f"all-zero count vector at row {bad}")
        self.x = x
        self.ids = np.arange(x.shape[0], dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64)
        if self.ids.shape[0] != x.shape[0]:
            raise ValueError("ids length must match number of rows")
        self._log_coeff = None

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    @property
    def row_log_coeff(self) -> np.ndarray:
        """Per-row log multinomial coefficient, cached."""
        if self._log_coeff is None:
            self._log_coeff = np.asarray(
                gammaln(self.x.sum(axis=1) + 1) - gammaln(self.x + 1).sum(axis=1)
            )
        return self._log_coeff

    def __len__(self) -> int:
        return self.n

    def __repr__(self) -> str:
        return f"CountDataset(n={self.n}, dim={self.dim})"


@dataclass
class ModelConfig:
    """Scalar hyperparameters and schedule for a sampler run.

    ``alpha`` is the DP concentration, ``gamma`` the symmetric Dirichlet
    parameter of the base measure, ``m`` the number of auxiliary feature
    slots, ``rho`` the probability of proposing a new feature from the data
    rather than the prior, ``sync_interval`` the number of sweeps between
    global synchronizations, and ``accel_iters`` the number of initial
    sweeps run with auto-accepted data-driven proposals and local counts.
    """

    alpha: float = 1.0
    gamma: float = 1.0
    m: int = 3
    rho: float = 0.9
    sync_interval: int = 10
    n_workers: int = 1
    accel_iters: int = 50
    total_iters: int = 1000
    seed: int = 0
    smoothing_eps: float = 1e-6
    resample_alpha: bool = False
    alpha_prior_shape: float = 1.0
    alpha_prior_rate: float = 1.0
    init: str = "single"

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be > 0")
        if self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        if self.m < 1:
            raise ValueError("m must be >= 1")
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.sync_interval < 1:
            raise ValueError("sync_interval must be >= 1")
        if self.n_workers < 1:
            raise ValueError("n_workers must be >= 1")
        if self.total_iters < 0:
            raise ValueError("total_iters must be >= 0")
        if not 0 <= self.accel_iters <= self.total_iters:
            raise ValueError("accel_iters must lie in [0, total_iters]")
        if self.smoothing_eps <= 0:
            raise ValueError("smoothing_eps must be > 0")
        if self.init not in ("single", "random", "kmeans"):
            raise ValueError("init must be one of single/random/kmeans")


@dataclass
class ClusterState:
    """Read-only view of one mixture component."""

    id: int
    theta: np.ndarray
    count: int
    suffstats: np.ndarray
    status: int


@dataclass
class GlobalState:
    """Master copy of the instantiated feature pool.

    ``pi`` has one entry per cluster plus a trailing remainder mass for
    yet-unseen clusters; ``proposer`` is the worker allowed to create new
    features during the exact stage.
    """

    ids: np.ndarray                 # (K,) int64
    theta: np.ndarray               # (K, D) float64, rows on the simplex
    counts: np.ndarray              # (K,) int64
    suffstats: np.ndarray           # (K, D) int64
    pi: np.ndarray                  # (K + 1,) float64
    alpha: float
    proposer: int = 0
    next_id: int = 0

    @property
    def k(self) -> int:
        return int(self.ids.shape[0])

    @property
    def clusters(self) -> Iterator[ClusterState]:
        for j in range(self.k):
            yield ClusterState(
                id=int(self.ids[j]),
                theta=self.theta[j],
                count=int(self.counts[j]),
                suffstats=self.suffstats[j],
                status=STATUS_GLOBAL,
            )


@dataclass
class StateView:
    """Per-iteration snapshot handed to metrics sinks.

    ``assignments`` maps each training observation (by dataset order) to a
    cluster id. Arrays are copies; sinks may keep them.
    """

    cluster_ids: np.ndarray
    counts: np.ndarray
    thetas: np.ndarray
    alpha: float
    assignments: np.ndarray
    stage: str


def simplex_ok(theta: np.ndarray, tol: float = 1e-9) -> bool:
    """True when every row of ``theta`` is a probability vector within tol."""
    t = np.atleast_2d(theta)
    return bool(np.all(t >= 0) and np.all(np.abs(t.sum(axis=1) - 1.0) <= tol))
