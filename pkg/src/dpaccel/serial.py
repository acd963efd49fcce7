"""Single-process samplers over the full dataset.

The allocation sweep follows the auxiliary-slot scheme: alongside the
occupied clusters, ``m`` empty slots carry candidate parameters, an
observation joins an occupied cluster with probability proportional to
(count excluding itself) * likelihood, or an empty slot with probability
proportional to (alpha / m) * likelihood. A cluster emptied mid-sweep keeps
its parameter vector and becomes a reusable slot. After each sweep the
occupied parameters are redrawn from their conjugate posteriors and the
slot pool is normalized back to ``m`` and refreshed according to the
configured mode: fresh prior draws, Metropolis-corrected data-driven
proposals, or auto-accepted data-driven proposals.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .likelihood import sample_posterior_theta, sample_prior
from .proposals import ProposalContext, mh_step, propose
from .types import CountDataset, ModelConfig, StateView

__all__ = [
    "MODE_PRIOR",
    "MODE_EMPIRICAL_EXACT",
    "MODE_EMPIRICAL_AUTO",
    "SerialState",
    "init_serial_state",
    "gibbs_sweep_collapsed",
    "refresh_slots",
    "run_serial",
]

MODE_PRIOR = "prior"
MODE_EMPIRICAL_EXACT = "empirical-exact"
MODE_EMPIRICAL_AUTO = "empirical-auto"
_MODES = (MODE_PRIOR, MODE_EMPIRICAL_EXACT, MODE_EMPIRICAL_AUTO)


@dataclass
class SerialState:
    """Cluster pool plus assignments for a single-chain run.

    ``z[i]`` indexes a row of the pool arrays. Rows with ``occupied`` False
    are auxiliary slots (count 0).
    """

    dataset: CountDataset
    z: np.ndarray            # (N,) int64 row index
    ids: np.ndarray          # (K,) int64 stable cluster ids
    theta: np.ndarray        # (K, D)
    counts: np.ndarray       # (K,) int64
    suffstats: np.ndarray    # (K, D) int64
    occupied: np.ndarray     # (K,) bool
    next_id: int

    def check_consistency(self):
        """Assert exact agreement of counts and suffstats with assignments."""
        n, k = self.dataset.n, self.ids.shape[0]
        counts = np.bincount(self.z, minlength=k)
        assert np.array_equal(counts, self.counts), "counts drifted from assignments"
        assert self.counts.sum() == n, "observations not conserved"
        suff = np.zeros_like(self.suffstats)
        np.add.at(suff, self.z, self.dataset.x)
        assert np.array_equal(suff, self.suffstats), "suffstats drifted"
        assert np.array_equal(self.occupied, self.counts > 0), "occupancy flags stale"

    def n_slots(self) -> int:
        return int((~self.occupied).sum())

    def view(self, stage: str = "serial") -> StateView:
        occ = self.occupied
        return StateView(
            cluster_ids=self.ids[occ].copy(),
            counts=self.counts[occ].copy(),
            thetas=self.theta[occ].copy(),
            alpha=0.0,
            assignments=self.ids[self.z].copy(),
            stage=stage,
        )


def _initial_assignments(dataset: CountDataset, config: ModelConfig, rng) -> np.ndarray:
    if config.init == "single":
        return np.zeros(dataset.n, dtype=np.int64)
    k = min(100, dataset.n)
    if config.init == "random":
        z = rng.integers(0, k, size=dataset.n)
    else:  # kmeans on row-normalized counts
        from scipy.cluster.vq import kmeans2

        pts = dataset.x / dataset.x.sum(axis=1, keepdims=True)
        _, z = kmeans2(pts, k, minit="++", seed=rng)
        z = z.astype(np.int64)
    # compact labels so no initial cluster is empty
    uniq, z = np.unique(z, return_inverse=True)
    return z.astype(np.int64)


def init_serial_state(dataset: CountDataset, config: ModelConfig, rng) -> SerialState:
    """Build the initial state: assignments, posterior-drawn parameters, m slots."""
    z = _initial_assignments(dataset, config, rng)
    k = int(z.max()) + 1
    suff = np.zeros((k + config.m, dataset.dim), dtype=np.int64)
    np.add.at(suff[:k], z, dataset.x)
    counts = np.zeros(k + config.m, dtype=np.int64)
    counts[:k] = np.bincount(z, minlength=k)
    theta = np.empty((k + config.m, dataset.dim))
    for j in range(k):
        theta[j] = sample_posterior_theta(suff[j], config.gamma, rng)
    for j in range(k, k + config.m):
        theta[j] = sample_prior(config.gamma, dataset.dim, rng)
    occupied = np.zeros(k + config.m, dtype=bool)
    occupied[:k] = True
    return SerialState(
        dataset=dataset,
        z=z,
        ids=np.arange(k + config.m, dtype=np.int64),
        theta=theta,
        counts=counts,
        suffstats=suff,
        occupied=occupied,
        next_id=k + config.m,
    )


def _proposal_context(state: SerialState, config: ModelConfig) -> ProposalContext:
    return ProposalContext(
        x=state.dataset.x,
        row_log_coeff=state.dataset.row_log_coeff,
        assigned_theta=state.theta[state.z],
        rho=config.rho,
        gamma=config.gamma,
        smoothing_eps=config.smoothing_eps,
    )


def refresh_slots(state: SerialState, config: ModelConfig, mode: str, rng) -> SerialState:
    """Normalize the slot pool to exactly m entries and redraw their parameters.

    Surplus slots are deleted uniformly at random; missing slots are filled
    with fresh prior draws before the per-mode refresh runs.
    """
    if mode not in _MODES:
        raise ValueError(f"unknown refresh mode {mode!r}")
    slot_rows = np.flatnonzero(~state.occupied)
    if slot_rows.size > config.m:
        drop = rng.choice(slot_rows, size=slot_rows.size - config.m, replace=False)
        keep = np.setdiff1d(np.arange(state.ids.shape[0]), drop)
        remap = np.full(state.ids.shape[0], -1, dtype=np.int64)
        remap[keep] = np.arange(keep.size)
        state.ids = state.ids[keep]
        state.theta = state.theta[keep]
        state.counts = state.counts[keep]
        state.suffstats = state.suffstats[keep]
        state.occupied = state.occupied[keep]
        state.z = remap[state.z]
    elif slot_rows.size < config.m:
        add = config.m - slot_rows.size
        d = state.dataset.dim
        fresh = np.stack([sample_prior(config.gamma, d, rng) for _ in range(add)])
        state.ids = np.concatenate([state.ids, np.arange(state.next_id, state.next_id + add)])
        state.next_id += add
        state.theta = np.vstack([state.theta, fresh])
        state.counts = np.concatenate([state.counts, np.zeros(add, dtype=np.int64)])
        state.suffstats = np.vstack([state.suffstats, np.zeros((add, d), dtype=np.int64)])
        state.occupied = np.concatenate([state.occupied, np.zeros(add, dtype=bool)])

    slot_rows = np.flatnonzero(~state.occupied)
    if mode == MODE_PRIOR:
        for j in slot_rows:
            state.theta[j] = sample_prior(config.gamma, state.dataset.dim, rng)
    else:
        ctx = _proposal_context(state, config)
        for j in slot_rows:
            if mode == MODE_EMPIRICAL_EXACT:
                state.theta[j], _ = mh_step(state.theta[j], ctx, rng)
            else:
                state.theta[j], _ = propose(ctx, rng)
    return state


def gibbs_sweep_collapsed(
    state: SerialState, config: ModelConfig, rng, mode: str = MODE_PRIOR
) -> SerialState:
    """One full allocation sweep plus parameter refresh.

    Observations are visited in ascending index order. After the sweep every
    occupied cluster's parameter is redrawn from its conjugate posterior and
    the slots are refreshed via :func:`refresh_slots` in the given mode.
    """
    x = state.dataset.x
    log_alpha_slot = np.log(config.alpha / config.m)
    with np.errstate(divide="ignore"):
        log_theta = np.log(state.theta).T  # (D, K); slots/occupied fixed within sweep
    for i in range(state.dataset.n):
        j = int(state.z[i])
        state.counts[j] -= 1
        state.suffstats[j] -= x[i]
        if state.counts[j] == 0:
            state.occupied[j] = False
        ll = x[i] @ log_theta
        with np.errstate(divide="ignore"):
            prior_part = np.where(
                state.occupied, np.log(np.maximum(state.counts, 1)), log_alpha_slot
            )
            prior_part = np.where(
                state.occupied & (state.counts == 0), -np.inf, prior_part
            )
        logw = prior_part + ll
        logw -= logw.max()
        w = np.exp(logw)
        k2 = int(np.searchsorted(np.cumsum(w), rng.random() * w.sum()))
        k2 = min(k2, w.size - 1)
        state.z[i] = k2
        state.counts[k2] += 1
        state.suffstats[k2] += x[i]
        state.occupied[k2] = True
    for j in np.flatnonzero(state.occupied):
        state.theta[j] = sample_posterior_theta(state.suffstats[j], config.gamma, rng)
    return refresh_slots(state, config, mode, rng)


def run_serial(
    dataset: CountDataset,
    config: ModelConfig,
    mode: str = MODE_PRIOR,
    sink=None,
    max_seconds: float | None = None,
    clock=None,
):
    """Run ``config.total_iters`` sweeps; returns (final state, metrics trace).

    ``sink`` is called as ``sink(iteration, wall_seconds, stage, view)``
    after every sweep; when it exposes a ``trace`` attribute (as
    :class:`dpaccel.metrics.MetricsCollector` does) that trace is returned.
    ``max_seconds`` caps the run at iteration boundaries using the supplied
    clock (wall time by default).
    """
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    state = init_serial_state(dataset, config, rng)
    start = time.perf_counter()
    for it in range(1, config.total_iters + 1):
        gibbs_sweep_collapsed(state, config, rng, mode=mode)
        wall = clock.now(it) if clock is not None else time.perf_counter() - start
        if sink is not None:
            sink(it, wall, "serial", state.view())
        if max_seconds is not None and wall >= max_seconds:
            break
    trace = list(getattr(sink, "trace", [])) if sink is not None else []
    return state, trace
