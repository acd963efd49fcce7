"""Multinomial likelihood and symmetric-Dirichlet prior, all in log space.

These are the probability kernels shared by every sampler in the package:
the multinomial pmf (with its coefficient, so reported predictive values are
comparable across implementations), the Dirichlet prior/posterior over the
simplex, and the collapsed Dirichlet-multinomial marginal used both for
test-set evaluation and as a brute-force reference in the test suite.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

__all__ = [
    "log_likelihood",
    "log_prior_density",
    "sample_prior",
    "sample_posterior_theta",
    "log_marginal_likelihood",
    "log_multinomial_coeff",
]


def log_multinomial_coeff(x: np.ndarray) -> float:
    """log(n! / prod_d x_d!) for a count vector x with total n."""
    x = np.asarray(x)
    return float(gammaln(x.sum() + 1) - gammaln(x + 1).sum())


def log_likelihood(x: np.ndarray, theta: np.ndarray) -> float:
    """Log multinomial pmf of count vector ``x`` under simplex vector ``theta``.

    Includes the multinomial coefficient. Returns ``-inf`` when some
    ``theta[d] == 0`` while ``x[d] > 0``.

    Raises
    ------
    ValueError
        If ``x`` and ``theta`` differ in length.
    """
    x = np.asarray(x, dtype=np.float64)
    theta = np.asarray(theta, dtype=np.float64)
    if x.shape != theta.shape:
        raise ValueError(f"dimension mismatch: x has {x.shape}, theta has {theta.shape}")
    active = x > 0
    if np.any(theta[active] == 0.0):
        return float("-inf")
    ll = log_multinomial_coeff(x)
    ll += float(np.dot(x[active], np.log(theta[active])))
    return ll


def log_prior_density(theta: np.ndarray, gamma: float) -> float:
    """Log density of the symmetric Dirichlet(gamma, ..., gamma) at ``theta``.

    ``theta`` must lie strictly inside the simplex when gamma < 1; boundary
    points make the density diverge there and are treated as an input error
    (smooth the point into the interior first).
    """
    theta = np.asarray(theta, dtype=np.float64)
    d = theta.shape[0]
    norm = float(gammaln(d * gamma) - d * gammaln(gamma))
    if gamma == 1.0:
        return norm
    on_boundary = np.any(theta <= 0.0)
    if on_boundary:
        if gamma < 1.0:
            raise ValueError("theta on the simplex boundary: density diverges for gamma < 1")
        return float("-inf")
    return norm + float((gamma - 1.0) * np.log(theta).sum())


def sample_prior(gamma: float, d: int, rng: np.random.Generator) -> np.ndarray:
    """Draw from the symmetric Dirichlet(gamma, ..., gamma) on the d-simplex."""
    if d < 1:
        raise ValueError("d must be >= 1")
    if gamma <= 0:
        raise ValueError("gamma must be > 0")
    if d == 1:
        return np.ones(1)
    return rng.dirichlet(np.full(d, float(gamma)))


def sample_posterior_theta(
    suffstats: np.ndarray, gamma: float, rng: np.random.Generator
) -> np.ndarray:
    """Draw theta from Dirichlet(gamma + suffstats), the conjugate posterior."""
    suffstats = np.asarray(suffstats, dtype=np.float64)
    if np.any(suffstats < 0):
        raise ValueError("suffstats must be non-negative")
    if suffstats.shape[0] == 1:
        return np.ones(1)
    return rng.dirichlet(gamma + suffstats)


def log_marginal_likelihood(x: np.ndarray, suffstats: np.ndarray, gamma: float) -> float:
    """Log Dirichlet-multinomial predictive of ``x`` given accumulated counts.

    This is the multinomial likelihood with theta integrated against
    Dirichlet(gamma + suffstats); with zero suffstats it is the prior
    predictive. Includes the multinomial coefficient.
    """
    x = np.asarray(x, dtype=np.float64)
    suffstats = np.asarray(suffstats, dtype=np.float64)
    if x.shape != suffstats.shape:
        raise ValueError(
            f"dimension mismatch: x has {x.shape}, suffstats has {suffstats.shape}"
        )
    n = x.sum()
    a = gamma + suffstats
    a_total = a.sum()
    return float(
        log_multinomial_coeff(x)
        + gammaln(a_total)
        - gammaln(a_total + n)
        + (gammaln(a + x) - gammaln(a)).sum()
    )
