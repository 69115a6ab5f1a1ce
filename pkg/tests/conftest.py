"""Shared helpers: seeded random regularity tuples satisfying the solver hypotheses."""

import numpy as np
import pytest

from prsplit.core import RegularityParams


def sample_regularity(rng, zero_rho=False, zero_mu=False):
    """Random moduli with both products well inside [0, 1) and positive alpha, beta.

    Scales are log-uniform over [0.1, 10] so rates span the easy and the
    nearly-degenerate regimes without hitting them.
    """
    if zero_rho and zero_mu:
        zero_mu = False  # at least one side must carry strong convexity
    rho = 0.0 if zero_rho else float(10.0 ** rng.uniform(-1.0, 1.0))
    mu = 0.0 if zero_mu else float(10.0 ** rng.uniform(-1.0, 1.0))
    alpha = float(rng.uniform(0.05, 0.9)) / rho if rho > 0 else float(10.0 ** rng.uniform(-1.0, 1.0))
    beta = float(rng.uniform(0.05, 0.9)) / mu if mu > 0 else float(10.0 ** rng.uniform(-1.0, 1.0))
    return RegularityParams(rho=rho, alpha=alpha, mu=mu, beta=beta)


def interior_delta(rng, reg, margin=0.05):
    """A shift strictly inside ]-rho, mu[."""
    t = float(rng.uniform(margin, 1.0 - margin))
    return -reg.rho + t * (reg.rho + reg.mu)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
