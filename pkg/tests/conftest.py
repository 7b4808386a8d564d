import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.normal(size=(n, n)))
    return q * np.sign(np.diag(r))


def random_spd(rng, n, lo=0.4, hi=2.0):
    q = random_orthogonal(rng, n)
    return q @ np.diag(rng.uniform(lo, hi, size=n)) @ q.T


def random_hurwitz(rng, n, lo=0.4, hi=1.2):
    """Normal matrix with real eigenvalues in (-hi, -lo)."""
    q = random_orthogonal(rng, n)
    return q @ np.diag(-rng.uniform(lo, hi, size=n)) @ q.T


def random_hilger_stable(rng, n, mu, rho_lo=0.1, rho_hi=0.8):
    """A with the eigenvalues of I + mu*A at radius in (rho_lo, rho_hi)."""
    q = random_orthogonal(rng, n)
    vals = rng.uniform(rho_lo, rho_hi, size=n) * rng.choice([-1, 1], size=n)
    g = q @ np.diag(vals) @ q.T
    return (g - np.eye(n)) / mu
