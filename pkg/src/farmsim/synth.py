"""Synthetic ensemble generators for exercising the analysis pipeline.

The physics reweighting factor is abstracted into log-weight columns, so
the generators here produce Gaussian base samples with analytically (or
quadrature-) tractable tilts:

- mean tilt l_i = t * x_i: the reweighted distribution is N(t, 1), so the
  reweighted mean equals t exactly.
- quartic tilt l_i(theta) = theta * x_i^4 with theta < 0: the tilted
  Binder cumulant B4(theta) moves away from the Gaussian value 3 roughly
  linearly in theta; the exact curve comes from 1-d quadrature.
"""

import numpy as np
from scipy.integrate import quad

from .observables import Ensemble


def gaussian_sample(n, seed):
    return np.random.default_rng(seed).standard_normal(n)


def mean_tilt_column(values, t):
    return t * values


def quartic_tilt_ensemble(beta, n, thetas, seed):
    """Gaussian ensemble with l_i(theta) = theta * x_i^4 columns."""
    thetas = np.asarray(thetas, dtype=float)
    if np.any(thetas >= 0):
        raise ValueError("quartic tilt requires negative thetas")
    values = gaussian_sample(n, seed)
    logweights = np.outer(values**4, thetas)
    return Ensemble(beta=beta, values=values, thetas=thetas, logweights=logweights)


def quartic_tilt_b4_exact(theta):
    """Binder cumulant of the density prop. to exp(theta x^4) * N(0,1) by
    numerical quadrature (theta <= 0)."""

    def moment(p):
        integrand = lambda x: x**p * np.exp(theta * x**4 - 0.5 * x**2)
        val, _ = quad(integrand, -np.inf, np.inf, limit=200)
        return val

    z = moment(0)
    mu2 = moment(2) / z
    mu4 = moment(4) / z
    return mu4 / mu2**2


def quartic_tilt_quotient_exact(theta):
    """Exact finite-difference quotient (B4(theta) - B4(0)) / theta."""
    return (quartic_tilt_b4_exact(theta) - 3.0) / theta
