"""Task execution-time model.

Execution times follow t = t0 * (1 + u) with u drawn from the density
proportional to u^{3/2} exp(-3u) on u > 0, i.e. a Gamma distribution with
shape 5/2 and rate 3 (mean 5/6, variance 5/18). t0 is the intrinsic minimum
execution time; grid variability smears it into the broad tail.
"""

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

GAMMA_SHAPE = 2.5
GAMMA_RATE = 3.0

# Mean of t/t0: 1 + shape/rate = 11/6.
MEAN_STRETCH = 1.0 + GAMMA_SHAPE / GAMMA_RATE


@dataclass(frozen=True)
class DurationModel:
    """Per-temperature intrinsic minimum execution times.

    t0 must be monotone non-increasing in beta: the colder the system, the
    longer an iteration takes.
    """

    t0_by_beta: dict

    def __post_init__(self):
        betas = sorted(self.t0_by_beta)
        t0s = [self.t0_by_beta[b] for b in betas]
        for lo, hi in zip(t0s, t0s[1:]):
            if hi > lo:
                raise ValueError("t0 must be monotone non-increasing in beta")
        if any(t0 <= 0 for t0 in t0s):
            raise ValueError("t0 values must be positive")

    def t0(self, beta):
        return self.t0_by_beta[beta]


def sample_task_duration(t0, speed_factor, rng, size=None):
    """Draw execution time(s): speed_factor * t0 * (1 + Gamma(5/2, rate 3)).

    Every sample strictly exceeds speed_factor * t0.
    """
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    u = rng.gamma(GAMMA_SHAPE, 1.0 / GAMMA_RATE, size=size)
    return speed_factor * t0 * (1.0 + u)


@dataclass(frozen=True)
class T0Fit:
    t0: float
    at_boundary: bool


def _log_likelihood(t0, durations):
    u = durations / t0 - 1.0
    if np.any(u <= 0):
        return -np.inf
    return float(np.sum(1.5 * np.log(u) - GAMMA_RATE * u) - len(durations) * np.log(t0))


def fit_t0(durations, min_samples=30):
    """Maximum-likelihood t0 over (0, min(durations)).

    Returns a T0Fit; at_boundary is set when the maximizer sits within
    tolerance of either end of the admissible interval.
    """
    durations = np.asarray(durations, dtype=float)
    if durations.size < min_samples:
        raise ValueError(f"need at least {min_samples} samples, got {durations.size}")
    if np.any(durations <= 0):
        raise ValueError("durations must be positive")

    upper = float(durations.min())
    tol = 1e-6 * upper
    res = minimize_scalar(
        lambda t0: -_log_likelihood(t0, durations),
        bounds=(tol, upper - tol),
        method="bounded",
        options={"xatol": tol},
    )
    t0_hat = float(res.x)
    at_boundary = t0_hat <= 2 * tol or t0_hat >= upper - 2 * tol
    return T0Fit(t0=t0_hat, at_boundary=at_boundary)


def grid_search_t0(durations, n_points=10_000):
    """Brute-force likelihood maximization on an n-point grid over (0, min)."""
    durations = np.asarray(durations, dtype=float)
    upper = float(durations.min())
    grid = np.linspace(upper / n_points, upper * (1 - 1e-9), n_points)
    best_t0, best_ll = grid[0], -np.inf
    for chunk in np.array_split(grid, max(1, n_points // 200)):
        u = durations[None, :] / chunk[:, None] - 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = np.sum(1.5 * np.log(u) - GAMMA_RATE * u, axis=1) - len(
                durations
            ) * np.log(chunk)
        ll = np.where(np.isfinite(ll), ll, -np.inf)
        i = int(np.argmax(ll))
        if ll[i] > best_ll:
            best_ll, best_t0 = float(ll[i]), float(chunk[i])
    return best_t0
