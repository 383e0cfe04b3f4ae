"""Reweighted ensemble analysis: Binder cumulant, finite differences,
jackknife errors, zero-chemical-potential extrapolation and the truncated
critical-line series.

An ensemble is a per-temperature series of scalar measurements together
with per-configuration log-weight columns, one column per value of the
reweighting parameter theta. All expectations are max-shifted weighted
means, so uniformly shifting the log-weights never changes a result.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ValueWithError:
    value: float
    error: float

    def __post_init__(self):
        if self.error < 0:
            raise ValueError("error must be non-negative")


def _normalized_weights(logweights):
    lw = np.asarray(logweights, dtype=float)
    w = np.exp(lw - lw.max())
    return w / w.sum()


def reweighted_expectation(values, logweights):
    """Weighted mean sum(v_i e^{l_i}) / sum(e^{l_i}), max-shifted."""
    values = np.asarray(values, dtype=float)
    logweights = np.asarray(logweights, dtype=float)
    if values.size == 0:
        raise ValueError("empty input")
    if values.shape != logweights.shape:
        raise ValueError("values and logweights must have equal length")
    return float(np.sum(values * _normalized_weights(logweights)))


def binder_cumulant(values, logweights):
    """Fourth-order fluctuation ratio mu4 / mu2^2 of the reweighted series.

    1 signals a two-state (first order) distribution, 3 a Gaussian
    crossover, 1.604 the 3d-Ising critical value.
    """
    values = np.asarray(values, dtype=float)
    logweights = np.asarray(logweights, dtype=float)
    if values.shape != logweights.shape:
        raise ValueError("values and logweights must have equal length")
    w = _normalized_weights(logweights)
    mean = np.sum(w * values)
    delta = values - mean
    mu2 = np.sum(w * delta**2)
    mu4 = np.sum(w * delta**4)
    if mu2 <= 0:
        raise ValueError("zero-variance input")
    return float(mu4 / mu2**2)


def _block_slices(n, block_size):
    """Deterministic block partition; the last block absorbs the remainder."""
    if block_size < 1:
        raise ValueError("block_size must be positive")
    n_blocks = n // block_size
    if n_blocks < 2:
        raise ValueError("need at least 2 blocks after blocking")
    bounds = [b * block_size for b in range(n_blocks)] + [n]
    return [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]


def jackknife(statistic, values, logweights, block_size=1):
    """Delete-one-block jackknife of statistic(values, logweights).

    Returns (estimate, error): estimate on the full data; error from the
    spread of the leave-one-block-out replicas. The block partition depends
    only on (n, block_size), so callers evaluating several statistics on
    the same configurations share blocks and correlated fluctuations cancel
    in differences.
    """
    values = np.asarray(values, dtype=float)
    logweights = np.asarray(logweights, dtype=float)
    slices = _block_slices(values.size, block_size)
    estimate = statistic(values, logweights)
    replicas = np.empty(len(slices))
    mask = np.ones(values.size, dtype=bool)
    for i, sl in enumerate(slices):
        mask[sl] = False
        replicas[i] = statistic(values[mask], logweights[mask])
        mask[sl] = True
    n_blocks = len(slices)
    spread = np.sum((replicas - replicas.mean()) ** 2)
    error = math.sqrt((n_blocks - 1) / n_blocks * spread)
    return estimate, error


@dataclass(frozen=True)
class Ensemble:
    """Measurements at one temperature plus log-weight columns on a theta grid.

    thetas[k] = 0 is implied to carry all-zero log-weights (reweighting to
    the simulated point is the identity); non-zero thetas each own a column
    of logweights, shape (n_configs, n_thetas).
    """

    beta: float
    values: np.ndarray
    thetas: np.ndarray
    logweights: np.ndarray

    def __post_init__(self):
        if self.values.ndim != 1 or self.values.size < 2:
            raise ValueError("values must be a 1-d series of length >= 2")
        if self.logweights.shape != (self.values.size, self.thetas.size):
            raise ValueError("logweights must have shape (n_configs, n_thetas)")
        if not np.all(np.isfinite(self.logweights)):
            raise ValueError("log-weight columns must be finite")

    def column(self, k):
        return self.logweights[:, k]


def b4_difference_quotient(ensemble, block_size=50):
    """Finite-difference derivative of the Binder cumulant in theta.

    For each theta: (B4 reweighted to theta - B4 at theta=0) / theta, with
    the jackknife error taken on the per-block difference so the correlated
    fluctuations of the two cumulants cancel.
    """
    if np.any(ensemble.thetas == 0):
        raise ValueError("theta grid must exclude 0")
    # The jackknife masks values and the matching log-weight rows together,
    # so the statistic runs on configuration indices.
    idx = np.arange(ensemble.values.size, dtype=float)
    zeros = np.zeros_like(idx)
    results = []
    for k, theta in enumerate(ensemble.thetas):
        col = ensemble.column(k)

        def stat(sub_idx, _lw, col=col, theta=theta):
            sub = sub_idx.astype(int)
            v = ensemble.values[sub]
            b4_theta = binder_cumulant(v, col[sub])
            b4_zero = binder_cumulant(v, np.zeros(sub.size))
            return (b4_theta - b4_zero) / theta

        estimate, error = jackknife(stat, idx, zeros, block_size=block_size)
        results.append((float(theta), estimate, error))
    return results


@dataclass(frozen=True)
class FitResult:
    intercept: ValueWithError
    slope: ValueWithError
    chi2_per_dof: float


def extrapolate_mu2(points):
    """Weighted least squares of y = a + b*theta plus a constant-only fit.

    points: (theta, y, sigma) triples with sigma > 0. Returns (linear fit,
    constant fit); for the constant fit slope is fixed at 0.
    """
    points = list(points)
    if not points:
        raise ValueError("no points to fit")
    theta = np.array([p[0] for p in points], dtype=float)
    y = np.array([p[1] for p in points], dtype=float)
    sigma = np.array([p[2] for p in points], dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("all sigma must be positive")
    w = 1.0 / sigma**2

    # Constant fit: weighted mean.
    a_const = float(np.sum(w * y) / np.sum(w))
    a_const_err = float(1.0 / math.sqrt(np.sum(w)))
    dof_c = max(1, len(points) - 1)
    chi2_c = float(np.sum(w * (y - a_const) ** 2)) / dof_c
    const_fit = FitResult(
        intercept=ValueWithError(a_const, a_const_err),
        slope=ValueWithError(0.0, 0.0),
        chi2_per_dof=chi2_c,
    )

    if len(points) < 2:
        raise ValueError("need at least 2 points for the linear fit")
    s0 = np.sum(w)
    s1 = np.sum(w * theta)
    s2 = np.sum(w * theta**2)
    det = s0 * s2 - s1 * s1
    if det <= 0 or np.isclose(det, 0.0, atol=1e-300):
        raise ValueError("singular design: all theta equal")
    sy = np.sum(w * y)
    sty = np.sum(w * theta * y)
    a = (s2 * sy - s1 * sty) / det
    b = (s0 * sty - s1 * sy) / det
    a_err = math.sqrt(s2 / det)
    b_err = math.sqrt(s0 / det)
    dof = max(1, len(points) - 2)
    chi2 = float(np.sum(w * (y - a - b * theta) ** 2)) / dof
    linear_fit = FitResult(
        intercept=ValueWithError(float(a), a_err),
        slope=ValueWithError(float(b), b_err),
        chi2_per_dof=chi2,
    )
    return linear_fit, const_fit


def curvature(db4_dmu2, db4_dam):
    """Ratio of the two Binder-cumulant derivatives with independent-error
    propagation: relative errors add in quadrature."""
    if db4_dam.value == 0:
        raise ZeroDivisionError("mass derivative must be non-zero")
    ratio = db4_dmu2.value / db4_dam.value
    rel2 = 0.0
    if db4_dmu2.value != 0:
        rel2 += (db4_dmu2.error / db4_dmu2.value) ** 2
    rel2 += (db4_dam.error / db4_dam.value) ** 2
    return ValueWithError(ratio, abs(ratio) * math.sqrt(rel2))


def critical_mass_ratio(c_coeffs, mu_over_pi_t):
    """Truncated even Taylor series 1 + sum_n c_n x^{2n}, n starting at 1."""
    x2 = mu_over_pi_t**2
    return 1.0 + sum(c * x2 ** (n + 1) for n, c in enumerate(c_coeffs))


# -- ensemble file format ---------------------------------------------------


def write_ensemble(ensemble, fh):
    thetas = ",".join(format(t, "g") for t in ensemble.thetas)
    cols = ",".join(["X"] + [f"l({format(t, 'g')})" for t in ensemble.thetas])
    fh.write(f"beta={ensemble.beta:.6f} columns={cols} thetas={thetas}\n")
    for i in range(ensemble.values.size):
        row = [format(ensemble.values[i], ".12g")] + [
            format(v, ".12g") for v in ensemble.logweights[i]
        ]
        fh.write(" ".join(row) + "\n")


def read_ensemble(fh):
    header = fh.readline().strip()
    fields = {}
    for token in header.split():
        if "=" not in token:
            raise ValueError(f"malformed ensemble header: {header!r}")
        key, value = token.split("=", 1)
        fields[key] = value
    for required in ("beta", "columns", "thetas"):
        if required not in fields:
            raise ValueError(f"ensemble header missing {required!r}: {header!r}")
    beta = float(fields["beta"])
    thetas = np.array([float(t) for t in fields["thetas"].split(",") if t], dtype=float)
    rows = []
    for lineno, line in enumerate(fh, start=2):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 1 + thetas.size:
            raise ValueError(
                f"ensemble line {lineno}: expected {1 + thetas.size} columns, "
                f"got {len(parts)}"
            )
        rows.append([float(p) for p in parts])
    data = np.array(rows, dtype=float)
    if data.size == 0:
        raise ValueError("ensemble has no configuration rows")
    return Ensemble(
        beta=beta, values=data[:, 0], thetas=thetas, logweights=data[:, 1:]
    )
