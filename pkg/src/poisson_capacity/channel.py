"""Poisson transition kernel in the log domain, output truncation, tail checks."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .special import log_factorial

# explicit log(0); never produced by overflow
LOG_ZERO = -math.inf

SOLVER_EPSILON = 1e-14
REPORT_EPSILON = 1e-10


@dataclass(frozen=True)
class Truncation:
    """Outputs ``0..k_max`` are kept; the dropped tail mass is at most
    ``epsilon`` for every input mean up to ``x_ref``."""

    k_max: int
    epsilon: float
    x_ref: float

    def to_dict(self):
        return {"k_max": self.k_max, "epsilon": self.epsilon, "x_ref": self.x_ref}


def log_pmf(x, y):
    """ln P(Y = y | X = x) = y ln x - x - ln y!  (nats).

    Uses 0**0 = 1, so x = 0 gives 0 at y = 0 and ``LOG_ZERO`` for y > 0.
    Broadcasts over array arguments.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y)
    if np.any(x < 0):
        raise ValueError("log_pmf: negative input mean")
    x, y = np.broadcast_arrays(x, y)
    out = np.full(x.shape, LOG_ZERO)
    pos = x > 0
    out[pos] = y[pos] * np.log(x[pos]) - x[pos] - log_factorial(y[pos])
    out[~pos & (y == 0)] = 0.0
    if out.ndim == 0:
        return float(out)
    return out


def log_kernel(x, k_max):
    """Matrix of ``log_pmf(x_i, k)`` with shape ``(len(x), k_max + 1)``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise ValueError("log_kernel: negative input mean")
    k = np.arange(k_max + 1)
    out = np.full((x.size, k_max + 1), LOG_ZERO)
    pos = x > 0
    if pos.any():
        xp = x[pos][:, None]
        out[pos] = k * np.log(xp) - xp - log_factorial(k)
    out[~pos, 0] = 0.0
    return out


def pmf(x, y):
    return np.exp(log_pmf(x, y))


def _log_upper_tails(x, k_hi):
    """ln P[Y > k | X = x] for k = 0..k_hi, summed from the far tail inward."""
    # extend well past k_hi so the neglected remainder is below double precision
    k_end = max(k_hi + 1, int(x + 12.0 * math.sqrt(x + 1.0) + 40.0))
    while log_pmf(x, k_end) > log_pmf(x, k_hi + 1) - 80.0 or k_end <= x:
        k_end *= 2
    lp = log_kernel([x], k_end)[0]
    # reverse log-cumsum: ltail[k] = ln sum_{j>k} pmf(j)
    rev = np.logaddexp.accumulate(lp[::-1])[::-1]
    ltail = np.append(rev[1:], LOG_ZERO)
    return ltail[: k_hi + 1]


def upper_tail(x, k):
    """P[Y > k | X = x] by direct summation."""
    if x == 0:
        return 0.0
    return float(math.exp(_log_upper_tails(x, k)[k]))


def truncation_index(x_ref, epsilon):
    """Smallest ``k_max`` with P[Y > k_max | X = x_ref] <= epsilon.

    The Poisson upper tail is increasing in the mean, so the same bound holds
    for every x <= x_ref.
    """
    if not 0.0 < epsilon < 1.0:
        raise ValueError("truncation_index: epsilon must lie in (0, 1)")
    if x_ref < 0:
        raise ValueError("truncation_index: negative x_ref")
    if x_ref == 0:
        return Truncation(0, float(epsilon), 0.0)
    log_eps = math.log(epsilon)
    k_hi = int(x_ref + 10.0 * math.sqrt(x_ref) * math.sqrt(-log_eps + 1.0) - log_eps + 10)
    ltail = _log_upper_tails(x_ref, k_hi)
    ok = np.flatnonzero(ltail <= log_eps)
    return Truncation(int(ok[0]), float(epsilon), float(x_ref))


@dataclass(frozen=True)
class TailBoundCheck:
    lhs: float
    rhs: float
    holds: bool


def tail_bound_check(x0, A):
    """Check P[Y >= e x0 ln A] <= (1/ln A)^(e ln A) / e <= 1/A for Y ~ Poisson(x0).

    Valid for A >= e and x0 >= 1. The left side is summed exactly.
    """
    if A < math.e or x0 < 1:
        raise ValueError("tail_bound_check: needs A >= e and x0 >= 1")
    lnA = math.log(A)
    c = math.e * x0 * lnA
    first = math.ceil(c)
    lhs = upper_tail(x0, first - 1) if first > 0 else 1.0
    rhs = math.exp(-math.e * lnA * math.log(lnA) - 1.0)
    # at A = e the second inequality is an equality
    holds = lhs <= rhs and rhs <= (1.0 / A) * (1.0 + 1e-12)
    return TailBoundCheck(lhs, rhs, holds)


def poisson_transform(xi, x):
    """Xi(x) = sum_k xi[k] P(k | x) over the indices of ``xi``.

    ``xi`` must extend far enough that the Poisson(x) mass past its end is
    negligible; nothing beyond ``len(xi) - 1`` is added.
    """
    xi = np.asarray(xi, dtype=float)
    scalar = np.ndim(x) == 0
    lk = log_kernel(np.atleast_1d(x), xi.size - 1)
    out = np.exp(lk) @ xi
    return float(out[0]) if scalar else out


def log_output_pmf(locations, log_masses, ks):
    """ln sum_i p_i P(k | x_i) for each k in ``ks`` (log-sum-exp over points)."""
    ks = np.atleast_1d(ks)
    lk = log_kernel(locations, int(ks.max()))[:, ks]
    return logsumexp(lk + np.asarray(log_masses)[:, None], axis=0)
