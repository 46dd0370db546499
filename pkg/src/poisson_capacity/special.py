"""Real Lambert W (branches 0 and -1) and log-factorial."""

import enum
import math

import numpy as np

INV_E = math.exp(-1.0)

_MAX_HALLEY = 50
_RESIDUAL_TOL = 1e-14

# ln(k!) for k = 0..20, from exact integers
_LOG_FACTORIAL_TABLE = np.array([math.log(math.factorial(k)) for k in range(21)])
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class WBranch(enum.Enum):
    PRINCIPAL = 0
    LOWER_NEG_ONE = -1


@np.errstate(over="ignore", invalid="ignore")
def _initial_guess(branch, x):
    # branch-point series in p = sqrt(2(e x + 1)), asymptotic log forms elsewhere
    p = np.sqrt(np.maximum(2.0 * (math.e * x + 1.0), 0.0))
    if branch is WBranch.PRINCIPAL:
        near = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3
        small = x - x * x + 1.5 * x**3
        # Winitzki's approximation for x >= 0.5
        l1 = np.log1p(np.maximum(x, 0.0))
        far = l1 * (1.0 - np.log1p(l1) / (2.0 + l1))
        return np.where(x < -0.25, near, np.where(x < 0.5, small, far))
    near = -1.0 - p - p * p / 3.0 - 11.0 / 72.0 * p**3
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = np.log(np.maximum(-x, 1e-300))
        far = lx - np.log(np.maximum(-lx, 1e-300))
    return np.where(x < -0.25, near, far)


def lambert_w(branch, x):
    """Real Lambert W: the w with w * exp(w) == x on the requested branch.

    ``branch`` is a :class:`WBranch`. ``x`` may be a scalar or an array; the
    principal branch needs ``x >= -1/e`` and the lower branch needs
    ``-1/e <= x < 0``. Both branches return exactly -1 at ``x = -1/e``.

    Halley iteration from a branch-specific starting point, stopped once the
    residual relative to |x| is below 1e-14, the step stalls at rounding
    level, or after 50 steps.
    """
    branch = WBranch(branch)
    scalar = np.ndim(x) == 0
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)):
        raise ValueError("lambert_w: nan argument")
    if np.any(x < -INV_E):
        raise ValueError("lambert_w: argument below -1/e")
    if branch is WBranch.LOWER_NEG_ONE and np.any(x >= 0.0):
        raise ValueError("lambert_w: lower branch requires x < 0")

    w = np.atleast_1d(_initial_guess(branch, x)).astype(float)
    xs = np.atleast_1d(x)
    at_branch_point = xs == -INV_E
    zero = xs == 0.0
    active = ~(at_branch_point | zero)
    for _ in range(_MAX_HALLEY):
        if not active.any():
            break
        wa, xa = w[active], xs[active]
        # Halley on f(w) = w e^w - x, divided through by e^w to avoid overflow
        t = wa - xa * np.exp(-wa)
        wp1 = wa + 1.0
        with np.errstate(divide="ignore", invalid="ignore"):
            step = t / (wp1 - t * (wa + 2.0) / (2.0 * wp1))
        step = np.where(np.isfinite(step), step, 0.0)
        wa = wa - step
        w[active] = wa
        resid = np.abs(wa * np.exp(wa) - xa)
        done = (resid <= _RESIDUAL_TOL * np.abs(xa)) | (
            np.abs(step) <= 1e-16 * (1.0 + np.abs(wa))
        )
        idx = np.flatnonzero(active)
        active[idx[done]] = False
    # rounding next to -1/e must not push a branch across w = -1
    if branch is WBranch.PRINCIPAL:
        w = np.maximum(w, -1.0)
    else:
        w = np.minimum(w, -1.0)
    w[at_branch_point] = -1.0
    w[zero] = 0.0
    if scalar:
        return float(w[0])
    return w.reshape(x.shape)


def log_factorial(k):
    """ln(k!) in nats for integer k >= 0 (scalar or array).

    Exact table up to 20; above that the Stirling series with terms through
    k**-7, which is good to far better than 1e-10 from k = 21 on.
    """
    scalar = np.ndim(k) == 0
    k = np.asarray(k)
    if np.any(k < 0):
        raise ValueError("log_factorial: negative argument")
    kf = k.astype(float)
    out = np.empty(kf.shape)
    small = kf <= 20
    out[small] = _LOG_FACTORIAL_TABLE[k[small].astype(int)]
    n = kf[~small]
    inv = 1.0 / n
    inv2 = inv * inv
    series = inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 / 1680.0)))
    out[~small] = n * np.log(n) - n + _HALF_LOG_2PI + 0.5 * np.log(n) + series
    if scalar:
        return float(out)
    return out
