"""Information density, its derivatives, mutual information and the psi sequence.

All quantities are in nats. Writing the information density as

    i(x) = G(x) + x ln x - x,   G(x) = sum_k P(k|x) ln(1 / (k! P_Y(k)))

moves the ln x singularity at the origin into a closed-form term; the
derivatives of G only involve posterior means.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .channel import log_kernel
from .special import log_factorial

MIN_DERIVATIVE_X = 1e-8
ZERO_RTOL = 1e-12


def _kernel(m, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0) or np.any(x > m.truncation.x_ref * (1 + 1e-12)):
        raise ValueError("x outside the range covered by the output model")
    lk = log_kernel(x, m.k_max)
    return x, lk, np.exp(lk)


def _expect(p, values):
    # sum_k p_k v_k with 0 * inf treated as 0
    with np.errstate(invalid="ignore"):
        return np.where(p > 0, p * values, 0.0).sum(axis=1)


def _out(x_in, v):
    return float(v[0]) if np.ndim(x_in) == 0 else v


def xlogx(x):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(x > 0, x * np.log(np.where(x > 0, x, 1.0)), 0.0)


def info_density(m, x):
    """i(x; P_X) = D(P(.|x) || P_Y); equals -ln P_Y(0) at x = 0."""
    xs, lk, p = _kernel(m, x)
    with np.errstate(invalid="ignore"):
        v = _expect(p, lk - m.log_py[None, :])
    return _out(x, v)


def g_function(m, x):
    """G(x) = sum_k P(k|x) ln(1 / (k! P_Y(k)))."""
    xs, lk, p = _kernel(m, x)
    g = -log_factorial(np.arange(m.k_max + 1)) - m.log_py
    return _out(x, _expect(p, g[None, :]))


def mutual_information(m):
    """I(X;Y) = sum_i p_i i(x_i; P_X)."""
    lk = m.log_kernel
    p = np.exp(lk)
    with np.errstate(invalid="ignore"):
        dens = _expect(p, lk - m.log_py[None, :])
    return float(m.source.masses @ dens)


def mutual_information_entropy_route(m):
    """I(X;Y) as H(Y) - H(Y|X) over the retained outputs."""
    py = m.py
    with np.errstate(invalid="ignore"):
        hy = -float(np.where(py > 0, py * m.log_py, 0.0).sum())
    p = np.exp(m.log_kernel)
    h_cond = -_expect(p, m.log_kernel)
    return hy - float(m.source.masses @ h_cond)


def _log_inv_posterior_means(m, extra=0):
    """ln(1 / E[X|Y=k]) for k = 0..k_max + extra."""
    pm = np.asarray(m.posterior_mean, dtype=float)
    with np.errstate(divide="ignore"):
        out = -np.log(pm)
    if extra:
        ks = np.arange(m.k_max, m.k_max + extra + 1)
        lp = m.log_output_pmf(ks)
        # E[X|Y=k] = (k+1) P_Y(k+1) / P_Y(k)
        with np.errstate(invalid="ignore"):
            more = -(np.log(ks[:-1] + 1.0) + lp[1:] - lp[:-1])
        out = np.concatenate([out, more])
    return out


def _check_positive(x):
    if np.any(np.asarray(x) < MIN_DERIVATIVE_X):
        raise ValueError(
            f"derivatives of i(x) are singular at 0; need x >= {MIN_DERIVATIVE_X}"
        )


def g_derivative(m, x):
    """G'(x) = sum_k P(k|x) ln(1 / E[X|Y=k])."""
    _check_positive(x)
    xs, lk, p = _kernel(m, x)
    return _out(x, _expect(p, _log_inv_posterior_means(m)[None, :]))


def info_density_derivative(m, x):
    """i'(x; P_X) = G'(x) + ln x, for x > 0."""
    _check_positive(x)
    return g_derivative(m, x) + np.log(x)


def g_second_derivative(m, x, form="ratio"):
    """G''(x) in one of its two equivalent forms.

    ``"ratio"`` uses ln(E[X|Y=k] / E[X|Y=k+1]); ``"moment"`` uses
    ln(E[X|Y=k]**2 / E[X**2|Y=k]) with the second moment summed directly.
    Both moments are summed in log domain so tiny locations do not underflow.
    """
    _check_positive(x)
    xs, lk, p = _kernel(m, x)
    if form == "ratio":
        li = _log_inv_posterior_means(m, extra=1)
        v = _expect(p, (li[1:] - li[:-1])[None, :])
    elif form == "moment":
        with np.errstate(divide="ignore"):
            lx = np.log(np.asarray(m.source.locations))[:, None]
        lpost = m.log_posterior_matrix()
        log_first = logsumexp(lpost + lx, axis=0)
        log_second = logsumexp(lpost + 2.0 * lx, axis=0)
        v = _expect(p, (2.0 * log_first - log_second)[None, :])
    else:
        raise ValueError(f"unknown form {form!r}")
    return _out(x, v)


def info_density_second_derivative(m, x):
    """i''(x) = sum_k P(k|x) ln(1/E[X|Y=k+1]) - i'(x) + ln x + 1/x."""
    _check_positive(x)
    xs, lk, p = _kernel(m, x)
    li = _log_inv_posterior_means(m, extra=1)
    first = _expect(p, li[1:][None, :])
    d1 = np.atleast_1d(info_density_derivative(m, xs))
    return _out(x, first - d1 + np.log(xs) + 1.0 / xs)


@dataclass(frozen=True)
class PsiSequence:
    values: np.ndarray
    k_star: int


def k_star(amplitude, capacity, mass_at_amplitude):
    """ceil(A - ln P(A) - C): past this index psi can no longer change sign."""
    return max(0, math.ceil(amplitude - math.log(mass_at_amplitude) - capacity))


def psi_values(m, capacity, ks):
    """psi(k) = k ln(1/E[X|Y=k-1]) + ln(k! P_Y(k)) + C + k, with 0 at k = 0 for the first term."""
    ks = np.atleast_1d(np.asarray(ks, dtype=int))
    lpy = m.log_output_pmf(np.concatenate([ks, np.maximum(ks - 1, 0)]))
    lpy_k, lpy_prev = lpy[: ks.size], lpy[ks.size :]
    # ln E[X|Y=k-1] = ln k + ln P_Y(k) - ln P_Y(k-1)
    with np.errstate(divide="ignore"):
        log_pm_prev = np.log(np.maximum(ks, 1)) + lpy_k - lpy_prev
    first = np.where(ks > 0, -ks * log_pm_prev, 0.0)
    return first + log_factorial(ks) + lpy_k + capacity + ks


def psi_sequence(m, capacity, mass_at_amplitude):
    """psi(0..k*) for a law with a mass ``mass_at_amplitude`` at A."""
    d = m.source
    if not d.contains(d.amplitude) or mass_at_amplitude <= 0:
        raise ValueError("psi_sequence: the amplitude must be a support point")
    ks = k_star(d.amplitude, capacity, mass_at_amplitude)
    return PsiSequence(psi_values(m, capacity, np.arange(ks + 1)), ks)


def sign_changes(seq):
    """Number of sign alternations among the entries that are not numerically zero.

    An entry counts as zero when |v| < 1e-12 * max|seq|.
    """
    v = np.asarray(seq, dtype=float).ravel()
    if v.size == 0:
        return 0
    scale = np.max(np.abs(v))
    if scale == 0:
        return 0
    s = np.sign(v[np.abs(v) >= ZERO_RTOL * scale])
    return int(np.count_nonzero(s[1:] != s[:-1]))
