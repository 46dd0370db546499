"""Projected gradient ascent on I(X;Y) over mass locations and masses.

The iterate is a pair of arrays (locations, masses). The smallest location is
pinned at 0. Masses take a plain gradient step followed by Euclidean projection
onto the simplex. Locations step along i'(x_i), which is the location gradient
p_i i'(x_i) divided by the mass, and are then clipped to [0, A]. Without that
scaling, points carrying little mass barely move and a step of 0.01
needs around 1e5 iterations for a single amplitude.

Every 1000 iterations the KKT equations on the current support are handed to
a Newton-type root finder. The ascent finds the right support and the root
finder removes the slow tail of convergence, which is worst where a new mass
point is being born. A root is only accepted if it is feasible and does not
lower I(X;Y).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import root

from .bounds import binary_closed_form, binary_threshold
from .channel import LOG_ZERO, SOLVER_EPSILON, truncation_index
from .dist import DiscreteDistribution, OutputModel
from .information import (
    MIN_DERIVATIVE_X,
    g_derivative,
    info_density,
    mutual_information,
)
from .special import log_factorial

DECREASE_SLACK = 1e-10
RESTORE_AFTER = 10
CHECK_EVERY = 50
POLISH_EVERY = 1000


class SingularLocationError(ValueError):
    """A movable location is so close to 0 that i'(x) is not representable."""


@dataclass(frozen=True)
class SolverConfig:
    step_size: float = 0.01
    max_iter: int = 200_000
    kkt_tol: float = 1e-7
    grid_points: int = 4001
    n_points: int | None = None  # default ceil(A) + 4
    merge_delta: float = 1e-4
    prune_mass: float = 1e-7
    continuation_delta: float = 0.05

    def __post_init__(self):
        for name in ("step_size", "kkt_tol", "merge_delta", "continuation_delta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.prune_mass < 0:
            raise ValueError("prune_mass must be nonnegative")
        if self.max_iter < 1 or self.grid_points < 2:
            raise ValueError("max_iter must be >= 1 and grid_points >= 2")
        if self.n_points is not None and self.n_points < 1:
            raise ValueError("n_points must be positive")

    def points_for(self, A):
        return self.n_points if self.n_points is not None else math.ceil(A) + 4

    def to_dict(self):
        return {
            "step_size": self.step_size,
            "max_iter": self.max_iter,
            "kkt_tol": self.kkt_tol,
            "grid_points": self.grid_points,
            "n_points": self.n_points,
            "merge_delta": self.merge_delta,
            "prune_mass": self.prune_mass,
            "continuation_delta": self.continuation_delta,
        }


@dataclass(frozen=True)
class KktReport:
    max_violation: float
    support_residuals: np.ndarray = field(repr=False)
    grid_size: int

    def passes(self, tol):
        return self.max_violation <= tol and bool(np.all(self.support_residuals <= tol))


@dataclass(frozen=True)
class SolverResult:
    distribution: DiscreteDistribution
    capacity_mi: float
    capacity_py0: float
    kkt_gap: float
    iterations: int
    converged: bool

    @property
    def amplitude(self):
        return self.distribution.amplitude


def project_simplex(u):
    """Euclidean projection of ``u`` onto {p >= 0, sum p = 1}."""
    u = np.asarray(u, dtype=float)
    s = np.sort(u)[::-1]
    c = np.cumsum(s)
    j = np.arange(1, u.size + 1)
    r = np.flatnonzero(s + (1.0 - c) / j > 0)[-1]
    theta = (c[r] - 1.0) / (r + 1)
    return np.maximum(u - theta, 0.0)


def project_feasible(locations, masses, A):
    """Clip locations to [0, A] and project masses onto the simplex."""
    locations = np.asarray(locations, dtype=float)
    masses = np.asarray(masses, dtype=float)
    if locations.shape != masses.shape:
        raise ValueError("locations and masses must have the same length")
    return np.clip(locations, 0.0, A), project_simplex(masses)


def gradient(m):
    """Gradient of I(X;Y) in the masses and the locations.

    Treating the masses as free coordinates, dI/dp_i = i(x_i) - 1 and
    dI/dx_i = p_i (G'(x_i) + ln x_i): the terms through P_Y sum to zero.
    A location at exactly 0 is pinned and gets 0.
    """
    d = m.source
    x = d.locations
    d_mass = np.atleast_1d(info_density(m, x)) - 1.0
    d_loc = np.zeros(x.size)
    movable = x > 0
    if np.any(x[movable] < MIN_DERIVATIVE_X):
        raise SingularLocationError("a movable location is below 1e-8")
    if movable.any():
        xm = x[movable]
        d_loc[movable] = d.masses[movable] * (
            np.atleast_1d(g_derivative(m, xm)) + np.log(xm)
        )
    return d_mass, d_loc


def kkt_verify(m, C, grid_points=4001, tol=1e-7):
    """Evaluate i(x) - C on a uniform grid of [0, A] and on the support."""
    if grid_points < 2:
        raise ValueError("grid_points must be at least 2")
    A = m.amplitude
    x = m.source.locations
    grid = np.linspace(0.0, A, grid_points)
    dens = info_density(m, np.concatenate([grid, x]))
    residuals = np.abs(dens[grid_points:] - C)
    return KktReport(float(np.max(dens) - C), residuals, grid_points)


class _Objective:
    """I(X;Y), i(x_i) and i'(x_i) on one fixed truncation, for the inner loop."""

    def __init__(self, A):
        self.A = A
        self.k_max = truncation_index(A, SOLVER_EPSILON).k_max
        self.k = np.arange(self.k_max + 1)
        self.log_fact = log_factorial(self.k)
        self.grid = None

    def _log_kernel(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            lk = self.k * np.log(x)[:, None] - x[:, None] - self.log_fact
        zero = x == 0
        lk[zero] = LOG_ZERO
        lk[zero, 0] = 0.0
        return lk

    def __call__(self, x, p):
        lk = self._log_kernel(x)
        with np.errstate(divide="ignore"):
            lj = lk + np.log(p)[:, None]
        top = lj.max(axis=0)
        lpy = top + np.log(np.exp(lj - top).sum(axis=0))
        kern = np.exp(lk)
        with np.errstate(invalid="ignore"):
            dens = np.where(kern > 0, kern * (lk - lpy), 0.0).sum(axis=1)
        I = float(p @ dens)
        post_mean = x @ np.exp(lj - lpy)
        with np.errstate(divide="ignore", invalid="ignore"):
            g1 = np.where(kern > 0, kern * -np.log(post_mean), 0.0).sum(axis=1)
            slope = np.where(x > 0, g1 + np.log(x), 0.0)
        return I, dens, np.nan_to_num(slope, posinf=1e3, neginf=-1e3), lpy

    def grid_density(self, lpy, n):
        if self.grid is None or self.grid[0].size != n:
            xg = np.linspace(0.0, self.A, n)
            kern_log = self._log_kernel(xg)
            self.grid = (xg, kern_log, np.exp(kern_log))
        xg, lk, kern = self.grid
        with np.errstate(invalid="ignore"):
            return xg, np.where(kern > 0, kern * (lk - lpy), 0.0).sum(axis=1)


def _polish(f, x, p, tol):
    """Newton solve of the KKT equations on the current support.

    Unknowns are the masses, the interior locations and C; equations are
    i(x_k) = C on the support, i'(x_j) = 0 at interior points and
    sum p = 1. Returns None unless the root is feasible.
    """
    A = f.A
    keep = p > 0
    keep[0] = True
    x, p = x[keep], p[keep]
    inner = (x > 0) & (x < A)
    n, m = x.size, int(inner.sum())

    def unpack(z):
        xs = x.copy()
        xs[inner] = z[n : n + m]
        return xs, z[:n], z[-1]

    def equations(z):
        xs, ps, C = unpack(z)
        if np.any(xs[inner] <= 0) or np.any(xs[inner] >= A) or np.any(np.diff(xs) <= 0):
            return np.full(z.size, 1e3)
        _, dens, slope, _ = f(xs, np.abs(ps) + 1e-300)
        return np.concatenate([dens - C, slope[inner], [ps.sum() - 1.0]])

    I0, dens0, _, _ = f(x, p)
    z0 = np.concatenate([p, x[inner], [I0]])
    try:
        sol = root(equations, z0, method="hybr", options={"xtol": 1e-13})
    except (ValueError, FloatingPointError):
        return None
    if not sol.success:
        return None
    xs, ps, _ = unpack(sol.x)
    if np.any(ps[1:] <= 0) or ps[0] < 0 or np.max(np.abs(equations(sol.x))) > tol:
        return None
    return xs, ps / ps.sum()


def merge_close(x, p, delta):
    """Merge neighbours closer than ``delta`` left to right in one pass.

    A merged point sits at the mass-weighted mean position and carries the
    summed mass; anything merged into the pinned point at 0 stays at 0.
    """
    xs, ps = [float(x[0])], [float(p[0])]
    for xi, pi in zip(x[1:], p[1:]):
        if xi - xs[-1] < delta:
            total = ps[-1] + pi
            if xs[-1] != 0.0 and total > 0:
                xs[-1] = (xs[-1] * ps[-1] + xi * pi) / total
            ps[-1] = total
        else:
            xs.append(float(xi))
            ps.append(float(pi))
    return np.array(xs), np.array(ps)


def _insert(x, p, at, mass):
    j = int(np.searchsorted(x, at))
    x = np.insert(x, j, at)
    p = np.insert(p, j, mass)
    return x, p / p.sum()


def _finish(A, x, p, cfg, iterations):
    keep = p >= cfg.prune_mass
    keep[0] = keep[0] or x[0] == 0.0 and p[0] > 0
    x, p = x[keep], p[keep]
    dist = DiscreteDistribution(A, x, p / p.sum())
    m = OutputModel(dist)
    mi = mutual_information(m)
    py0 = -float(m.log_py[0])
    report = kkt_verify(m, mi, cfg.grid_points, cfg.kkt_tol)
    return SolverResult(
        dist, mi, py0, report.max_violation, iterations, report.passes(cfg.kkt_tol)
    )


def ascend(initial, cfg=SolverConfig(), observer=None):
    """Projected gradient ascent from ``initial`` until the KKT gap closes.

    Every 50 iterations the support residuals |i(x_i) - I| are checked; when
    they pass, i(x) - I is evaluated on the grid. If the grid still shows a
    violation above ``kkt_tol`` and fewer than ``n_points`` points are in use,
    a point of mass 10 * prune_mass is added at the worst grid location.

    ``observer``, if given, is called as ``observer(locations, masses, I)``
    after every accepted step.
    """
    A = initial.amplitude
    x = np.array(initial.locations, dtype=float)
    p = np.array(initial.masses, dtype=float)
    if x[0] != 0.0:
        x, p = np.insert(x, 0, 0.0), np.insert(p, 0, 0.0)
    f = _Objective(A)
    tol = cfg.kkt_tol
    cap = max(cfg.points_for(A), initial.size)
    lam_max = cfg.step_size
    lam = lam_max
    streak = 0
    I, dens, slope, lpy = f(x, p)
    for it in range(cfg.max_iter):
        if it % CHECK_EVERY == 0:
            live = p > 0
            if it and it % POLISH_EVERY == 0:
                polished = _polish(f, x, p, 0.1 * tol)
                if polished is not None:
                    xq, pq = polished
                    Iq, densq, slopeq, lpyq = f(xq, pq)
                    if Iq >= I - DECREASE_SLACK:
                        x, p, I, dens, slope, lpy = xq, pq, Iq, densq, slopeq, lpyq
                        live = p > 0
            if np.max(np.abs(dens[live] - I)) <= tol:
                xg, dg = f.grid_density(lpy, cfg.grid_points)
                worst = int(np.argmax(dg))
                if dg[worst] - I <= tol:
                    return _finish(A, x, p, cfg, it)
                if x.size < cap and np.min(np.abs(x - xg[worst])) > cfg.merge_delta * A:
                    x, p = _insert(x, p, xg[worst], 10 * cfg.prune_mass)
                    I, dens, slope, lpy = f(x, p)
        xn = np.clip(x + lam * slope, 0.0, A)
        xn[0] = 0.0
        pn = project_simplex(p + lam * (dens - 1.0))
        order = np.argsort(xn, kind="stable")
        xn, pn = xn[order], pn[order]
        if np.any(np.diff(xn) < cfg.merge_delta * A):
            xn, pn = merge_close(xn, pn, cfg.merge_delta * A)
        In, densn, slopen, lpyn = f(xn, pn)
        if In < I - DECREASE_SLACK:
            lam /= 2.0
            streak = 0
            continue
        x, p, I, dens, slope, lpy = xn, pn, In, densn, slopen, lpyn
        if observer is not None:
            observer(x, p, I)
        streak += 1
        if streak >= RESTORE_AFTER:
            lam = lam_max
    return _finish(A, x, p, cfg, cfg.max_iter)


def _spare_midpoint(x):
    gaps = np.diff(x)
    j = int(np.argmax(gaps))
    return 0.5 * (x[j] + x[j + 1])


def _warm_start(prev, A, cfg):
    """Previous optimum moved to amplitude ``A`` with one spare point added."""
    x = np.array(prev.locations)
    p = np.array(prev.masses)
    x[-1] = A if x[-1] >= prev.amplitude * (1 - 1e-12) else x[-1]
    x = np.minimum(x, A)
    if x.size < cfg.points_for(A):
        x, p = _insert(x, p, _spare_midpoint(x), 10 * cfg.prune_mass)
    x, p = merge_close(x, p, cfg.merge_delta * A)
    return DiscreteDistribution(A, x, p / p.sum())


def sweep(amplitudes, cfg=SolverConfig(), on_result=None):
    """Solve for every amplitude, in increasing order, with warm starts.

    Amplitudes up to the binary threshold start from the two-point closed
    form. Above it the solver walks up from the threshold in steps of
    ``continuation_delta``, landing exactly on each requested amplitude.
    """
    amps = sorted(float(a) for a in amplitudes)
    if any(not a > 0 for a in amps):
        raise ValueError("amplitudes must be positive")
    threshold = binary_threshold()
    results = []
    prev = None
    for A in amps:
        if prev is not None and prev.amplitude == A:
            res = prev
        elif A <= threshold:
            res = ascend(binary_closed_form(A), cfg)
        else:
            if prev is None or prev.amplitude < threshold:
                current = binary_closed_form(threshold)
            else:
                current = prev.distribution
            a = current.amplitude
            res = None
            while a < A - 1e-12:
                a = a + cfg.continuation_delta
                if a > A - 1e-9 * A:
                    a = A
                res = ascend(_warm_start(current, a, cfg), cfg)
                current = res.distribution
        results.append(res)
        prev = res
        if on_result is not None:
            on_result(res)
    return results


def solve_capacity(A, cfg=SolverConfig()):
    """Capacity and optimal input law for the peak constraint ``A``."""
    return sweep([A], cfg)[0]
