"""Closed forms for the binary regime and the analytic bounds on optimal inputs."""

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar

from .dist import DiscreteDistribution, OutputModel
from .special import WBranch, lambert_w


def binary_mass_at_amplitude(A):
    """P(A) = 1 / (exp(A / (e^A - 1)) - e^-A + 1)."""
    if not A > 0:
        raise ValueError("amplitude must be positive")
    return 1.0 / (math.exp(A / math.expm1(A)) - math.exp(-A) + 1.0)


def binary_closed_form(A):
    """Two-point law on {0, A}; capacity achieving for A up to the threshold."""
    pa = binary_mass_at_amplitude(A)
    return DiscreteDistribution(A, [0.0, A], [1.0 - pa, pa])


def binary_capacity(A):
    """-ln(P(0) + e^-A P(A)) in nats."""
    pa = binary_mass_at_amplitude(A)
    # P(0) + e^-A P(A) = 1 + P(A) expm1(-A)
    return -math.log1p(pa * math.expm1(-A))


@functools.lru_cache(maxsize=None)
def _binary_peak_excess(A, grid=2001):
    """Largest interior local maximum of i(x) - C for the two-point law at A.

    i(x) - C vanishes at both 0 and A, so only local maxima strictly inside
    (0, A) are considered; -inf when there is none.
    """
    from .information import info_density

    d = binary_closed_form(A)
    m = OutputModel(d)
    C = binary_capacity(A)
    xs = np.linspace(0.0, A, grid)
    v = np.asarray(info_density(m, xs)) - C
    inner = np.flatnonzero((v[1:-1] > v[:-2]) & (v[1:-1] >= v[2:])) + 1
    if inner.size == 0:
        return -math.inf
    best = -math.inf
    h = xs[1] - xs[0]
    for j in inner:
        r = minimize_scalar(
            lambda x: -(info_density(m, x) - C),
            bounds=(xs[j] - h, xs[j] + h),
            method="bounded",
            options={"xatol": 1e-10},
        )
        best = max(best, -float(r.fun))
    return best


@functools.lru_cache(maxsize=None)
def binary_threshold(tol=1e-6):
    """Largest A for which the two-point law on {0, A} satisfies the KKT conditions.

    Bisection on [3, 4] on the sign of the largest interior excess of i(x) over C.
    """
    lo, hi = 3.0, 4.0
    if _binary_peak_excess(lo) > 0 or _binary_peak_excess(hi) <= 0:
        raise RuntimeError("binary threshold is not bracketed by [3, 4]")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _binary_peak_excess(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def contraction_upper(A):
    """Upper bound 1 - e^-A on the KL contraction coefficient of the channel."""
    if A < 0:
        raise ValueError("amplitude must be nonnegative")
    return -math.expm1(-A)


def _exponent(A, C):
    # C / (1 - e^-A)
    return C / -math.expm1(-A)


def universal_mass_bound(A, C):
    """Every optimal mass is at most exp(-C / (1 - e^-A))."""
    if not A > 0 or C < 0:
        raise ValueError("need A > 0 and C >= 0")
    return math.exp(-_exponent(A, C))


def location_mass_bound(x, C):
    """Optimal mass at x > 0 is at most exp(-C - x e^-x / (1 - e^-x))."""
    if not x > 0:
        raise ValueError("location_mass_bound needs x > 0")
    # x e^-x / (1 - e^-x) = x / (e^x - 1)
    return math.exp(-C - x / math.expm1(x))


class InapplicableBound(ValueError):
    """The precondition exp(C / (1 - e^-A)) >= 4 does not hold."""


@dataclass(frozen=True)
class Inapplicable:
    reason: str

    def __bool__(self):
        return False


def _require_four(A, C):
    s = _exponent(A, C)
    if s < math.log(4.0):
        raise InapplicableBound(
            f"exp(C / (1 - e^-A)) = {math.exp(s):.6g} < 4 at A={A!r}, C={C!r}"
        )
    return s


def largest_mass_lower_bound(A, C):
    """Natural log of the lower bound on the mass at the largest support point.

    ln[(1 - 3 e^-s) / 2] - (2 A e ln A + 2) ln A + 2A - 1 with s = C / (1 - e^-A).
    Raises :class:`InapplicableBound` when e^s < 4.
    """
    s = _require_four(A, C)
    lnA = math.log(A)
    return (
        math.log1p(-3.0 * math.exp(-s))
        - math.log(2.0)
        - (2.0 * A * math.e * lnA + 2.0) * lnA
        + 2.0 * A
        - 1.0
    )


def interior_location_bracket(A):
    """(outer_lo, inner_lo, inner_hi, outer_hi) for interior support points, A > e."""
    if not A > math.e:
        raise ValueError("interior_location_bracket needs A > e")
    z = -1.0 / A
    inner_lo = -1.0 / lambert_w(WBranch.LOWER_NEG_ONE, z)
    inner_hi = -1.0 / lambert_w(WBranch.PRINCIPAL, z)
    outer_lo = math.exp(-math.sqrt(2.0 * (math.log(A) - 1.0)))
    return outer_lo, inner_lo, inner_hi, A - 1.0


def support_size_lower(A, C):
    """exp(C / (1 - e^-A)); the support has at least the ceiling of this many points."""
    if not A > 0:
        raise ValueError("amplitude must be positive")
    return math.exp(_exponent(A, C))


def support_size_upper_implicit(A, C, pA):
    """ceil(A - ln pA - C) + 2, with pA the optimal mass at A."""
    if not 0 < pA <= 1:
        raise ValueError("pA must lie in (0, 1]")
    return math.ceil(A - math.log(pA) - C) + 2


def support_size_upper_explicit(A, C):
    """2 e A ln^2 A + 2 ln A - A - ln((1 - 3 e^-s) / 2) - C + 4, needs e^s >= 4."""
    s = _require_four(A, C)
    lnA = math.log(A)
    return (
        2.0 * math.e * A * lnA**2
        + 2.0 * lnA
        - A
        - (math.log1p(-3.0 * math.exp(-s)) - math.log(2.0))
        - C
        + 4.0
    )


def asymptotic_capacity(A):
    """Large-A approximation 0.5 ln A - 0.5 ln(pi e / 2), in nats."""
    if not A > 0:
        raise ValueError("amplitude must be positive")
    return 0.5 * math.log(A) - 0.5 * math.log(math.pi * math.e / 2.0)


def mass_identity_check(m, C, x):
    """|ln P(x) - (-C + E[ln P(x | Y) | X = x])| for a support point x."""
    d = m.source
    i = d.index_of(x)
    kern = np.exp(m.log_kernel[i])
    log_post = m.log_posterior_matrix()[i]
    with np.errstate(invalid="ignore"):
        expected = float(np.where(kern > 0, kern * log_post, 0.0).sum())
    return abs(math.log(d.masses[i]) - (-C + expected))


MASS_SLACK = 1e-6
EQUALITY_TOL = 1e-5


@dataclass(frozen=True)
class BoundsReport:
    amplitude: float
    capacity_used: float
    capacity_source: str
    eta_upper: float
    universal_mass_bound: float
    location_mass_bounds: tuple
    largest_mass_lower_log: object
    interior_bracket: object
    support_lower: float
    support_upper_implicit: object
    support_upper_explicit: object
    asymptotic_capacity: float
    checks: dict

    @property
    def checks_passed(self):
        return all(self.checks.values())

    def failed(self):
        return [k for k, ok in self.checks.items() if not ok]

    def to_dict(self):
        def plain(v):
            if isinstance(v, Inapplicable):
                return {"inapplicable": v.reason}
            if isinstance(v, tuple):
                return [plain(u) for u in v]
            return v

        out = {
            k: plain(getattr(self, k))
            for k in (
                "amplitude",
                "capacity_used",
                "capacity_source",
                "eta_upper",
                "universal_mass_bound",
                "location_mass_bounds",
                "largest_mass_lower_log",
                "interior_bracket",
                "support_lower",
                "support_upper_implicit",
                "support_upper_explicit",
                "asymptotic_capacity",
            )
        }
        out["checks"] = dict(self.checks)
        out["checks_passed"] = self.checks_passed
        out["units"] = "nats"
        return out

    def row(self):
        """Columns used by the sweep CSV."""
        return {
            "eta_upper": self.eta_upper,
            "universal_mass_bound": self.universal_mass_bound,
            "support_lower": self.support_lower,
            "support_upper_implicit": self.support_upper_implicit,
            "checks_passed": self.checks_passed,
        }


def _or_inapplicable(fn, *args):
    try:
        return fn(*args)
    except (InapplicableBound, ValueError) as exc:
        return Inapplicable(str(exc))


def bounds_report(A, C, distribution=None, capacity_source="solver"):
    """Evaluate every bound at (A, C) and, given a distribution, check it against them.

    Checks are only recorded where they apply: the bracket needs A > e and at
    least one interior point, the equality check needs A at or below the
    binary threshold.
    """
    U = universal_mass_bound(A, C)
    bracket = _or_inapplicable(interior_location_bracket, A)
    lower = support_size_lower(A, C)
    checks = {}
    loc_bounds = ()
    implicit = Inapplicable("no distribution given")
    if isinstance(bracket, tuple):
        o_lo, i_lo, i_hi, o_hi = bracket
        checks["bracket_chain"] = o_lo <= i_lo <= i_hi <= o_hi
    if distribution is not None:
        x, p = distribution.locations, distribution.masses
        n = distribution.size
        pos = x > 0
        loc_bounds = tuple(location_mass_bound(float(xi), C) for xi in x[pos])
        checks["mass_le_universal"] = bool(np.all(p <= U + MASS_SLACK))
        checks["mass_le_location"] = bool(
            np.all(p[pos] <= np.array(loc_bounds) + MASS_SLACK)
        )
        checks["mass_le_exp_neg_capacity"] = bool(np.all(p <= math.exp(-C) + MASS_SLACK))
        checks["support_ge_lower"] = n >= math.ceil(lower)
        pA = distribution.mass_at(A)
        if pA > 0:
            implicit = support_size_upper_implicit(A, C, pA)
            checks["support_le_implicit"] = n <= implicit
        else:
            implicit = Inapplicable("no mass at A")
        interior = distribution.interior()
        if isinstance(bracket, tuple) and interior.size:
            slack = 1e-9 * A
            checks["interior_in_bracket"] = bool(
                np.all((interior >= i_lo - slack) & (interior <= i_hi + slack))
            )
        if A <= binary_threshold() and pA > 0:
            checks["location_bound_equality"] = (
                abs(location_mass_bound(A, C) - pA) <= EQUALITY_TOL
            )
    return BoundsReport(
        amplitude=A,
        capacity_used=C,
        capacity_source=capacity_source,
        eta_upper=contraction_upper(A),
        universal_mass_bound=U,
        location_mass_bounds=loc_bounds,
        largest_mass_lower_log=_or_inapplicable(largest_mass_lower_bound, A, C),
        interior_bracket=bracket,
        support_lower=lower,
        support_upper_implicit=implicit,
        support_upper_explicit=_or_inapplicable(support_size_upper_explicit, A, C),
        asymptotic_capacity=asymptotic_capacity(A),
        checks=checks,
    )
