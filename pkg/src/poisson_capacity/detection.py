"""MAP symbol detection on the optimal input, error probability and equivocation."""

import math
from dataclasses import asdict, dataclass

import numpy as np

from .channel import LOG_ZERO, upper_tail
from .dist import UndefinedPosteriorError, entropy
from .information import mutual_information

PE_FLOOR = 1.0 - math.sqrt(2.0 / math.pi)
# H(X|Y) >= 2 P_e holds with base-2 logarithms, so this floor is in bits
HXY_FLOOR = 2.0 * PE_FLOOR
HXY_FLOOR_NATS = math.log(2.0) * HXY_FLOOR
TIE_TOL = 1e-12  # joint log-probabilities this close count as tied


def map_decode(m, y):
    """Support point maximizing p_i P(y | x_i).

    Candidates within 1e-12 of the best joint log-probability are treated as
    tied, and the smallest such location wins.
    """
    m._check_y(y)
    if m.log_py[y] == LOG_ZERO:
        raise UndefinedPosteriorError(f"P_Y({y}) = 0")
    col = m.log_joint[:, y]
    first = np.flatnonzero(col >= col.max() - TIE_TOL)[0]
    return float(m.source.locations[first])


def error_probability_bounds(m):
    """(P_e, uncertainty) for the MAP rule over the retained outputs.

    The outputs past k_max carry at most the Poisson tail at x = A, which is
    reported as the uncertainty.
    """
    correct = float(np.exp(m.log_joint.max(axis=0)).sum())
    tail = upper_tail(m.amplitude, m.k_max)
    pe = min(max(1.0 - correct, 0.0), 1.0)
    return pe, tail


def error_probability(m):
    """P_e = 1 - sum_y max_i p_i P(y | x_i)."""
    return error_probability_bounds(m)[0]


def error_probability_posterior_route(m):
    """1 - E[max_x P(x | Y)], the same quantity through the posterior."""
    post = np.exp(m.log_posterior_matrix().max(axis=0))
    return 1.0 - float(np.where(m.py > 0, m.py * post, 0.0).sum())


def equivocation(m):
    """H(X | Y) = H(X) - I(X; Y) in nats."""
    return entropy(m.source) - mutual_information(m)


def asymptotic_floors():
    """Large-A limits (1 - sqrt(2/pi), 2 (1 - sqrt(2/pi))) for P_e and H(X|Y).

    The second value comes from H(X|Y) >= 2 P_e and is in bits; multiply by
    ln 2 for nats.
    """
    return PE_FLOOR, HXY_FLOOR


def fano_holds(hxy_nats, pe, slack=1e-9):
    """H(X|Y) >= 2 P_e with the entropy in bits."""
    return hxy_nats / math.log(2.0) >= 2.0 * pe - slack


@dataclass(frozen=True)
class DetectionReport:
    pe: float
    pe_uncertainty: float
    hx: float
    mi: float
    hxy: float
    fano_ok: bool
    asymptotic_pe_floor: float = PE_FLOOR
    asymptotic_hxy_floor: float = HXY_FLOOR
    asymptotic_hxy_floor_nats: float = HXY_FLOOR_NATS

    def to_dict(self):
        return {**asdict(self), "units": "nats"}


def detection_report(m):
    pe, unc = error_probability_bounds(m)
    hx = entropy(m.source)
    mi = mutual_information(m)
    hxy = hx - mi
    return DetectionReport(pe, unc, hx, mi, hxy, fano_holds(hxy, pe))
