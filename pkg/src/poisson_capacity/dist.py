"""Finitely supported input laws on [0, A] and the output model they induce."""

import math

import numpy as np
from scipy.special import logsumexp

from .channel import (
    LOG_ZERO,
    SOLVER_EPSILON,
    Truncation,
    log_kernel,
    log_output_pmf,
    truncation_index,
)

MASS_SUM_TOL = 1e-12
MIN_SEPARATION = 1e-9  # relative to A


class UndefinedPosteriorError(ValueError):
    """Raised when conditioning on an output with zero probability."""


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class DiscreteDistribution:
    """Input law with strictly increasing ``locations`` in [0, amplitude].

    Every mass must be positive and the masses must sum to one within 1e-12.
    Points closer than 1e-9 * amplitude are rejected; merge them first.
    """

    __slots__ = ("amplitude", "locations", "masses")

    def __init__(self, amplitude, locations, masses):
        amplitude = float(amplitude)
        locations = _readonly(locations).ravel()
        masses = _readonly(masses).ravel()
        if not amplitude > 0:
            raise ValueError("amplitude must be positive")
        if locations.size == 0 or locations.size != masses.size:
            raise ValueError("locations and masses must be non-empty and of equal length")
        if np.any(locations < 0) or np.any(locations > amplitude):
            raise ValueError("locations must lie in [0, amplitude]")
        if np.any(np.diff(locations) <= MIN_SEPARATION * amplitude):
            raise ValueError("locations must be strictly increasing and separated")
        if np.any(masses <= 0):
            raise ValueError("masses must be positive")
        if abs(masses.sum() - 1.0) > MASS_SUM_TOL:
            raise ValueError(f"masses sum to {masses.sum():.17g}, not 1")
        object.__setattr__(self, "amplitude", amplitude)
        object.__setattr__(self, "locations", locations)
        object.__setattr__(self, "masses", masses)

    def __setattr__(self, name, value):
        raise AttributeError("DiscreteDistribution is immutable")

    def __repr__(self):
        return (
            f"DiscreteDistribution(amplitude={self.amplitude!r}, "
            f"locations={self.locations.tolist()!r}, masses={self.masses.tolist()!r})"
        )

    def __eq__(self, other):
        if not isinstance(other, DiscreteDistribution):
            return NotImplemented
        return (
            self.amplitude == other.amplitude
            and np.array_equal(self.locations, other.locations)
            and np.array_equal(self.masses, other.masses)
        )

    __hash__ = None

    @classmethod
    def point_mass(cls, location, amplitude):
        return cls(amplitude, [location], [1.0])

    @classmethod
    def from_weights(cls, amplitude, locations, weights):
        """Build from nonnegative weights: zero weights dropped, rest normalized."""
        locations = np.asarray(locations, dtype=float)
        weights = np.asarray(weights, dtype=float)
        keep = weights > 0
        order = np.argsort(locations[keep], kind="stable")
        w = weights[keep][order]
        return cls(amplitude, locations[keep][order], w / w.sum())

    @property
    def size(self):
        return int(self.locations.size)

    @property
    def log_masses(self):
        return np.log(self.masses)

    def mean(self):
        return float(self.locations @ self.masses)

    def index_of(self, x, rtol=1e-9):
        """Index of the support point at ``x`` (within rtol * A), else KeyError."""
        i = int(np.argmin(np.abs(self.locations - x)))
        if abs(self.locations[i] - x) > rtol * self.amplitude:
            raise KeyError(f"{x!r} is not a support point")
        return i

    def mass_at(self, x):
        """Mass at ``x``; zero if ``x`` is not a support point."""
        try:
            return float(self.masses[self.index_of(x)])
        except KeyError:
            return 0.0

    def contains(self, x, rtol=1e-9):
        return bool(np.any(np.abs(self.locations - x) <= rtol * self.amplitude))

    def second_largest(self):
        """Largest support point other than the amplitude itself, or None."""
        below = self.locations[self.locations < self.amplitude * (1 - 1e-12)]
        return float(below[-1]) if below.size else None

    def interior(self):
        """Support points strictly inside (0, A)."""
        x = self.locations
        return x[(x > 0) & (x < self.amplitude * (1 - 1e-12))]


def entropy(d):
    """H(X) = -sum p ln p in nats."""
    return float(-(d.masses @ np.log(d.masses)))


class OutputModel:
    """Output pmf P_Y and posterior means E[X | Y = y] for y = 0..k_max.

    Both are computed once, in the log domain, when the model is built. The
    default truncation covers every input in [0, A] with tail mass at most
    ``epsilon``.
    """

    def __init__(self, source, truncation=None, epsilon=SOLVER_EPSILON):
        if truncation is None:
            truncation = truncation_index(source.amplitude, epsilon)
        if truncation.x_ref < source.locations[-1]:
            raise ValueError("truncation does not cover the support")
        self.source = source
        self.truncation = truncation
        k_max = truncation.k_max
        # n x (k_max + 1) joint log-probabilities ln p_i + ln P(k | x_i)
        self.log_kernel = log_kernel(source.locations, k_max)
        self.log_joint = self.log_kernel + source.log_masses[:, None]
        self.log_py = logsumexp(self.log_joint, axis=0)
        self.posterior_mean = self._posterior_means(self.log_joint, self.log_py)
        for a in (self.log_kernel, self.log_joint, self.log_py, self.posterior_mean):
            a.setflags(write=False)

    def _posterior_means(self, log_joint, log_py):
        x = self.source.locations
        pos = x > 0
        out = np.full(log_py.shape, math.nan)
        defined = np.isfinite(log_py)
        if pos.any():
            num = logsumexp(log_joint[pos] + np.log(x[pos])[:, None], axis=0)
            out[defined] = np.exp(num[defined] - log_py[defined])
        else:
            out[defined] = 0.0
        return np.minimum(out, self.source.amplitude)

    @property
    def k_max(self):
        return self.truncation.k_max

    @property
    def amplitude(self):
        return self.source.amplitude

    @property
    def py(self):
        return np.exp(self.log_py)

    def _check_y(self, y):
        if not 0 <= y <= self.k_max:
            raise IndexError(f"output {y} outside the truncation 0..{self.k_max}")

    def output_pmf(self, y):
        self._check_y(y)
        return float(math.exp(self.log_py[y]))

    def log_output_pmf(self, ys):
        """ln P_Y(y) for arbitrary y >= 0, computed directly past the cache."""
        ys = np.atleast_1d(ys)
        out = np.empty(ys.shape)
        inside = ys <= self.k_max
        out[inside] = self.log_py[ys[inside]]
        if (~inside).any():
            out[~inside] = log_output_pmf(
                self.source.locations, self.source.log_masses, ys[~inside]
            )
        return out

    def posterior_mean_at(self, y):
        self._check_y(y)
        if self.log_py[y] == LOG_ZERO:
            raise UndefinedPosteriorError(f"P_Y({y}) = 0")
        return float(self.posterior_mean[y])

    def posterior_mean_bayes(self, y):
        """E[X | Y = y] through (y + 1) P_Y(y + 1) / P_Y(y)."""
        lp = self.log_output_pmf(np.array([y, y + 1]))
        if lp[0] == LOG_ZERO:
            raise UndefinedPosteriorError(f"P_Y({y}) = 0")
        return float((y + 1) * math.exp(lp[1] - lp[0]))

    def posterior_moment(self, y, order):
        """E[X**order | Y = y] by direct summation over the support."""
        self._check_y(y)
        if self.log_py[y] == LOG_ZERO:
            raise UndefinedPosteriorError(f"P_Y({y}) = 0")
        x = self.source.locations
        w = np.exp(self.log_joint[:, y] - self.log_py[y])
        return float(w @ x**order)

    def log_posterior_matrix(self):
        """ln P(x_i | y) for all support points and retained outputs."""
        with np.errstate(invalid="ignore"):
            return self.log_joint - self.log_py[None, :]

    def posterior(self, x, y):
        self._check_y(y)
        if self.log_py[y] == LOG_ZERO:
            raise UndefinedPosteriorError(f"P_Y({y}) = 0")
        i = self.source.index_of(x)
        return float(math.exp(self.log_joint[i, y] - self.log_py[y]))


def output_pmf(d, y):
    """P_Y(y) for the law ``d`` (or an :class:`OutputModel`)."""
    if isinstance(d, OutputModel):
        return d.output_pmf(y)
    return float(math.exp(log_output_pmf(d.locations, d.log_masses, [y])[0]))


def posterior_mean(m, y):
    return m.posterior_mean_at(y)


def posterior(m, x, y):
    return m.posterior(x, y)


def build_model(d, epsilon=SOLVER_EPSILON, truncation: Truncation = None):
    return OutputModel(d, truncation=truncation, epsilon=epsilon)
