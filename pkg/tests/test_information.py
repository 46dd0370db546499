import math

import numpy as np
import pytest
from hypothesis import assume, example, given, settings

import oracles
from poisson_capacity.bounds import binary_capacity, binary_closed_form
from poisson_capacity.dist import DiscreteDistribution, OutputModel
from poisson_capacity.information import (
    g_function,
    g_second_derivative,
    info_density,
    info_density_derivative,
    info_density_second_derivative,
    k_star,
    mutual_information,
    mutual_information_entropy_route,
    psi_sequence,
    psi_values,
    sign_changes,
    xlogx,
)
from strategies import distributions

C_1 = 0.30249015717415578  # 50-digit value of the two-point capacity at A = 1


@pytest.fixture(scope="module")
def binary_one():
    return OutputModel(binary_closed_form(1.0))


def _interior_points(d, rng, n=5):
    lo = max(1e-3, 1e-3 * d.amplitude)
    return rng.uniform(lo, d.amplitude * (1 - 1e-3), n)


class TestInfoDensity:
    def test_at_zero(self, binary_one):
        assert info_density(binary_one, 0.0) == -binary_one.log_py[0]

    def test_equals_capacity_on_support(self, binary_one):
        assert info_density(binary_one, 1.0) == pytest.approx(C_1, abs=1e-13)
        assert info_density(binary_one, 0.0) == pytest.approx(C_1, abs=1e-13)

    def test_below_capacity_off_support(self, binary_one):
        x = np.linspace(0.0, 1.0, 201)
        assert np.all(info_density(binary_one, x) <= C_1 + 1e-12)
        assert info_density(binary_one, 0.5) < C_1

    def test_matches_scipy_oracle(self):
        d = DiscreteDistribution(6.0, [0.0, 1.7, 6.0], [0.4, 0.2, 0.4])
        m = OutputModel(d)
        x = np.linspace(0, 6, 13)
        np.testing.assert_allclose(
            info_density(m, x), oracles.density(x, d.locations, d.masses, m.k_max), atol=1e-12
        )

    def test_outside_range(self, binary_one):
        with pytest.raises(ValueError):
            info_density(binary_one, 1.5)


class TestMutualInformation:
    def test_point_mass(self):
        assert mutual_information(OutputModel(DiscreteDistribution.point_mass(2.0, 3.0))) == pytest.approx(0.0, abs=1e-14)

    def test_binary_one(self, binary_one):
        assert mutual_information(binary_one) == pytest.approx(C_1, abs=1e-13)

    def test_near_unit_amplitude(self):
        m = OutputModel(binary_closed_form(1.03030303))
        assert mutual_information(m) == pytest.approx(0.30971929893246, abs=1e-9)

    @settings(max_examples=100)
    @given(distributions())
    def test_two_routes(self, d):
        m = OutputModel(d)
        assert mutual_information(m) == pytest.approx(mutual_information_entropy_route(m), abs=1e-9)


class TestDerivatives:
    def test_singular_at_origin(self, binary_one):
        for fn in (info_density_derivative, info_density_second_derivative):
            with pytest.raises(ValueError):
                fn(binary_one, 0.0)
            with pytest.raises(ValueError):
                fn(binary_one, 1e-9)

    def test_point_mass_sign_change(self):
        a = 2.5
        m = OutputModel(DiscreteDistribution.point_mass(a, 5.0))
        x = np.linspace(0.05, 5.0, 400)
        d1 = info_density_derivative(m, x)
        assert np.all(d1[x < a - 1e-9] < 0) and np.all(d1[x > a + 1e-9] > 0)
        assert sign_changes(d1) == 1

    def test_xlogx(self):
        np.testing.assert_array_equal(xlogx([0.0, 1.0]), [0.0, 0.0])
        assert float(xlogx(math.e)) == pytest.approx(math.e)

    @settings(max_examples=300)
    @given(distributions())
    def test_decomposition(self, d):
        m = OutputModel(d)
        x = np.concatenate([[0.0, d.amplitude], np.linspace(0, d.amplitude, 7)])
        lhs = info_density(m, x)
        rhs = g_function(m, x) + xlogx(x) - x
        np.testing.assert_allclose(lhs, rhs, atol=1e-9)

    @settings(max_examples=300)
    @given(distributions())
    def test_first_derivative_finite_difference(self, d):
        # a point mass at 0 makes i(x) infinite for every x > 0
        assume(d.locations[-1] > 0)
        m = OutputModel(d)
        h = 1e-5
        x = _interior_points(d, np.random.default_rng(0))
        x = x[(x - h > 0) & (x + h < d.amplitude)]
        fd = (info_density(m, x + h) - info_density(m, x - h)) / (2 * h)
        np.testing.assert_allclose(info_density_derivative(m, x), fd, atol=1e-5)

    @settings(max_examples=300)
    @given(distributions())
    def test_second_derivative_finite_difference(self, d):
        # a point mass at 0 makes i(x) infinite for every x > 0
        assume(d.locations[-1] > 0)
        m = OutputModel(d)
        h = 1e-5
        x = _interior_points(d, np.random.default_rng(1))
        x = x[(x - h > 1e-3) & (x + h < d.amplitude)]
        fd = (info_density_derivative(m, x + h) - info_density_derivative(m, x - h)) / (2 * h)
        np.testing.assert_allclose(info_density_second_derivative(m, x), fd, rtol=1e-4, atol=1e-4)

    @settings(max_examples=150)
    @given(distributions(min_gap=1e-2))
    # x**2 underflows for a point at the smallest normal float
    @example(DiscreteDistribution(1.0, [2.2250738585072014e-308], [1.0]))
    def test_second_derivative_forms_agree(self, d):
        m = OutputModel(d)
        x = _interior_points(d, np.random.default_rng(2), 3)
        ok = np.isfinite(m.log_py)
        if not ok.all() or np.any(m.posterior_mean <= 0):
            return
        np.testing.assert_allclose(
            g_second_derivative(m, x, "ratio"), g_second_derivative(m, x, "moment"), atol=1e-9
        )

    def test_unknown_form(self, binary_one):
        with pytest.raises(ValueError):
            g_second_derivative(binary_one, 0.5, "other")


class TestPsi:
    def test_k_star_example(self):
        assert k_star(1.0, 0.30228, 0.412935) == 2

    def test_binary_psi_zero(self, binary_one):
        ps = psi_sequence(binary_one, C_1, binary_one.source.mass_at(1.0))
        assert ps.k_star == 2
        assert ps.values[0] == pytest.approx(0.0, abs=1e-12)
        assert np.all(np.isfinite(ps.values))

    def test_psi_nonnegative_past_k_star(self, binary_one):
        ps = psi_sequence(binary_one, C_1, binary_one.source.mass_at(1.0))
        tail = psi_values(binary_one, C_1, np.arange(ps.k_star, ps.k_star + 40))
        assert np.all(tail >= -1e-12)

    def test_requires_mass_at_amplitude(self):
        m = OutputModel(DiscreteDistribution(2.0, [0.0, 1.0], [0.5, 0.5]))
        with pytest.raises(ValueError):
            psi_sequence(m, 0.3, 0.5)

    def test_psi_past_truncation_matches_formula(self, binary_one):
        # beyond k_max the values come from direct P_Y evaluation
        k = binary_one.k_max + 5
        p = binary_one.source.mass_at(1.0)
        py = p * math.exp(-1.0) / math.factorial(k)
        expected = math.log(math.factorial(k) * py) + C_1 + k  # E[X|Y] = 1 so the first term is 0
        assert psi_values(binary_one, C_1, [k])[0] == pytest.approx(expected, abs=1e-10)


class TestSignChanges:
    @pytest.mark.parametrize(
        "seq, expected",
        [([1, -1, 1], 2), ([1, 0, -1], 1), ([0, 0, 0], 0), ([], 0), ([2, 1e-15, -1], 1),
         ([1, 1e-13, 1, -1e-13, 1], 0), ([-3, 2, 2, -1, 0, 4], 3)],
    )
    def test_examples(self, seq, expected):
        assert sign_changes(seq) == expected
