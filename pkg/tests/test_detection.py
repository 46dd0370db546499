import math

import numpy as np
import pytest
from hypothesis import given, settings

from poisson_capacity.bounds import binary_closed_form, binary_mass_at_amplitude
from poisson_capacity.dist import DiscreteDistribution, OutputModel, UndefinedPosteriorError
from poisson_capacity.detection import (
    HXY_FLOOR,
    PE_FLOOR,
    asymptotic_floors,
    detection_report,
    equivocation,
    error_probability,
    error_probability_bounds,
    error_probability_posterior_route,
    fano_holds,
    map_decode,
)
from strategies import distributions


class TestMapDecode:
    def test_binary(self):
        m = OutputModel(binary_closed_form(1.0))
        assert map_decode(m, 0) == 0.0
        for y in range(1, m.k_max + 1):
            assert map_decode(m, y) == 1.0

    def test_point_mass(self):
        m = OutputModel(DiscreteDistribution.point_mass(2.0, 4.0))
        assert all(map_decode(m, y) == 2.0 for y in range(m.k_max + 1))

    def test_tie_goes_to_smaller_location(self):
        # p_i P(1 | x_i) equal for x = 1 and x = 2 when p_1 e^-1 = p_2 2 e^-2
        p1 = 2 * math.exp(-2) / (math.exp(-1) + 2 * math.exp(-2))
        m = OutputModel(DiscreteDistribution(2.0, [1.0, 2.0], [p1, 1 - p1]))
        assert abs(m.log_joint[0, 1] - m.log_joint[1, 1]) < 1e-14
        assert map_decode(m, 1) == 1.0

    def test_undefined(self):
        m = OutputModel(DiscreteDistribution.point_mass(0.0, 1.0))
        with pytest.raises(UndefinedPosteriorError):
            map_decode(m, 1)


class TestErrorProbability:
    def test_point_mass(self):
        assert error_probability(OutputModel(DiscreteDistribution.point_mass(0.3, 1.0))) == pytest.approx(0.0, abs=1e-14)

    def test_binary_closed_form(self):
        for A in (0.3, 1.0, 2.5):
            m = OutputModel(binary_closed_form(A))
            assert error_probability(m) == pytest.approx(binary_mass_at_amplitude(A) * math.exp(-A), abs=1e-13)
        assert error_probability(OutputModel(binary_closed_form(1.0))) == pytest.approx(0.151910, abs=1e-6)

    def test_reference_amplitude(self):
        m = OutputModel(binary_closed_form(0.377778))
        assert error_probability(m) == pytest.approx(0.264434213299954, abs=1e-6)

    def test_uncertainty_is_tail(self):
        m = OutputModel(binary_closed_form(3.0))
        pe, unc = error_probability_bounds(m)
        assert 0 < unc <= 1e-14

    @settings(max_examples=150)
    @given(distributions())
    def test_routes_and_inequalities(self, d):
        m = OutputModel(d)
        pe = error_probability(m)
        assert pe == pytest.approx(error_probability_posterior_route(m), abs=1e-9)
        assert -1e-12 <= pe <= 1 - d.masses.max() + 1e-12
        assert equivocation(m) / math.log(2) >= 2 * pe - 1e-9


def test_entropy_bound_needs_bits():
    # with natural logs the bound fails on this law; in bits it holds
    m = OutputModel(DiscreteDistribution(1.0, [0.0, 0.5], [0.5, 0.5]))
    hxy, pe = equivocation(m), error_probability(m)
    assert hxy < 2 * pe
    assert fano_holds(hxy, pe)


class TestEquivocation:
    def test_point_mass(self):
        assert equivocation(OutputModel(DiscreteDistribution.point_mass(1.0, 1.0))) == pytest.approx(0.0, abs=1e-14)

    def test_reference_amplitude(self):
        m = OutputModel(binary_closed_form(0.377778))
        assert equivocation(m) == pytest.approx(0.537432353443274, abs=1e-6)


class TestFloorsAndReport:
    def test_floors(self):
        pe, hxy = asymptotic_floors()
        assert pe == pytest.approx(0.20211543919713464, rel=1e-15)
        assert hxy == 2 * pe
        assert detection_report(OutputModel(binary_closed_form(1.0))).asymptotic_hxy_floor_nats == pytest.approx(math.log(2) * hxy)
        assert (PE_FLOOR, HXY_FLOOR) == (pe, hxy)

    def test_report(self):
        r = detection_report(OutputModel(binary_closed_form(1.0)))
        assert r.hxy == pytest.approx(r.hx - r.mi, abs=1e-12)
        assert r.fano_ok
        assert r.to_dict()["units"] == "nats"

    def test_sweep_entropy_bound(self, solved_sweep):
        for res in solved_sweep[0]:
            assert detection_report(OutputModel(res.distribution)).fano_ok

    def test_fifteen_below_floor(self, solved_by_amplitude):
        r = detection_report(OutputModel(solved_by_amplitude[15.0].distribution))
        assert r.pe == pytest.approx(0.118488377046045, abs=1e-4)
        assert r.pe < r.asymptotic_pe_floor
        assert r.fano_ok
