import pytest

from fdsnn import params
from fdsnn.errors import ConfigurationError, ParameterError


class TestPresets:
    @pytest.mark.parametrize("name", ["TOY", "DESK", "LARGE"])
    def test_roundtrip_through_dict(self, name):
        p = params.preset(name)
        again = params.FheParams.from_dict(p.to_dict())
        assert again == p
        assert again.digest() == p.digest()

    def test_message_space_fits_ring(self):
        for name in ("TOY", "DESK", "LARGE"):
            p = params.preset(name)
            assert p.p <= 2 * p.N

    def test_unknown_name_rejected(self):
        with pytest.raises(ConfigurationError):
            params.preset("HUGE")

    def test_case_insensitive(self):
        assert params.preset("desk") == params.preset("DESK")

    def test_derived_quantities(self):
        p = params.preset("TOY")
        assert p.delta == p.q // p.p
        assert p.noise_bound == p.q // (2 * p.p)
        assert p.grid == p.q // (2 * p.N) or p.grid == 1

    def test_invalid_shapes_rejected(self):
        good = params.preset("TOY")
        with pytest.raises(ParameterError):
            good.with_p(12)  # not a power of two
        with pytest.raises(ParameterError):
            good.with_p(4 * good.N)  # exceeds 2N


class TestSelectP:
    def test_theta40_large_activation(self):
        assert params.select_p(40, 36.13) == 4096

    def test_theta10_if_activation(self):
        assert params.select_p(10, 23.00) == 512

    def test_degenerate_zero_max(self):
        assert params.select_p(40, 0.0) == 8

    def test_safety_margin_doubles_requirement(self):
        base = params.select_p(10, 23.00)
        assert params.select_p(10, 23.00, safety_margin=True) == 2 * base

    def test_boundary_is_inclusive(self):
        # need p/2 >= 256 exactly -> p = 512
        assert params.select_p(1, 256) == 512
        assert params.select_p(1, 257) == 1024

    def test_unattainable_p_rejected(self):
        with pytest.raises(ConfigurationError):
            params.select_p(1000, 1000.0)

    def test_negative_max_rejected(self):
        with pytest.raises(ParameterError):
            params.select_p(40, -1.0)


class TestNoiseBudget:
    def test_doubling_load_halves_margin(self):
        p = params.preset("DESK")
        one = params.noise_budget_check(p, 40, 10.0, 1.0)
        two = params.noise_budget_check(p, 40, 20.0, 1.0)
        assert two.margin == pytest.approx(one.margin / 2)

    def test_zero_weights_always_pass(self):
        p = params.preset("DESK")
        report = params.noise_budget_check(p, 40, 0.0, 5.0)
        assert report.passed and report.margin == float("inf")

    def test_violating_configuration_fails(self):
        p = params.preset("TOY")  # cap q/(2p) = 256
        report = params.noise_budget_check(p, 40, 17.42, 1.0)
        assert not report.passed and report.margin < 1.0

    def test_reports_both_bounds(self):
        p = params.preset("DESK")
        report = params.noise_budget_check(p, 40, 17.42, 2.0)
        assert report.l1_bound == pytest.approx(2.0 * 40 * 17.42)
        assert report.l2_bound < report.l1_bound
        assert report.noise_cap == p.noise_bound
