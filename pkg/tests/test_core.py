import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import all_level_patterns, ex1, levels_to_tuple, suite_instance
from sitepower.core import (
    Instance,
    InstanceDataError,
    Solution,
    is_served,
    objective,
    received_power,
    sinr,
    verify_solution,
)


class TestInstanceInvariants:
    def test_valid_construction(self):
        inst = ex1()
        assert inst.n_levels == 1
        assert inst.noise_scaled == 1.0

    def test_power_must_be_positive(self):
        with pytest.raises(InstanceDataError, match="strictly positive"):
            ex1_mod(power_values=[0.0])

    def test_powers_strictly_increasing(self):
        with pytest.raises(InstanceDataError, match="strictly increasing"):
            ex1_mod(power_values=[10.0, 10.0], level_costs=[1.0, 2.0])

    def test_costs_nondecreasing(self):
        with pytest.raises(InstanceDataError, match="nondecreasing"):
            ex1_mod(power_values=[10.0, 20.0], level_costs=[2.0, 1.0])

    def test_costs_positive(self):
        with pytest.raises(InstanceDataError, match="positive"):
            ex1_mod(level_costs=[0.0])

    def test_cost_per_level(self):
        with pytest.raises(InstanceDataError, match="one cost per power level"):
            ex1_mod(power_values=[10.0, 20.0])

    def test_fading_positive(self):
        with pytest.raises(InstanceDataError, match="fading"):
            ex1_mod(fading=[[2.0, 0.0], [0.5, 2.0]])

    def test_alpha_range(self):
        with pytest.raises(InstanceDataError, match="coverage target"):
            ex1_mod(coverage_target=3)
        ex1_mod(coverage_target=0)  # boundary is fine

    def test_noise_and_threshold_positive(self):
        with pytest.raises(InstanceDataError):
            ex1_mod(noise=0.0)
        with pytest.raises(InstanceDataError):
            ex1_mod(sinr_threshold=-1.0)

    def test_fading_shape_checked(self):
        with pytest.raises(InstanceDataError, match="shape"):
            ex1_mod(fading=[[2.0, 0.5]])

    def test_immutable(self):
        inst = ex1()
        with pytest.raises(Exception):
            inst.fading[0, 0] = 9.0


def ex1_mod(**kwargs):
    base = dict(
        n_transmitters=2, n_testpoints=2, power_values=[10.0], level_costs=[1.0],
        fading=[[2.0, 0.5], [0.5, 2.0]], noise=1.0, sinr_threshold=1.0,
        coverage_target=2,
    )
    base.update(kwargs)
    return Instance(**base)


class TestReceivedPower:
    def test_direct_products(self, ex1_alpha2):
        assert received_power(ex1_alpha2, 0, 0, 0) == 20.0
        assert received_power(ex1_alpha2, 0, 1, 0) == 5.0

    def test_index_errors(self, ex1_alpha2):
        with pytest.raises(IndexError):
            received_power(ex1_alpha2, 2, 0, 0)
        with pytest.raises(IndexError):
            received_power(ex1_alpha2, 0, 2, 0)
        with pytest.raises(IndexError):
            received_power(ex1_alpha2, 0, 0, 1)

    def test_scale_factor_applied(self):
        inst = ex1_mod(scale_factor=1e-10)
        assert received_power(inst, 0, 0, 0) == pytest.approx(20e-10)


class TestSinr:
    def test_single_server_no_interference(self, ex1_alpha2):
        assert sinr(ex1_alpha2, (0, None), 0, 0) == pytest.approx(20.0)

    def test_both_active(self, ex1_alpha2):
        assert sinr(ex1_alpha2, (0, 0), 0, 0) == pytest.approx(10.0 / 3.0)
        assert sinr(ex1_alpha2, (0, 0), 0, 1) == pytest.approx(5.0 / 21.0)

    def test_inactive_server_rejected(self, ex1_alpha2):
        with pytest.raises(ValueError, match="no serving power"):
            sinr(ex1_alpha2, (None, 0), 0, 0)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 10_000), factor_exp=st.integers(-12, 6))
    def test_scale_invariance(self, seed, factor_exp):
        # common scaling of noise and all received powers cancels in the ratio
        inst = suite_instance(seed % 50)
        rng = np.random.default_rng(seed)
        levels = tuple(int(l) if l >= 0 else None
                       for l in rng.integers(-1, inst.n_levels, inst.n_transmitters))
        if all(l is None for l in levels):
            return
        beta = next(b for b, l in enumerate(levels) if l is not None)
        t = int(rng.integers(0, inst.n_testpoints))
        scaled = Instance(
            inst.n_transmitters, inst.n_testpoints, inst.power_values,
            inst.level_costs, inst.fading, inst.noise, inst.sinr_threshold,
            inst.coverage_target, scale_factor=10.0 ** factor_exp)
        a, b = sinr(inst, levels, t, beta), sinr(scaled, levels, t, beta)
        assert a == pytest.approx(b, rel=1e-12)

    def test_cross_multiplied_matches_ratio_form(self):
        # coverage decisions agree with the division form of the threshold
        # test across 1000 random activations
        rng = np.random.default_rng(42)
        checked = 0
        for seed in range(40):
            inst = suite_instance(seed)
            for _ in range(25):
                levels = tuple(int(l) if l >= 0 else None
                               for l in rng.integers(-1, inst.n_levels, inst.n_transmitters))
                t = int(rng.integers(0, inst.n_testpoints))
                for beta, lev in enumerate(levels):
                    if lev is None:
                        continue
                    served = is_served(inst, levels, t, beta)
                    ratio_form = sinr(inst, levels, t, beta) >= inst.sinr_threshold
                    margin = abs(sinr(inst, levels, t, beta) - inst.sinr_threshold)
                    if margin > 1e-7:  # away from the tolerance knife edge
                        assert served == ratio_form
                    checked += 1
        assert checked >= 1000


class TestVerifySolution:
    def test_single_transmitter_covers_both(self, ex1_alpha2):
        sol = Solution(server=(0, 0), level=(0, None))
        report = verify_solution(ex1_alpha2, sol)
        assert report.feasible
        assert report.served_count == 2

    def test_assignment_to_inactive_transmitter(self, ex1_alpha2):
        sol = Solution(server=(0, None), level=(None, None))
        report = verify_solution(ex1_alpha2, sol)
        kinds = [v.kind for v in report.violations]
        assert "inactive_server" in kinds

    def test_sinr_violation_and_coverage(self, ex1_alpha2):
        # t0 served by b1 while both transmit: SINR 5/21 < 1
        sol = Solution(server=(1, None), level=(0, 0))
        report = verify_solution(ex1_alpha2, sol)
        kinds = sorted(v.kind for v in report.violations)
        assert kinds == ["coverage_shortfall", "sinr_below_threshold"]
        assert report.served_count == 1

    def test_slack_inconsistency(self, ex1_alpha2):
        slack = np.array([[1, 1], [0, 1]])  # slack[0][0] must be 0
        sol = Solution(server=(0, 0), level=(0, None), slack=slack)
        report = verify_solution(ex1_alpha2, sol)
        assert any(v.kind == "slack_inconsistent" for v in report.violations)

    def test_feasible_objective_matches_raw_encoding(self):
        for seed in range(10):
            inst = suite_instance(seed)
            levels = [None] * inst.n_transmitters
            levels[0] = inst.n_levels - 1
            sol = Solution(server=tuple([None] * inst.n_testpoints), level=tuple(levels))
            manual = sum(inst.level_costs[l] for l in levels if l is not None)
            assert objective(inst, sol) == pytest.approx(manual)


class TestObjective:
    def test_empty_activation(self, ex1_alpha2):
        assert objective(ex1_alpha2, Solution(server=(None, None), level=(None, None))) == 0.0

    def test_paper_cost_vector(self):
        inst = ex1_mod(power_values=[20.0, 40.0, 80.0], level_costs=[1.0, 2.0, 4.0])
        sol = Solution(server=(None, None), level=(2, None))
        assert objective(inst, sol) == 4.0

    def test_two_transmitters(self):
        inst = ex1_mod(power_values=[10.0, 20.0], level_costs=[1.0, 2.0])
        sol = Solution(server=(None, None), level=(0, 1))
        assert objective(inst, sol) == 3.0


class TestSolutionEncoding:
    def test_one_server_by_construction(self):
        # the encoding cannot represent two servers for one testpoint
        sol = Solution(server=(1,), level=(None, 0))
        assert sol.server == (1,)
        assert sol.served_count() == 1

    def test_slack_shape_checked(self):
        with pytest.raises(ValueError, match="slack shape"):
            Solution(server=(0, 0), level=(0, None), slack=np.zeros((1, 2)))

    def test_equality_with_slack(self):
        a = Solution(server=(0,), level=(0, None), slack=np.array([[0, 1]]))
        b = Solution(server=(0,), level=(0, None), slack=np.array([[0, 1]]))
        c = Solution(server=(0,), level=(0, None))
        assert a == b
        assert a != c
