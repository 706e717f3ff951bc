import numpy as np
import pytest

from helpers import ex1, suite_instance
from sitepower.bnb import (
    BnbConfig,
    BnbMipSolver,
    Framework,
    SolveConfig,
    _pick_branch_column,
    _priority_ranks,
    branch_and_bound,
    solve_framework,
)
from sitepower.core import Instance, verify_solution
from sitepower.formulation import (
    VarRole,
    big_m_base,
    build_natural,
    build_reformulated,
)
from sitepower.lp import DenseSimplexBackend, HighsBackend, InstanceInfeasibleError
from sitepower.oracle import brute_force


class TestFrameworkNames:
    def test_paper_labels(self):
        assert Framework.parse("R+PBw+RCF") is Framework.R_PBW_RCF
        assert Framework.parse("n+pbx") is Framework.N_PBX
        assert Framework.parse("N_RCF") is Framework.N_RCF
        assert Framework.parse("N") is Framework.N

    def test_unknown_label(self):
        with pytest.raises(ValueError, match="unknown framework"):
            Framework.parse("B&C")

    def test_component_flags(self):
        assert Framework.R_PBW.formulation == "reformulated"
        assert Framework.R_PBW.scheme == "PBw"
        assert not Framework.R_PBW.rcf
        assert Framework.N_RCF.rcf


class TestBranchSelection:
    def test_priority_class_beats_fractionality(self, ex1_alpha2):
        model = build_reformulated(ex1_alpha2, big_m_base(ex1_alpha2))
        ranks = _priority_ranks(model, "PBw")
        point = np.zeros(model.n_cols)
        w_col = model.w_col(0, 0)
        x_col = model.x_col(1, 1)
        point[w_col] = 0.9   # barely fractional, top class
        point[x_col] = 0.5   # most fractional, lower class
        chosen = _pick_branch_column(point, np.array([w_col, x_col]), ranks)
        assert chosen == w_col

    def test_most_fractional_within_class_then_lowest_index(self, ex1_alpha2):
        model = build_natural(ex1_alpha2, big_m_base(ex1_alpha2))
        ranks = _priority_ranks(model, "none")
        point = np.zeros(model.n_cols)
        point[[1, 2, 3]] = [0.2, 0.5, 0.5]
        assert _pick_branch_column(point, np.array([1, 2, 3]), ranks) == 2

    def test_scheme_rank_tables(self, ex1_alpha2):
        model = build_reformulated(ex1_alpha2, big_m_base(ex1_alpha2))
        pbw = _priority_ranks(model, "PBw")
        pbx = _priority_ranks(model, "PBx")
        roles = [v.role for v in model.variables]
        for col, role in enumerate(roles):
            assert pbw[col] == {VarRole.W: 2, VarRole.X: 1, VarRole.Z: 0}[role]
            assert pbx[col] == (1 if role is VarRole.X else 0)


class TestBranchAndBound:
    def test_integral_root_needs_one_node(self):
        # alpha = 0: the all-zero LP optimum is already integral
        inst = ex1(alpha=0)
        model = build_natural(inst, big_m_base(inst))
        res = branch_and_bound(model, BnbConfig(), DenseSimplexBackend())
        assert res.status == "optimal"
        assert res.objective == pytest.approx(0.0)
        assert res.node_count == 1

    def test_ex1_all_schemes(self, ex1_alpha2):
        table = big_m_base(ex1_alpha2)
        for scheme, build in (("none", build_natural), ("PBx", build_natural),
                              ("none", build_reformulated), ("PBw", build_reformulated)):
            model = build(ex1_alpha2, table)
            res = branch_and_bound(model, BnbConfig(priority_scheme=scheme),
                                   DenseSimplexBackend())
            assert res.status == "optimal"
            assert res.objective == pytest.approx(1.0, abs=1e-9)
            assert res.proven and res.gap == 0.0

    def test_infeasible_model(self):
        inst = Instance(2, 2, [10.0], [1.0],
                        [[2.0, 2.05], [2.05, 2.0]], 1.0, 1.0, 2)
        # force both transmitters on: coverage is then unreachable
        model = build_natural(inst, big_m_base(inst))
        overrides = {model.z_col(0, 0): (1.0, 1.0), model.z_col(1, 0): (1.0, 1.0)}
        res = branch_and_bound(model, BnbConfig(), DenseSimplexBackend(),
                               root_overrides=overrides)
        assert res.status == "infeasible"

    def test_node_limit_reported_unproven(self):
        inst = suite_instance(7)
        model = build_reformulated(inst, big_m_base(inst))
        res = branch_and_bound(model, BnbConfig(priority_scheme="PBw", node_limit=5),
                               HighsBackend())
        assert res.status == "limit"
        assert not res.proven

    def test_bound_sandwich_along_the_tree(self):
        # child node bounds never undercut the parent bound (minimization)
        for seed in (0, 2, 5):
            inst = suite_instance(seed)
            model = build_natural(inst, big_m_base(inst))
            res = branch_and_bound(model, BnbConfig(trace=True), DenseSimplexBackend())
            for entry in res.trace:
                if np.isfinite(entry.parent_bound):
                    assert entry.bound >= entry.parent_bound - 1e-6

    def test_incumbent_seed_prunes(self, ex1_alpha2):
        from sitepower.formulation import encode_point, extend_solution
        from sitepower.core import Solution
        model = build_reformulated(ex1_alpha2, big_m_base(ex1_alpha2))
        sol = extend_solution(Solution(server=(0, 0), level=(0, None)))
        point = encode_point(model, sol)
        res = branch_and_bound(model, BnbConfig(), DenseSimplexBackend(),
                               incumbent=(point, 1.0))
        assert res.status == "optimal"
        assert res.objective == pytest.approx(1.0)

    def test_accept_gate_counts_rejections(self, ex1_alpha2):
        model = build_natural(ex1_alpha2, big_m_base(ex1_alpha2))
        res = branch_and_bound(model, BnbConfig(), DenseSimplexBackend(),
                               accept=lambda point: False)
        assert res.status == "infeasible"
        assert res.rejected_incumbents > 0


class TestSolveFramework:
    def test_all_frameworks_match_oracle_on_ex1(self, ex1_alpha2):
        want = brute_force(ex1_alpha2).objective
        for fw in Framework:
            report, sol = solve_framework(ex1_alpha2, fw,
                                          SolveConfig(lp_backend="reference"))
            assert report.objective == pytest.approx(want, abs=1e-9)
            assert verify_solution(ex1_alpha2, sol).feasible
            assert report.proven

    def test_rcf_report_attached_with_timings(self):
        inst = suite_instance(1)
        report, _ = solve_framework(inst, Framework.N_RCF,
                                    SolveConfig(lp_backend="reference"))
        assert report.rcf is not None
        assert report.time_heuristic > 0.0
        assert report.time_reduced > 0.0
        assert report.time_total >= report.time_heuristic + report.time_reduced - 1e-6
        assert report.framework == "N+RCF"

    def test_infeasible_instance_raises(self):
        # coverage of both testpoints is impossible: together they
        # interfere, alone they leave one uncovered
        inst = Instance(2, 2, [10.0], [1.0],
                        [[2.0, 2.05], [0.11, 0.1]], 1.0, 1.0, 2)
        assert brute_force(inst).objective is None
        for fw in (Framework.N, Framework.R_PBW, Framework.N_RCF):
            with pytest.raises(InstanceInfeasibleError):
                solve_framework(inst, fw, SolveConfig(lp_backend="reference"))

    def test_determinism_objective_solution_nodes(self):
        for backend in ("reference", "highs"):
            for fw in (Framework.N, Framework.R_PBW, Framework.R_PBW_RCF):
                inst = suite_instance(4)
                runs = [solve_framework(inst, fw, SolveConfig(lp_backend=backend))
                        for _ in range(2)]
                (rep_a, sol_a), (rep_b, sol_b) = runs
                assert rep_a.objective == rep_b.objective
                assert rep_a.node_count == rep_b.node_count
                assert sol_a == sol_b

    def test_string_framework_accepted(self, ex1_alpha2):
        report, _ = solve_framework(ex1_alpha2, "R+PBw",
                                    SolveConfig(lp_backend="reference"))
        assert report.framework == "R+PBw"


class TestBnbAsMipSolver:
    def test_optimal_status_and_point(self, ex1_alpha2):
        model = build_natural(ex1_alpha2, big_m_base(ex1_alpha2))
        res = BnbMipSolver("reference")(model)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(1.0, abs=1e-9)
        assert res.node_count >= 1

    def test_infeasible_status(self):
        inst = Instance(2, 2, [10.0], [1.0],
                        [[2.0, 2.05], [0.11, 0.1]], 1.0, 1.0, 2)
        model = build_natural(inst, big_m_base(inst))
        assert BnbMipSolver("reference")(model).status == "infeasible"
