import numpy as np
import pytest

from helpers import ex1, suite_instance
from sitepower.core import Instance
from sitepower.formulation import (
    Constraint,
    MilpModel,
    RowTag,
    Variable,
    VarRole,
    big_m_base,
    build_natural,
    build_reformulated,
)
from sitepower.lp import (
    BackendError,
    DenseSimplexBackend,
    HighsBackend,
    HighsMipSolver,
    LpResult,
    get_lp_backend,
    solve_lp,
)
from sitepower.oracle import brute_force


def toy_model(c, rows, n_vars=None):
    """Generic little model: rows are (coeff dict, sense, rhs)."""
    n = n_vars or len(c)
    variables = [Variable(f"Z_{j}_0", VarRole.Z, (j, 0), objective=float(c[j]))
                 for j in range(n)]
    constraints = [
        Constraint(cols=np.array(sorted(coeffs)),
                   vals=np.array([coeffs[k] for k in sorted(coeffs)]),
                   sense=sense, rhs=float(rhs), tag=RowTag.ONE_LEVEL, key=(i,))
        for i, (coeffs, sense, rhs) in enumerate(rows)
    ]
    return MilpModel(variables=variables, constraints=constraints,
                     n_testpoints=0, n_transmitters=n, n_levels=1,
                     has_slack_vars=False)


BACKENDS = [DenseSimplexBackend(), HighsBackend()]
IDS = ["reference", "highs"]


@pytest.mark.parametrize("backend", BACKENDS, ids=IDS)
class TestBackendContract:
    def test_single_variable_floor(self, backend):
        model = toy_model([1.0], [({0: 1.0}, ">=", 0.5)])
        res = solve_lp(backend, model)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(0.5)
        assert res.primal[0] == pytest.approx(0.5)

    def test_contradictory_rows_infeasible(self, backend):
        model = toy_model([1.0], [({0: 1.0}, ">=", 0.6), ({0: 1.0}, "<=", 0.4)])
        assert solve_lp(backend, model).status == "infeasible"

    def test_contradictory_override_infeasible(self, backend):
        model = toy_model([1.0], [({0: 1.0}, ">=", 0.0)])
        assert solve_lp(backend, model, {0: (1.0, 0.0)}).status == "infeasible"

    def test_bound_override_honored(self, backend):
        model = toy_model([1.0, 2.0], [({0: 1.0, 1: 1.0}, ">=", 1.0)])
        res = solve_lp(backend, model, {0: (0.0, 0.0)})
        assert res.status == "optimal"
        assert res.primal[1] == pytest.approx(1.0)
        assert res.objective == pytest.approx(2.0)

    def test_equality_row(self, backend):
        model = toy_model([1.0, 1.0], [({0: 1.0, 1: 2.0}, "==", 1.5)])
        res = solve_lp(backend, model)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(0.75)

    def test_ex1_relaxation_bounded_by_integer_optimum(self, backend):
        inst = ex1(alpha=2)
        model = build_natural(inst, big_m_base(inst))
        res = solve_lp(backend, model)
        oracle = brute_force(inst)
        assert res.status == "optimal"
        assert res.objective <= oracle.objective + 1e-9

    def test_reduced_cost_sign_convention(self, backend):
        # at optimality: columns at lower bound carry nonnegative reduced
        # costs, columns at upper bound nonpositive (minimization)
        inst = suite_instance(3)
        model = build_reformulated(inst, big_m_base(inst))
        res = solve_lp(backend, model)
        assert res.status == "optimal"
        lb, ub = model.bounds_arrays()
        at_lower = np.abs(res.primal - lb) < 1e-7
        at_upper = np.abs(res.primal - ub) < 1e-7
        assert np.all(res.reduced_costs[at_lower & ~at_upper] >= -1e-6)
        assert np.all(res.reduced_costs[at_upper & ~at_lower] <= 1e-6)

    def test_objective_matches_primal(self, backend):
        inst = suite_instance(5)
        model = build_natural(inst, big_m_base(inst))
        res = solve_lp(backend, model)
        assert res.objective == pytest.approx(
            float(model.objective_vector() @ res.primal), abs=1e-6)


class TestBackendCrossValidation:
    def test_backends_agree_on_suite_relaxations(self):
        ref, highs = DenseSimplexBackend(), HighsBackend()
        rng = np.random.default_rng(11)
        for seed in range(12):
            inst = suite_instance(seed)
            for build in (build_natural, build_reformulated):
                model = build(inst, big_m_base(inst))
                overrides = {}
                if seed % 2:
                    col = int(rng.integers(0, model.n_cols))
                    overrides[col] = (0.0, 0.0)
                a = solve_lp(ref, model, overrides)
                b = solve_lp(highs, model, overrides)
                assert a.status == b.status
                if a.status == "optimal":
                    assert a.objective == pytest.approx(b.objective, abs=1e-6)

    def test_warm_start_matches_cold(self):
        ref = DenseSimplexBackend()
        for seed in range(8):
            inst = suite_instance(seed)
            model = build_reformulated(inst, big_m_base(inst))
            cold, hint = ref.solve_warm(model, None, None)
            if cold.status != "optimal":
                continue
            frac = np.nonzero(np.abs(cold.primal - np.round(cold.primal)) > 1e-6)[0]
            col = int(frac[0]) if frac.size else 0
            for value in (0.0, 1.0):
                warm, _ = ref.solve_warm(model, {col: (value, value)}, hint)
                again = ref.solve(model, {col: (value, value)})
                assert warm.status == again.status
                if warm.status == "optimal":
                    assert warm.objective == pytest.approx(again.objective, abs=1e-7)


class TestContractEnforcement:
    def test_broken_backend_flagged_as_limit(self, ex1_alpha2):
        model = build_natural(ex1_alpha2, big_m_base(ex1_alpha2))

        class Liar:
            name = "liar"

            def solve(self, model, overrides=None):
                return LpResult("optimal", -123.0, np.full(model.n_cols, 2.0),
                                np.zeros(model.n_cols))

        res = solve_lp(Liar(), model)
        assert res.status == "limit"
        assert "bounds" in res.diagnostics

    def test_raising_backend_flagged_as_limit(self, ex1_alpha2):
        model = build_natural(ex1_alpha2, big_m_base(ex1_alpha2))

        class Boom:
            name = "boom"

            def solve(self, model, overrides=None):
                raise RuntimeError("engine on fire")

        res = solve_lp(Boom(), model)
        assert res.status == "limit"
        assert "engine on fire" in res.diagnostics

    def test_dense_backend_rejects_huge_models(self):
        rng = np.random.default_rng(0)
        inst = Instance(40, 60, [1.0], [1.0], rng.uniform(0.5, 1.0, (60, 40)),
                        1.0, 1.0, 30)
        model = build_natural(inst, big_m_base(inst))
        with pytest.raises(BackendError, match="too large"):
            DenseSimplexBackend().solve(model)


class TestBackendSelection:
    def test_explicit_names(self):
        assert get_lp_backend("reference").name == "reference"
        assert get_lp_backend("highs").name == "highs"
        with pytest.raises(ValueError):
            get_lp_backend("simplex2000")

    def test_env_var(self, monkeypatch):
        monkeypatch.setenv("SITEPOWER_LP_BACKEND", "highs")
        assert get_lp_backend().name == "highs"

    def test_auto_by_size(self, ex1_alpha2):
        small = build_natural(ex1_alpha2, big_m_base(ex1_alpha2))
        assert get_lp_backend("auto", small).name == "reference"
        inst = suite_instance(7)
        big = build_reformulated(inst, big_m_base(inst))
        assert get_lp_backend("auto", big).name == "highs"


class TestHighsMipSolver:
    def test_integer_solve(self, ex1_alpha2):
        model = build_natural(ex1_alpha2, big_m_base(ex1_alpha2))
        res = HighsMipSolver()(model)
        assert res.status == "optimal"
        assert res.objective == pytest.approx(1.0, abs=1e-9)
        assert np.all(np.abs(res.point - np.round(res.point)) < 1e-6)

    def test_infeasible_reported(self):
        model = toy_model([1.0], [({0: 1.0}, ">=", 2.0)])
        assert HighsMipSolver()(model).status == "infeasible"
