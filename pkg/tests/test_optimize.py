import itertools
import math

import numpy as np
import pytest

import tariffkit as tk
from tariffkit.optimize import (
    GridBisectionConfig,
    NelderMeadConfig,
    expected_iterations,
    grid_bisection,
    individually_optimized,
    initial_grid_start,
    nelder_mead,
    optimize_schedule,
)

from conftest import small_market


class TestGridBisection:
    def test_one_dim_quadratic(self):
        cfg = GridBisectionConfig(dims=1)
        res = grid_bisection(lambda x: -((x[0] - 2489.0) ** 2), cfg)
        assert abs(res.x[0] - 2489.0) <= cfg.stop_width

    def test_iteration_count_matches_formula(self):
        cfg = GridBisectionConfig(dims=1)
        res = grid_bisection(lambda x: 0.0, cfg)
        want = math.ceil((math.log(5000.0) - math.log(1.0)) / math.log(2.0))
        assert len(res.trace) == want == 13 == expected_iterations(cfg)

    def test_constant_objective_returns_first_grid_point(self):
        cfg = GridBisectionConfig(dims=2)
        res = grid_bisection(lambda x: 0.0, cfg)
        assert np.array_equal(res.x, [0.0, 0.0])

    def test_two_dim_matches_exhaustive_oracle(self):
        # separable concave objective peaked on the fine-grid lattice
        def f(x):
            return -((x[0] - 2480.0) ** 2) - 3.0 * (x[1] - 1730.0) ** 2

        cfg = GridBisectionConfig(dims=2)
        res = grid_bisection(f, cfg)
        fine = np.linspace(0, 5000, 501)
        pts = np.array(list(itertools.product(fine, fine)))
        vals = -((pts[:, 0] - 2480.0) ** 2) - 3.0 * (pts[:, 1] - 1730.0) ** 2
        oracle = pts[int(np.argmax(vals))]
        assert np.all(np.abs(res.x - oracle) <= cfg.stop_width)

    def test_incumbent_at_least_initial_grid_best(self):
        rng = np.random.default_rng(0)

        def rugged(x):
            return float(np.sin(x[0] / 97.0) * 1000 + np.cos(x[1] / 41.0) * 800)

        cfg = GridBisectionConfig(dims=2)
        first_grid = np.array(
            list(itertools.product(np.linspace(0, 5000, 5), np.linspace(0, 5000, 5)))
        )
        best_initial = max(rugged(p) for p in first_grid)
        res = grid_bisection(rugged, cfg)
        assert res.value >= best_initial - 1e-12

    def test_extra_candidates_survive_ties(self):
        cfg = GridBisectionConfig(dims=1, upper=10.0)
        seed_pt = np.array([7.3])
        res = grid_bisection(lambda x: 0.0, cfg, extra_candidates=[seed_pt])
        assert res.x[0] == 7.3  # equal value: the seed stays incumbent

    def test_trace_bounds_shrink_by_zoom(self):
        cfg = GridBisectionConfig(dims=1, zoom=0.5)
        res = grid_bisection(lambda x: -((x[0] - 100.0) ** 2), cfg)
        widths = [rec.upper[0] - rec.lower[0] for rec in res.trace]
        for a, b in zip(widths, widths[1:]):
            assert b == pytest.approx(a / 2.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            GridBisectionConfig(dims=1, points_per_dim=1)
        with pytest.raises(ValueError):
            GridBisectionConfig(dims=1, zoom=1.0)
        with pytest.raises(ValueError):
            GridBisectionConfig(dims=1, lower=10.0, upper=10.0)
        with pytest.raises(ValueError):
            GridBisectionConfig(dims=1, stop_width=0.0)


class TestNelderMead:
    def test_quadratic_bowl(self):
        cfg = NelderMeadConfig(dims=2, stop_diameter=1e-8)

        def f(x):
            return -((x[0] - 1200.0) ** 2) - (x[1] - 900.0) ** 2

        start = initial_grid_start(f, cfg)
        res = nelder_mead(f, start, cfg)
        assert np.all(np.abs(res.x - [1200.0, 900.0]) < 1e-3)

    def test_start_at_optimum_converges_immediately(self):
        cfg = NelderMeadConfig(dims=1, stop_diameter=1e-10, init_step_frac=1e-12)
        res = nelder_mead(lambda x: -((x[0] - 50.0) ** 2), np.array([50.0]), cfg)
        assert abs(res.x[0] - 50.0) < 1e-6

    def test_profit_close_to_grid_bisection(self, market300):
        search = optimize_schedule(market300, "via_origin")
        from tariffkit.optimize import _RateObjective
        from tariffkit.profit import ProfitEvaluator

        obj = _RateObjective(ProfitEvaluator(market300, "via_origin"), "rates")
        cfg = NelderMeadConfig(dims=5, stop_diameter=1e-4, init_points_per_dim=5)
        start = initial_grid_start(obj, cfg)
        res = nelder_mead(obj, start, cfg)
        assert res.value >= 0.995 * search.value


class TestOptimizeSchedule:
    def test_point_mass_linear_extracts_value(self):
        model = tk.ValueModel(
            beta={"const": 2300.0},
            year_effects={2021: 0.0},
            size_effects={(1, None): 0.0},
            sigma=1e-4,
        )
        rec = tk.CustomerRecord(
            id="pm", year=2021, covariates={"const": 1.0}, size=12, success=1, observed_unit_price=0.0
        )
        m = tk.Market((rec,), model, tk.CostParams(1000.0, 700.0))
        res = optimize_schedule(m, "linear")
        assert abs(res.schedule.rates[0] - 2300.0) <= 1.5
        assert res.value == pytest.approx((2300.0 - 700.0) * 12 - 1000.0, rel=1e-3)

    def test_nested_families_monotone(self, market300):
        lin = optimize_schedule(market300, "linear")
        vo = optimize_schedule(market300, "via_origin")
        tp = optimize_schedule(market300, "two_part")
        vof = optimize_schedule(market300, "via_origin_fee")
        assert vo.value >= lin.value
        assert tp.value >= lin.value
        assert vof.value >= vo.value - 1e-9
        assert vof.value >= tp.value - 1e-9

    def test_any_fixed_linear_price_weakly_worse(self, market300):
        lin = optimize_schedule(market300, "linear")
        from tariffkit.profit import expected_profit
        from tariffkit.tariff import linear as lin_sched

        for p in (500.0, 1500.0, 2500.0, 3500.0, 4500.0):
            assert expected_profit(market300, lin_sched(p)).expected_profit <= lin.value + 1e-9

    def test_reports_match_schedule(self, market300):
        res = optimize_schedule(market300, "two_part")
        from tariffkit.profit import expected_profit

        rep = expected_profit(market300, res.schedule)
        assert rep.expected_profit == pytest.approx(res.report.expected_profit, rel=1e-12)

    def test_unknown_kind_rejected(self, market300):
        with pytest.raises(ValueError):
            optimize_schedule(market300, "individualized")


class TestIndividuallyOptimized:
    def test_single_segment_market_equals_linear(self):
        m = small_market(seed=3, n=150)
        one_bin = tk.Market(
            tuple(c for c in m.customers if c.size < 10),
            m.value_model,
            m.costs,
            m.bins,
        )
        ind = individually_optimized(one_bin)
        lin = optimize_schedule(one_bin, "linear")
        assert ind.naive_profit == pytest.approx(lin.value, rel=1e-6)
        assert ind.report.expected_profit == pytest.approx(lin.value, rel=1e-6)

    def test_never_beats_joint_optimum(self, market300):
        ind = individually_optimized(market300)
        joint = optimize_schedule(
            market300, "via_origin", extra_candidates=[np.array(ind.schedule.rates)]
        )
        assert ind.report.expected_profit <= joint.value + 1e-9

    def test_naive_total_bounds_joint_optimum(self, market300):
        ind = individually_optimized(market300)
        joint = optimize_schedule(
            market300, "via_origin", extra_candidates=[np.array(ind.schedule.rates)]
        )
        assert ind.naive_profit >= joint.value - 1e-6

    def test_empty_segment_inherits_previous_rate(self):
        m = small_market(seed=4, n=120)
        # drop every size in [10, 20) so the second pricing segment is empty
        kept = tuple(c for c in m.customers if not (10 <= c.size < 20))
        m2 = tk.Market(kept, m.value_model, m.costs, m.bins)
        ind = individually_optimized(m2)
        rates = ind.schedule.rates
        assert rates[1] == rates[0]
