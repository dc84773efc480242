import numpy as np
import pytest

import tariffkit as tk
from tariffkit.dist import cdf
from tariffkit.errors import UnsupportedOperation
from tariffkit.profit import expected_profit, welfare
from tariffkit.tariff import PriceSchedule, linear, two_part, via_origin

from conftest import small_market


def single_customer_market(mu=2000.0, sigma=300.0, size=10, c1=3630.0, c2=760.0, family="logistic"):
    model = tk.ValueModel(
        beta={"const": mu},
        year_effects={2021: 0.0},
        size_effects={(1, None): 0.0},
        sigma=sigma,
        error_family=family,
    )
    rec = tk.CustomerRecord(
        id="only", year=2021, covariates={"const": 1.0}, size=size, success=1, observed_unit_price=0.0
    )
    return tk.Market((rec,), model, tk.CostParams(c1, c2))


class TestExpectedProfit:
    def test_deterministic_buyer_linear_price(self):
        # sigma at the floor and mu far above p: the sale is certain
        m = single_customer_market(mu=50_000.0, sigma=1e-6, size=10)
        rep = expected_profit(m, linear(2200.0))
        assert rep.expected_profit == pytest.approx((2200 - 760) * 10 - 3630, rel=1e-9)

    def test_single_customer_closed_form(self):
        m = single_customer_market(mu=2000.0, sigma=300.0, size=10)
        p = 2200.0
        rep = expected_profit(m, linear(p))
        buy = 1.0 - cdf((p - 2000.0) / 300.0, "logistic")
        assert rep.expected_profit == pytest.approx(buy * ((p - 760) * 10 - 3630), rel=1e-12)

    def test_closed_form_vs_monte_carlo(self):
        m = single_customer_market(mu=2000.0, sigma=300.0, size=10)
        sched = linear(2200.0)
        exact = expected_profit(m, sched).expected_profit
        mc = expected_profit(m, sched, method="monte_carlo", draws=1_000_000, seed=5)
        assert abs(exact - mc.expected_profit) <= 3 * mc.mc_std_error

    def test_profit_is_revenue_minus_cost(self, market300):
        rep = expected_profit(market300, via_origin((2744, 2572, 2188, 2117, 1959)))
        assert rep.expected_profit == pytest.approx(rep.expected_revenue - rep.expected_cost, abs=1e-9)

    def test_segments_sum_to_totals(self, market300):
        rep = expected_profit(market300, via_origin((2744, 2572, 2188, 2117, 1959)))
        assert sum(s.profit for s in rep.per_segment.values()) == pytest.approx(
            rep.expected_profit, abs=1e-8
        )
        assert sum(s.revenue for s in rep.per_segment.values()) == pytest.approx(
            rep.expected_revenue, abs=1e-8
        )

    def test_individualized_rejected(self, market300):
        with pytest.raises(UnsupportedOperation):
            expected_profit(market300, PriceSchedule("individualized", ()))

    def test_mc_needs_seed(self, market300):
        with pytest.raises(ValueError):
            expected_profit(market300, linear(2000.0), method="monte_carlo")

    def test_mc_reproducible(self, market300):
        a = expected_profit(market300, linear(2000.0), method="monte_carlo", draws=20_000, seed=3)
        b = expected_profit(market300, linear(2000.0), method="monte_carlo", draws=20_000, seed=3)
        assert a.expected_profit == b.expected_profit

    @pytest.mark.parametrize("family", ["logistic", "normal"])
    def test_envelope_vs_mc_random_schedules(self, family):
        rng = np.random.default_rng(14)
        m = small_market(seed=2, n=60)
        if family == "normal":
            vm = m.value_model
            m = tk.Market(
                m.customers,
                tk.ValueModel(
                    beta=dict(vm.beta),
                    year_effects=dict(vm.year_effects),
                    size_effects=dict(vm.size_effects),
                    sigma=vm.sigma,
                    error_family="normal",
                ),
                m.costs,
                m.bins,
            )
        for trial in range(5):
            sched = via_origin(tuple(rng.uniform(500, 4000, 5)))
            exact = expected_profit(m, sched).expected_profit
            mc = expected_profit(m, sched, method="monte_carlo", draws=200_000, seed=trial)
            assert abs(exact - mc.expected_profit) <= 3 * mc.mc_std_error + 1e-6

    def test_positive_homogeneity(self, market300):
        lam = 1.7
        sched = via_origin((2744, 2572, 2188, 2117, 1959))
        rep = expected_profit(market300, sched)
        vm = market300.value_model
        scaled_model = tk.ValueModel(
            beta={k: lam * v for k, v in vm.beta.items()},
            year_effects={k: lam * v for k, v in vm.year_effects.items()},
            size_effects={k: lam * v for k, v in vm.size_effects.items()},
            sigma=lam * vm.sigma,
        )
        scaled_market = tk.Market(
            market300.customers,
            scaled_model,
            tk.CostParams(lam * market300.costs.c1, lam * market300.costs.c2),
            market300.bins,
        )
        scaled_sched = via_origin(tuple(lam * r for r in sched.rates))
        rep2 = expected_profit(scaled_market, scaled_sched)
        assert rep2.expected_profit == pytest.approx(lam * rep.expected_profit, rel=1e-9)
        assert rep2.consumer_surplus == pytest.approx(lam * rep.consumer_surplus, rel=1e-9)


class TestWelfare:
    def test_social_identity(self, market300):
        sched = two_part(1736.0, 2102.0)
        cs, social = welfare(market300, sched)
        rep = expected_profit(market300, sched)
        assert social == pytest.approx(rep.expected_profit + cs, abs=1e-9)

    def test_deterministic_buyer_surplus(self):
        m = single_customer_market(mu=50_000.0, sigma=1e-6, size=10)
        cs, _ = welfare(m, linear(2200.0))
        assert cs == pytest.approx((50_000 - 2200) * 10, rel=1e-6)

    def test_consumer_surplus_nonnegative(self, market300):
        rng = np.random.default_rng(6)
        for _ in range(10):
            cs, _ = welfare(market300, via_origin(tuple(rng.uniform(0, 4500, 5))))
            assert cs >= 0


class TestSmoothMonteCarlo:
    def test_smooth_profit_runs_and_matches_brute_force_draws(self):
        vm = tk.ValueModel(
            beta={"const": 2400.0},
            year_effects={2021: 0.0},
            size_effects={(1, None): 0.0},
            sigma=300.0,
            smoothness=0.9,
        )
        recs = tuple(
            tk.CustomerRecord(
                id=f"s{i}", year=2021, covariates={"const": 1.0}, size=s, success=1, observed_unit_price=0.0
            )
            for i, s in enumerate((4, 9, 15, 30, 70))
        )
        m = tk.Market(recs, vm, tk.CostParams(1000.0, 500.0))
        sched = via_origin((2744, 2572, 2188, 2117, 1959))
        rep = expected_profit(m, sched, draws=4000, seed=12)
        assert rep.method == "monte_carlo"

        # brute-force the same expectation on a fixed draw set
        rng = np.random.default_rng(0)
        total = 0.0
        draws = 4000
        for _ in range(draws):
            for rec in recs:
                v = 2400.0 + 300.0 * rng.logistic()
                d = tk.brute_force_purchase(v, rec.size, sched, 0.9)
                total += d.payment - (1000.0 + 500.0 * d.quantity) * (d.quantity > 0)
        assert rep.expected_profit == pytest.approx(total / draws, rel=0.1)

    def test_envelope_refuses_smooth_model(self):
        vm = tk.ValueModel(
            beta={"const": 2000.0},
            year_effects={2021: 0.0},
            size_effects={(1, None): 0.0},
            sigma=300.0,
            smoothness=0.8,
        )
        rec = tk.CustomerRecord(
            id="x", year=2021, covariates={"const": 1.0}, size=5, success=1, observed_unit_price=0.0
        )
        m = tk.Market((rec,), vm, tk.CostParams(0.0, 0.0))
        with pytest.raises(UnsupportedOperation):
            expected_profit(m, linear(1000.0), method="envelope")
