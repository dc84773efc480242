import numpy as np
import pytest

import tariffkit as tk
from tariffkit.errors import ConfigurationError
from tariffkit.market import SizeBinConfig
from tariffkit.synth import generate_market

from conftest import REFERENCE_MODEL, base_settings


class TestTypes:
    def test_record_requires_positive_size(self):
        with pytest.raises(ValueError):
            tk.CustomerRecord(id="a", year=2021, covariates={}, size=0, success=1, observed_unit_price=0)

    def test_record_validates_flags_and_prices(self):
        with pytest.raises(ValueError):
            tk.CustomerRecord(id="a", year=2021, covariates={}, size=1, success=2, observed_unit_price=0)
        with pytest.raises(ValueError):
            tk.CustomerRecord(id="a", year=2021, covariates={}, size=1, success=1, observed_unit_price=-1)

    def test_bins_must_be_contiguous(self):
        with pytest.raises(ValueError):
            SizeBinConfig(estimation_bins=((1, 10), (20, None)))
        with pytest.raises(ValueError):
            SizeBinConfig(pricing_bins=((0, 10), (10, 50)))

    def test_every_size_maps_to_one_bin(self):
        bins = SizeBinConfig()
        for size in range(1, 400):
            assert 0 <= bins.estimation_bin(size) < 3
            assert 0 <= bins.pricing_bin(size) < 5
        assert bins.estimation_bin(20) == 1  # boundary joins the upper bin
        assert bins.pricing_bin(10) == 1

    def test_sigma_must_be_nonnegative(self):
        with pytest.raises(ValueError):
            tk.ValueModel(beta={}, year_effects={0: 0.0}, size_effects={(1, None): 0.0}, sigma=-1)

    def test_costs_nonnegative(self):
        with pytest.raises(ValueError):
            tk.CostParams(-1, 0)

    def test_market_size_pmf_sums_to_one(self, synthetic_draw):
        pmf = synthetic_draw.market.size_pmf()
        assert abs(sum(pmf.values()) - 1.0) < 1e-12


class TestMeanValue:
    def _record(self, covs, year=2020, size=2):
        return tk.CustomerRecord(
            id="r", year=year, covariates=covs, size=size, success=1, observed_unit_price=0.0
        )

    def test_intercept_only(self):
        c = self._record({"const": 1.0, "log_feature1": 0.0, "feature2": 0.0})
        assert tk.mean_value(REFERENCE_MODEL, c) == pytest.approx(2260.56)

    def test_mid_size_effect(self):
        c = self._record({"const": 1.0, "log_feature1": 0.0, "feature2": 0.0}, size=25)
        assert tk.mean_value(REFERENCE_MODEL, c) == pytest.approx(2260.56 - 657.40)

    def test_zero_model_is_zero(self):
        m = tk.ValueModel(beta={}, year_effects={2020: 0.0}, size_effects={(1, None): 0.0}, sigma=1.0)
        assert tk.mean_value(m, self._record({})) == 0.0

    def test_missing_covariate_named(self):
        c = self._record({"const": 1.0})
        with pytest.raises(ConfigurationError, match="log_feature1"):
            tk.mean_value(REFERENCE_MODEL, c)

    def test_unknown_year_named(self):
        c = self._record({"const": 1.0, "log_feature1": 0.0, "feature2": 0.0}, year=1999)
        with pytest.raises(ConfigurationError, match="1999"):
            tk.mean_value(REFERENCE_MODEL, c)

    def test_linear_in_coefficients(self):
        rng = np.random.default_rng(0)
        covs = {"const": 1.0, "a": 2.5, "b": -1.25}
        c = self._record(covs)
        for _ in range(20):
            b1 = {k: float(rng.normal()) for k in covs}
            b2 = {k: float(rng.normal()) for k in covs}
            m1 = tk.ValueModel(beta=b1, year_effects={2020: 0.0}, size_effects={(1, None): 0.0}, sigma=1)
            m2 = tk.ValueModel(beta=b2, year_effects={2020: 0.0}, size_effects={(1, None): 0.0}, sigma=1)
            m12 = tk.ValueModel(
                beta={k: b1[k] + b2[k] for k in covs},
                year_effects={2020: 0.0},
                size_effects={(1, None): 0.0},
                sigma=1,
            )
            assert tk.mean_value(m12, c) == pytest.approx(tk.mean_value(m1, c) + tk.mean_value(m2, c))


class TestGrossValue:
    def test_clamps_at_size(self):
        m = tk.ValueModel(beta={}, year_effects={0: 0.0}, size_effects={(1, None): 0.0}, sigma=1)
        assert tk.gross_value(m, 2200.0, 120, 150) == 264000.0

    def test_zero_quantity(self):
        m = tk.ValueModel(beta={}, year_effects={0: 0.0}, size_effects={(1, None): 0.0}, sigma=1)
        assert tk.gross_value(m, 123.0, 7, 0) == 0.0

    def test_smooth_matches_linear_at_size(self):
        m = tk.ValueModel(
            beta={}, year_effects={0: 0.0}, size_effects={(1, None): 0.0}, sigma=1, smoothness=0.75
        )
        assert tk.gross_value(m, 1.0, 200, 200) == pytest.approx(200.0)

    def test_negative_quantity_rejected(self):
        m = tk.ValueModel(beta={}, year_effects={0: 0.0}, size_effects={(1, None): 0.0}, sigma=1)
        with pytest.raises(ValueError):
            tk.gross_value(m, 1.0, 5, -0.5)

    @pytest.mark.parametrize("a", [1.0, 0.9, 0.75, 0.5])
    def test_nondecreasing_and_flat_beyond_size(self, a):
        m = tk.ValueModel(
            beta={}, year_effects={0: 0.0}, size_effects={(1, None): 0.0}, sigma=1, smoothness=a
        )
        size = 40
        values = [tk.gross_value(m, 37.5, size, q) for q in range(0, 120)]
        assert all(b - a_ >= -1e-12 for a_, b in zip(values, values[1:]))
        assert all(v == values[size] for v in values[size:])

    def test_exact_min_form_when_not_smooth(self):
        m = tk.ValueModel(beta={}, year_effects={0: 0.0}, size_effects={(1, None): 0.0}, sigma=1)
        rng = np.random.default_rng(1)
        for _ in range(100):
            v = float(rng.normal(scale=1000))
            size = int(rng.integers(1, 300))
            q = float(rng.uniform(0, 400))
            assert tk.gross_value(m, v, size, q) == v * min(q, size)


class TestGenerator:
    def test_reproducible(self):
        a = generate_market(base_settings(n=500), seed=9)
        b = generate_market(base_settings(n=500), seed=9)
        assert a.market.customers == b.market.customers
        assert np.array_equal(a.latent_values, b.latent_values)

    def test_different_seeds_differ(self):
        a = generate_market(base_settings(n=500), seed=9)
        b = generate_market(base_settings(n=500), seed=10)
        assert a.market.customers != b.market.customers

    def test_zero_noise_gives_mean_values(self):
        model = tk.ValueModel(
            beta=dict(REFERENCE_MODEL.beta),
            year_effects=dict(REFERENCE_MODEL.year_effects),
            size_effects=dict(REFERENCE_MODEL.size_effects),
            sigma=0.0,
        )
        draw = generate_market(base_settings(n=300, model=model), seed=4)
        assert np.array_equal(draw.latent_values, draw.mean_values)

    def test_positive_customer_count_required(self):
        with pytest.raises(ValueError):
            base_settings(n=0)

    def test_logistic_error_moments(self):
        draw = generate_market(base_settings(n=100_000), seed=17)
        eps = (draw.latent_values - draw.mean_values) / REFERENCE_MODEL.sigma
        assert abs(eps.mean()) < 0.02
        assert abs(eps.var() / (np.pi**2 / 3) - 1.0) < 0.03

    def test_mean_values_match_mean_value_op(self, synthetic_draw):
        m = synthetic_draw.market
        direct = np.array([tk.mean_value(m.value_model, c) for c in m.customers])
        assert np.allclose(direct, synthetic_draw.mean_values)

    def test_success_consistent_with_latents_under_concave_schedule(self, synthetic_draw):
        # concave tariff: buy exactly when value covers the break-even price
        m = synthetic_draw.market
        prices = np.array([c.observed_unit_price for c in m.customers])
        succ = np.array([c.success for c in m.customers])
        assert np.array_equal(succ, (synthetic_draw.latent_values >= prices).astype(int))

    def test_size_pmf_close_to_target(self):
        draw = generate_market(base_settings(n=4995), seed=30)
        pmf = draw.market.size_pmf()
        for size, p in base_settings().size_pmf.items():
            assert abs(pmf.get(size, 0.0) - p) < 0.02
