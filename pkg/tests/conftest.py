import numpy as np
import pytest

import tariffkit as tk
from tariffkit.synth import CovariateSpec, GeneratorSettings, generate_market

REFERENCE_MODEL = tk.ValueModel(
    beta={"const": 2260.56, "log_feature1": 133.79, "feature2": 686.64},
    year_effects={2020: 0.0, 2021: 70.2},
    size_effects={(1, 20): 0.0, (20, 50): -657.40, (50, None): -835.73},
    sigma=385.44,
    error_family="logistic",
)

OBSERVED_VIA_ORIGIN = tk.PriceSchedule("via_origin", (2744, 2572, 2188, 2117, 1959))
OBSERVED_CONCAVE = tk.PriceSchedule("continuous", (4200, 2400, 1900, 1500, 1100))


def base_settings(n=2000, model=REFERENCE_MODEL, schedule=OBSERVED_CONCAVE):
    return GeneratorSettings(
        n_customers=n,
        covariates=(
            CovariateSpec("const", "const", (1.0,)),
            CovariateSpec("log_feature1", "normal", (6.8, 1.1)),
            CovariateSpec("feature2", "bernoulli", (0.55,)),
        ),
        size_pmf={2: 0.2, 19: 0.2, 20: 0.18, 49: 0.14, 50: 0.15, 200: 0.13},
        value_model=model,
        costs=tk.CostParams(3630.0, 760.0),
        observed_schedule=schedule,
        year_pmf={2020: 0.5, 2021: 0.5},
    )


def small_market(seed=0, n=300, sigma=385.44, gamma=(0.0, -657.40, -835.73), costs=(3630.0, 760.0)):
    """Compact market for profit/optimizer tests: one shared covariate, sizes
    across all five pricing segments."""
    rng = np.random.default_rng(seed)
    model = tk.ValueModel(
        beta={"const": 2260.56, "x": 150.0},
        year_effects={2021: 0.0},
        size_effects={(1, 20): gamma[0], (20, 50): gamma[1], (50, None): gamma[2]},
        sigma=sigma,
    )
    sizes = rng.choice([3, 6, 12, 16, 25, 40, 60, 90, 130], size=n)
    customers = tuple(
        tk.CustomerRecord(
            id=f"m{i}",
            year=2021,
            covariates={"const": 1.0, "x": float(rng.normal(3.0, 1.0))},
            size=int(sizes[i]),
            success=1,
            observed_unit_price=2500.0,
        )
        for i in range(n)
    )
    return tk.Market(customers, model, tk.CostParams(*costs))


@pytest.fixture(scope="session")
def market300():
    return small_market(seed=11, n=300)


@pytest.fixture(scope="session")
def synthetic_draw():
    return generate_market(base_settings(n=2000), seed=42)
