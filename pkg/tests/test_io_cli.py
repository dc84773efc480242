import json

import numpy as np
import pytest

import tariffkit as tk
from tariffkit import io
from tariffkit.cli import main
from tariffkit.tariff import via_origin

GEN_CONFIG = """
# synthetic market for pipeline runs
n_customers = 400
covariate.log_feature1 = normal:6.8,1.1
covariate.feature2 = bernoulli:0.55
size_pmf = 2:0.2, 19:0.2, 20:0.18, 49:0.14, 50:0.15, 200:0.13
year_pmf = 2020:0.5, 2021:0.5
snc_pmf = 1868:0.5, 4670:0.3, 9340:0.2
beta = const:2260.56, log_feature1:133.79, feature2:686.64
year_effects = 2020:0, 2021:70.2
size_effects = 1-20:0, 20-50:-657.4, 50-inf:-835.73
sigma = 385.44
family = logistic
c1 = 3630
c2 = 760
observed.kind = continuous
observed.rates = 4200,2400,1900,1500,1100
covariates = const,log_feature1,feature2
tolerance = 1e-4
stages = simulate,fit,calibrate,optimize,counterfactual,report
optimize.kinds = linear,via_origin
optimize.points_per_dim = 4
optimize.stop_width = 8
"""


@pytest.fixture()
def gen_config(tmp_path):
    path = tmp_path / "gen.conf"
    path.write_text(GEN_CONFIG)
    return path


class TestDealsCsv:
    def test_round_trip(self, tmp_path, synthetic_draw):
        path = tmp_path / "deals.csv"
        io.write_deals_csv(synthetic_draw.market.customers, path)
        records, ignored = io.read_deals_csv(path)
        assert ignored == []
        assert tuple(records) == synthetic_draw.market.customers

    def test_three_row_file(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(
            "id,year,size,success,unit_price,snc,const\n"
            "a,2021,5,1,2500.0,1868.0,1.0\n"
            "b,2021,12,0,2400.0,0.0,1.0\n"
            "c,2020,80,1,2000.0,9340.0,1.0\n"
        )
        records, _ = io.read_deals_csv(path)
        assert len(records) == 3
        assert records[2].year == 2020 and records[2].size == 80

    def test_zero_size_rejected_with_row_number(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("id,year,size,success,unit_price,snc\na,2021,0,1,10.0,0.0\n")
        with pytest.raises(ValueError, match="row 1"):
            io.read_deals_csv(path)

    def test_bad_cell_named(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("id,year,size,success,unit_price,snc\na,2021,x,1,10.0,0.0\n")
        with pytest.raises(ValueError, match="'size'"):
            io.read_deals_csv(path)

    def test_missing_core_column(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text("id,year,size,success,unit_price\na,2021,1,1,10.0\n")
        with pytest.raises(ValueError, match="snc"):
            io.read_deals_csv(path)

    def test_unknown_covariates_ignored_with_warning(self, tmp_path):
        path = tmp_path / "d.csv"
        path.write_text(
            "id,year,size,success,unit_price,snc,const,mystery\n"
            "a,2021,5,1,2500.0,0.0,1.0,9.9\n"
        )
        with pytest.warns(UserWarning, match="mystery"):
            records, ignored = io.read_deals_csv(path, covariate_names=["const"])
        assert ignored == ["mystery"]
        assert "mystery" not in records[0].covariates


class TestJsonArtifacts:
    def test_schedule_round_trip(self):
        s = via_origin((2744, 2572, 2188, 2117, 1959), fixed_fee=1736.0)
        assert io.schedule_from_json(io.schedule_to_json(s)) == s

    def test_value_model_round_trip(self):
        from conftest import REFERENCE_MODEL

        d = io.value_model_to_json(REFERENCE_MODEL)
        assert io.value_model_from_json(d) == REFERENCE_MODEL

    def test_scenario_round_trip_with_confidence(self):
        from tariffkit.counterfactuals import ScenarioResult, SegmentWelfare

        result = ScenarioResult(
            scheme_label="linear",
            profit=10.0,
            revenue=20.0,
            consumer_welfare=4.0,
            social_welfare=14.0,
            per_segment={"[0,10)": SegmentWelfare(10.0, 20.0, 4.0, 14.0, 3.0)},
            confidence={"profit": (8.5, 11.5)},
        )
        sched = via_origin((2744, 2572, 2188, 2117, 1959))
        back, sched_back = io.scenario_from_json(io.scenario_to_json(result, sched))
        assert back == result
        assert sched_back == sched

    def test_plot_data_shape(self, tmp_path):
        path = tmp_path / "plot.csv"
        entries = [
            io.PlotEntry("linear", tk.PriceSchedule("linear", (2489.0,))),
            io.PlotEntry("nonlinear", via_origin((2744, 2572, 2188, 2117, 1959))),
        ]
        io.emit_plot_data(entries, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "scheme,size,marginal_price,ci_lo,ci_hi"
        rows = [l.split(",") for l in lines[1:]]
        lin = [r for r in rows if r[0] == "linear"]
        assert len(lin) == 5 and len({r[2] for r in lin}) == 1
        nl = [r for r in rows if r[0] == "nonlinear"]
        assert len(nl) == 5 and len({r[2] for r in nl}) == 5

    def test_plot_data_ci_bounds(self, tmp_path):
        path = tmp_path / "plot.csv"
        sched = via_origin((2744, 2572, 2188, 2117, 1959))
        ci = {max(b, 1): (r - 100.0, r + 120.0) for b, r in zip(sched.bins, sched.rates)}
        io.emit_plot_data([io.PlotEntry("nl", sched, ci)], path)
        for line in path.read_text().strip().splitlines()[1:]:
            _, _, price, lo, hi = line.split(",")
            assert float(lo) <= float(price) <= float(hi)


class TestKvConfig:
    def test_parse_and_overrides(self, tmp_path):
        path = tmp_path / "c.conf"
        path.write_text("# comment\na = 1\nb = x:1, y:2\n\na = 2\n")
        kv = io.parse_kv_file(path)
        assert kv == {"a": "2", "b": "x:1, y:2"}
        assert io.apply_overrides(kv, ["a=3"])["a"] == "3"

    def test_settings_round_trip_fields(self, gen_config):
        settings = io.settings_from_kv(io.parse_kv_file(gen_config))
        assert settings.n_customers == 400
        assert settings.value_model.sigma == 385.44
        assert settings.observed_schedule.kind == "continuous"
        assert settings.size_pmf[200] == 0.13
        assert settings.value_model.size_effects[(50, None)] == -835.73


class TestCli:
    def test_simulate_fit_calibrate_optimize(self, tmp_path, gen_config):
        deals = tmp_path / "deals.csv"
        assert main(["simulate", "--config", str(gen_config), "--seed", "5", "--out", str(deals)]) == 0
        fit = tmp_path / "fit.json"
        assert (
            main(["fit", "--in", str(deals), "--config", str(gen_config), "--out", str(fit)]) == 0
        )
        fitted = json.loads(fit.read_text())
        assert fitted["format_version"] == "1"
        assert "value_model" in fitted and "bins" in fitted
        costs = tmp_path / "costs.json"
        assert main(["calibrate", "--in", str(deals), "--out", str(costs)]) == 0
        sched = tmp_path / "sched.json"
        trace = tmp_path / "trace.csv"
        rc = main(
            [
                "optimize", "--in", str(deals), "--fit", str(fit), "--costs", str(costs),
                "--kind", "linear", "--out", str(sched), "--trace", str(trace),
            ]
        )
        assert rc == 0
        out = json.loads(sched.read_text())
        assert out["kind"] == "linear" and out["expected_profit"] > 0
        assert trace.read_text().startswith("iteration,")

    def test_fit_with_observed_schedule_drops_dip_records(self, tmp_path, gen_config):
        deals = tmp_path / "deals.csv"
        main(
            [
                "simulate", "--config", str(gen_config), "--seed", "5", "--out", str(deals),
                "--set", "observed.kind=via_origin",
                "--set", "observed.rates=2744,2572,2188,2117,1959",
            ]
        )
        sched_path = tmp_path / "observed.json"
        sched_path.write_text(
            json.dumps(io.schedule_to_json(via_origin((2744, 2572, 2188, 2117, 1959))))
        )
        fit = tmp_path / "fit.json"
        rc = main(
            [
                "fit", "--in", str(deals), "--config", str(gen_config),
                "--schedule", str(sched_path), "--out", str(fit),
            ]
        )
        assert rc == 0
        assert json.loads(fit.read_text())["dropped_dip_records"] > 0

    def test_missing_input_exit_code_2(self, tmp_path):
        rc = main(
            [
                "ingest", "--in", str(tmp_path / "nope.csv"), "--out", str(tmp_path / "o.json"),
            ]
        )
        assert rc == 2

    def test_counterfactual_first_degree(self, tmp_path, gen_config):
        deals, fit, costs = (tmp_path / n for n in ("d.csv", "f.json", "c.json"))
        main(["simulate", "--config", str(gen_config), "--seed", "5", "--out", str(deals)])
        main(["fit", "--in", str(deals), "--config", str(gen_config), "--out", str(fit)])
        main(["calibrate", "--in", str(deals), "--out", str(costs)])
        out = tmp_path / "fd.json"
        rc = main(
            [
                "counterfactual", "--in", str(deals), "--fit", str(fit), "--costs", str(costs),
                "--scenario", "first_degree", "--out", str(out),
            ]
        )
        assert rc == 0
        data = json.loads(out.read_text())
        assert data["consumer_welfare"] == 0.0
        assert data["social_welfare"] == pytest.approx(data["profit"])

    def test_flip_outcomes_writes_modified_csv(self, tmp_path, gen_config):
        deals = tmp_path / "d.csv"
        main(["simulate", "--config", str(gen_config), "--seed", "5", "--out", str(deals)])
        out = tmp_path / "flipped.csv"
        rc = main(
            [
                "counterfactual", "--in", str(deals), "--fit", "unused", "--costs", "unused",
                "--scenario", "flip_outcomes", "--flip-prob", "1.0", "--favored", "20-50",
                "--seed", "3", "--out", str(out),
            ]
        )
        assert rc == 0
        records, _ = io.read_deals_csv(out)
        for r in records:
            assert r.success == int(20 <= r.size < 50)

    def test_pipeline_manifest_and_reports(self, tmp_path, gen_config):
        work = tmp_path / "run"
        rc = main(
            [
                "pipeline", "--config", str(gen_config), "--workdir", str(work), "--seed", "5",
                "--set", "n_customers=250",
            ]
        )
        assert rc == 0
        manifest = json.loads((work / "MANIFEST.json").read_text())
        assert manifest["ok"] is True
        assert manifest["stages_completed"] == [
            "simulate", "fit", "calibrate", "optimize", "counterfactual", "report",
        ]
        suite = json.loads((work / "scenario_suite.json").read_text())
        assert suite["ordering_chain_ok"] is True
        assert (work / "report.csv").exists() and (work / "plot_data.csv").exists()

    def test_pipeline_failure_leaves_partial_manifest(self, tmp_path, gen_config):
        work = tmp_path / "run2"
        rc = main(
            [
                "pipeline", "--config", str(gen_config), "--workdir", str(work), "--seed", "5",
                "--set", "n_customers=250", "--set", "stages=simulate,optimize",
            ]
        )
        assert rc == 2  # optimize needs the fit stage's output
        manifest = json.loads((work / "MANIFEST.json").read_text())
        assert manifest["ok"] is False
        assert manifest["stages_completed"] == ["simulate"]
        assert manifest["failed_stage"] == "optimize"

    def test_byte_identical_reruns(self, tmp_path, gen_config):
        outs = []
        for tag in ("a", "b"):
            deals = tmp_path / f"deals_{tag}.csv"
            fit = tmp_path / f"fit_{tag}.json"
            main(["simulate", "--config", str(gen_config), "--seed", "11", "--out", str(deals)])
            main(["fit", "--in", str(deals), "--config", str(gen_config), "--out", str(fit)])
            outs.append((deals.read_bytes(), fit.read_bytes()))
        assert outs[0] == outs[1]
