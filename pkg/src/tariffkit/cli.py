"""Batch command-line surface.

Commands: simulate, ingest, fit, calibrate, optimize, counterfactual,
bootstrap, report, pipeline.  Every command is a pure function of its input
files, flags, and seed; outputs are files only.  Exit codes: 0 success,
2 missing input file, 1 any other failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .counterfactuals import (
    first_degree,
    homogenize_demand,
    ic_gap_analysis,
    cost_sweep,
    simulate_counterfactual_outcomes,
    third_degree_by_covariates,
    third_degree_by_size,
    _scenario_from_report,
)
from .estimation import (
    EstimationConfig,
    augment_zero_price,
    bootstrap,
    calibrate_costs,
    filter_concavity_dips,
    fit_mle,
)
from .market import Market, SizeBinConfig
from .optimize import GridBisectionConfig, individually_optimized, optimize_schedule
from .synth import generate_market


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except FileNotFoundError as exc:
        print(f"error: missing input file: {exc.filename or exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # deliberate catch-all: batch tool, files only
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tariffkit",
        description="Estimate deal-level demand and optimize nonlinear tariffs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic deals file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--latents", help="also write latent values for oracle checks")
    p.add_argument("--set", action="append", dest="overrides", metavar="KEY=VALUE")
    p.set_defaults(handler=_cmd_simulate)

    p = sub.add_parser("ingest", help="validate a deals file and summarize it")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--covariates", help="comma list of expected covariate columns")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_ingest)

    p = sub.add_parser("fit", help="maximum-likelihood fit of the value model")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--schedule", help="observed tariff JSON; enables the dip filter")
    p.add_argument("--keep-dips", action="store_true")
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--set", action="append", dest="overrides", metavar="KEY=VALUE")
    p.set_defaults(handler=_cmd_fit)

    p = sub.add_parser("calibrate", help="calibrate per-deal and per-unit costs")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--setup-cost", type=float, default=1253.0)
    p.add_argument("--snc-fixed-share", type=float, default=0.65)
    p.add_argument("--per-unit-cost", type=float, default=601.0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_calibrate)

    p = sub.add_parser("optimize", help="search a tariff family for maximal profit")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--costs", required=True)
    p.add_argument(
        "--kind",
        required=True,
        choices=("linear", "via_origin", "continuous", "two_part", "via_origin_fee"),
    )
    p.add_argument("--points-per-dim", type=int, default=5)
    p.add_argument("--zoom", type=float, default=0.5)
    p.add_argument("--stop-width", type=float, default=1.0)
    p.add_argument("--lower", type=float, default=0.0)
    p.add_argument("--upper", type=float, default=5000.0)
    p.add_argument("--out", required=True)
    p.add_argument("--trace")
    p.add_argument("--report")
    p.set_defaults(handler=_cmd_optimize)

    p = sub.add_parser("counterfactual", help="run a pricing scenario")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--fit", required=True)
    p.add_argument("--costs", required=True)
    p.add_argument(
        "--scenario",
        required=True,
        choices=(
            "first_degree",
            "third_degree_size",
            "third_degree_cov",
            "homogenize",
            "cost_sweep",
            "ic_gap",
            "suite",
            "flip_outcomes",
        ),
    )
    p.add_argument("--groups", type=int, default=2)
    p.add_argument("--c1-list", default="")
    p.add_argument("--c2-list", default="")
    p.add_argument("--flip-prob", type=float, default=0.7)
    p.add_argument("--favored", default="20-50", help="size interval lo-hi (hi=inf allowed)")
    p.add_argument("--invert", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--points-per-dim", type=int, default=5)
    p.add_argument("--stop-width", type=float, default=1.0)
    p.add_argument("--upper", type=float, default=5000.0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_counterfactual)

    p = sub.add_parser("bootstrap", help="bootstrap standard errors for the fit")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--schedule", help="observed tariff JSON; enables the dip filter")
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_bootstrap)

    p = sub.add_parser("report", help="combine scenario files into CSV tables")
    p.add_argument("--scenarios", nargs="+", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--plot-data")
    p.set_defaults(handler=_cmd_report)

    p = sub.add_parser("pipeline", help="run a configured stage list end to end")
    p.add_argument("--config", required=True)
    p.add_argument("--workdir", required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--set", action="append", dest="overrides", metavar="KEY=VALUE")
    p.set_defaults(handler=_cmd_pipeline)

    return parser


# -- command handlers ----------------------------------------------------------


def _cmd_simulate(args) -> int:
    kv = io.apply_overrides(io.parse_kv_file(args.config), args.overrides)
    settings = io.settings_from_kv(kv)
    draw = generate_market(settings, args.seed)
    io.write_deals_csv(draw.market.customers, args.out)
    if args.latents:
        io.latents_to_csv(draw, args.latents)
    return 0


def _cmd_ingest(args) -> int:
    names = args.covariates.split(",") if args.covariates else None
    records, ignored = io.read_deals_csv(args.input, names)
    pmf = {}
    for r in records:
        pmf[r.size] = pmf.get(r.size, 0) + 1
    io.write_json(
        {
            "format_version": io.FORMAT_VERSION,
            "rows": len(records),
            "years": sorted({r.year for r in records}),
            "ignored_columns": ignored,
            "size_counts": {str(s): c for s, c in sorted(pmf.items())},
        },
        args.out,
    )
    return 0


def _estimation_config_from_kv(kv: dict[str, str]) -> EstimationConfig:
    bins = SizeBinConfig(
        estimation_bins=io._parse_bins(kv["estimation_bins"])
        if "estimation_bins" in kv
        else SizeBinConfig().estimation_bins,
        pricing_bins=io._parse_bins(kv["pricing_bins"])
        if "pricing_bins" in kv
        else SizeBinConfig().pricing_bins,
    )
    return EstimationConfig(
        error_family=kv.get("family", "logistic"),
        bins=bins,
        covariate_names=tuple(
            s.strip() for s in kv.get("covariates", "const").split(",") if s.strip()
        ),
        optimizer_tolerance=float(kv.get("tolerance", "1e-12")),
        sigma_floor=float(kv.get("sigma_floor", "1e-6")),
        bootstrap_reps=int(kv.get("bootstrap_reps", "0")),
        seed=int(kv.get("seed", "0")),
        max_iter=int(kv.get("max_iter", "500")),
        n_restarts=int(kv.get("n_restarts", "4")),
    )


def _prepared_records(args, config):
    records, _ = io.read_deals_csv(args.input)
    dropped = 0
    if args.schedule and not getattr(args, "keep_dips", False):
        schedule = io.schedule_from_json(io.read_json(args.schedule))
        records, dropped = filter_concavity_dips(records, schedule)
    if not args.no_augment:
        records = augment_zero_price(records)
    return records, dropped


def _cmd_fit(args) -> int:
    kv = io.apply_overrides(io.parse_kv_file(args.config), args.overrides)
    config = _estimation_config_from_kv(kv)
    records, dropped = _prepared_records(args, config)
    fit = fit_mle(records, config)
    out = io.fit_result_to_json(fit, config.bins)
    out["dropped_dip_records"] = dropped
    io.write_json(out, args.out)
    return 0


def _cmd_calibrate(args) -> int:
    records, _ = io.read_deals_csv(args.input)
    costs = calibrate_costs(
        records,
        setup_cost=args.setup_cost,
        snc_fixed_share=args.snc_fixed_share,
        per_unit_cost=args.per_unit_cost,
    )
    io.write_json(io.costs_to_json(costs), args.out)
    return 0


def _load_market(args) -> Market:
    records, _ = io.read_deals_csv(args.input)
    fit = io.read_json(args.fit)
    model = io.value_model_from_json(fit["value_model"])
    bins = io.bins_from_json(fit["bins"]) if "bins" in fit else SizeBinConfig()
    costs = io.costs_from_json(io.read_json(args.costs))
    return Market(tuple(records), model, costs, bins)


def _grid_config(args, dims: int) -> GridBisectionConfig:
    return GridBisectionConfig(
        dims=dims,
        points_per_dim=args.points_per_dim,
        zoom=getattr(args, "zoom", 0.5),
        lower=getattr(args, "lower", 0.0),
        upper=args.upper,
        stop_width=args.stop_width,
    )


def _dims_for(kind: str, market: Market) -> int:
    nbins = len(market.bins.pricing_bins)
    return {
        "linear": 1,
        "two_part": 2,
        "via_origin": nbins,
        "continuous": nbins,
        "via_origin_fee": nbins + 1,
    }[kind]


def _cmd_optimize(args) -> int:
    market = _load_market(args)
    config = _grid_config(args, _dims_for(args.kind, market))
    search = optimize_schedule(market, args.kind, config)
    out = io.schedule_to_json(search.schedule)
    out["expected_profit"] = search.report.expected_profit
    io.write_json(out, args.out)
    if args.trace:
        io.trace_to_csv(search.trace, args.trace)
    if args.report:
        io.write_json(
            io.scenario_to_json(
                _scenario_from_report(f"optimal_{args.kind}", search.report),
                search.schedule,
            ),
            args.report,
        )
    return 0


def _parse_interval_arg(text: str):
    lo, _, hi = text.partition("-")
    return (int(lo), None if hi.strip() in ("", "inf") else int(hi))


def _cmd_counterfactual(args) -> int:
    if args.scenario == "flip_outcomes":
        if args.seed is None:
            raise ValueError("flip_outcomes needs --seed")
        records, _ = io.read_deals_csv(args.input)
        flipped = simulate_counterfactual_outcomes(
            records, args.flip_prob, _parse_interval_arg(args.favored), args.seed, args.invert
        )
        io.write_deals_csv(flipped, args.out)
        return 0

    market = _load_market(args)
    config5 = _grid_config(args, _dims_for("via_origin", market))

    if args.scenario == "first_degree":
        io.write_json(io.scenario_to_json(first_degree(market)), args.out)
    elif args.scenario == "third_degree_size":
        result, ind = third_degree_by_size(market, _grid_config(args, 1))
        io.write_json(io.scenario_to_json(result, ind.schedule), args.out)
    elif args.scenario == "third_degree_cov":
        searches, result = third_degree_by_covariates(market, args.groups, config5)
        out = io.scenario_to_json(result)
        out["group_schedules"] = [s.schedule.to_dict() for s in searches]
        io.write_json(out, args.out)
    elif args.scenario == "homogenize":
        flat = homogenize_demand(market)
        search = optimize_schedule(flat, "via_origin", config5)
        io.write_json(
            io.scenario_to_json(
                _scenario_from_report("homogenized_via_origin", search.report),
                search.schedule,
            ),
            args.out,
        )
    elif args.scenario == "cost_sweep":
        c1s = [float(x) for x in args.c1_list.split(",") if x.strip()] or [market.costs.c1]
        c2s = [float(x) for x in args.c2_list.split(",") if x.strip()] or [market.costs.c2]
        points = cost_sweep(market, c1s, c2s, config5)
        io.write_json(
            {
                "format_version": io.FORMAT_VERSION,
                "points": [
                    {
                        "c1": p.c1,
                        "c2": p.c2,
                        "rates": list(p.schedule.rates),
                        "expected_profit": p.report.expected_profit,
                    }
                    for p in points
                ],
            },
            args.out,
        )
    elif args.scenario == "ic_gap":
        gap = ic_gap_analysis(market, config5)
        io.write_json(
            {
                "format_version": io.FORMAT_VERSION,
                "profit_joint": gap.profit_joint,
                "profit_separate": gap.profit_separate,
                "naive_separate_total": gap.naive_separate_total,
                "per_segment_gap": gap.per_segment_gap,
                "joint_rates": list(gap.joint.schedule.rates),
                "separate_rates": list(gap.separate.schedule.rates),
            },
            args.out,
        )
    elif args.scenario == "suite":
        _run_suite(market, config5, args.out)
    return 0


def _run_suite(market: Market, config5: GridBisectionConfig, out_path: str) -> None:
    """Ordering-chain scenario batch: linear, separate, joint, per-segment
    optimum, first degree; the chain inequality is stamped in the output."""
    lin = optimize_schedule(market, "linear")
    ind = individually_optimized(market)
    joint = optimize_schedule(
        market, "via_origin", config5, extra_candidates=[np.array(ind.schedule.rates)]
    )
    fd = first_degree(market)
    chain = [
        lin.report.expected_profit,
        ind.report.expected_profit,
        joint.report.expected_profit,
        ind.naive_profit,
        fd.profit,
    ]
    ok = all(chain[i] <= chain[i + 1] + 1e-6 for i in range(len(chain) - 1))
    scenarios = [
        io.scenario_to_json(_scenario_from_report("optimal_linear", lin.report), lin.schedule),
        io.scenario_to_json(
            _scenario_from_report("separately_optimized", ind.report), ind.schedule
        ),
        io.scenario_to_json(
            _scenario_from_report("optimal_via_origin", joint.report), joint.schedule
        ),
        io.scenario_to_json(fd),
    ]
    io.write_json(
        {
            "format_version": io.FORMAT_VERSION,
            "scenarios": scenarios,
            "profit_chain": {
                "optimal_linear": chain[0],
                "separately_optimized": chain[1],
                "optimal_via_origin": chain[2],
                "per_segment_optimum_total": chain[3],
                "first_degree": chain[4],
            },
            "ordering_chain_ok": ok,
        },
        out_path,
    )


def _cmd_bootstrap(args) -> int:
    records, _ = io.read_deals_csv(args.input)
    kv = io.parse_kv_file(args.config)
    config = _estimation_config_from_kv(kv)
    config = replace(config, bootstrap_reps=args.reps, seed=args.seed)
    if args.schedule:
        schedule = io.schedule_from_json(io.read_json(args.schedule))
        records, _ = filter_concavity_dips(records, schedule)
    fit_config = replace(config, bootstrap_reps=0)

    def statistic(recs):
        prepared = recs if args.no_augment else augment_zero_price(recs)
        return fit_mle(prepared, fit_config).parameters

    boot = bootstrap(records, config, statistic)
    names = fit_mle(
        records if args.no_augment else augment_zero_price(records), fit_config
    ).parameter_names
    io.write_json(
        {
            "format_version": io.FORMAT_VERSION,
            "parameter_names": list(names),
            "std": [float(x) for x in boot.std],
            "percentile_lo": [float(x) for x in boot.lo],
            "percentile_hi": [float(x) for x in boot.hi],
            "replicates": int(boot.samples.shape[0]) if boot.samples.size else 0,
            "failed": boot.n_failed,
        },
        args.out,
    )
    return 0


def _cmd_report(args) -> int:
    results = []
    entries = []
    for path in args.scenarios:
        data = io.read_json(path)
        blocks = data["scenarios"] if "scenarios" in data else [data]
        for block in blocks:
            if "scheme_label" not in block:
                continue
            result, schedule = io.scenario_from_json(block)
            results.append(result)
            if schedule is not None:
                entries.append(io.PlotEntry(result.scheme_label, schedule))
    io.scenarios_to_csv(results, args.out_csv)
    if args.plot_data:
        io.emit_plot_data(entries, args.plot_data)
    return 0


# -- pipeline ------------------------------------------------------------------


def _cmd_pipeline(args) -> int:
    kv = io.apply_overrides(io.parse_kv_file(args.config), args.overrides)
    return run_pipeline(kv, Path(args.workdir), args.seed)


def run_pipeline(kv: dict[str, str], workdir: Path, seed: int) -> int:
    """Execute the configured stage list; write a MANIFEST recording what
    completed.  Any stage failure aborts with a partial MANIFEST."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    stages = [s.strip() for s in kv.get("stages", "").split(",") if s.strip()]
    if not stages:
        raise ValueError("pipeline config needs a 'stages' key")
    completed: list[str] = []
    outputs: dict[str, list[str]] = {}
    manifest_path = workdir / "MANIFEST.json"

    def finish(ok: bool, failed: str | None = None) -> int:
        io.write_json(
            {
                "format_version": io.FORMAT_VERSION,
                "ok": ok,
                "stages_completed": completed,
                "failed_stage": failed,
                "outputs": {k: sorted(v) for k, v in outputs.items()},
            },
            manifest_path,
        )
        return 0 if ok else 1

    for stage in stages:
        try:
            files = _run_stage(stage, kv, workdir, seed)
        except FileNotFoundError as exc:
            print(f"error: stage {stage}: missing input {exc.filename or exc}", file=sys.stderr)
            finish(False, stage)
            return 2
        except Exception as exc:
            print(f"error: stage {stage}: {exc}", file=sys.stderr)
            return finish(False, stage)
        completed.append(stage)
        outputs[stage] = [str(Path(f).relative_to(workdir)) for f in files]
    return finish(True)


def _run_stage(stage: str, kv: dict[str, str], workdir: Path, seed: int) -> list[Path]:
    deals = workdir / "deals.csv"
    fitp = workdir / "fit.json"
    costsp = workdir / "costs.json"
    if stage == "simulate":
        draw = generate_market(io.settings_from_kv(kv), seed)
        io.write_deals_csv(draw.market.customers, deals)
        io.latents_to_csv(draw, workdir / "latents.csv")
        return [deals, workdir / "latents.csv"]
    if stage == "fit":
        records, _ = io.read_deals_csv(deals)
        config = _estimation_config_from_kv(kv)
        if kv.get("observed.kind"):
            schedule = io.settings_from_kv(kv).observed_schedule
            records, _ = filter_concavity_dips(records, schedule)
        fit = fit_mle(augment_zero_price(records), config)
        io.write_json(io.fit_result_to_json(fit, config.bins), fitp)
        return [fitp]
    if stage == "calibrate":
        records, _ = io.read_deals_csv(deals)
        io.write_json(io.costs_to_json(calibrate_costs(records)), costsp)
        return [costsp]
    if stage == "optimize":
        market = _pipeline_market(deals, fitp, costsp)
        kinds = [k.strip() for k in kv.get("optimize.kinds", "via_origin").split(",")]
        files = []
        for kind in kinds:
            search = optimize_schedule(market, kind, _pipeline_grid(kv, kind, market))
            sched_path = workdir / f"schedule_{kind}.json"
            out = io.schedule_to_json(search.schedule)
            out["expected_profit"] = search.report.expected_profit
            io.write_json(out, sched_path)
            trace_path = workdir / f"trace_{kind}.csv"
            io.trace_to_csv(search.trace, trace_path)
            files += [sched_path, trace_path]
        return files
    if stage == "counterfactual":
        market = _pipeline_market(deals, fitp, costsp)
        out = workdir / "scenario_suite.json"
        _run_suite(market, _pipeline_grid(kv, "via_origin", market), out)
        return [out]
    if stage == "report":
        data = io.read_json(workdir / "scenario_suite.json")
        results = []
        entries = []
        for block in data["scenarios"]:
            result, schedule = io.scenario_from_json(block)
            results.append(result)
            if schedule is not None:
                entries.append(io.PlotEntry(result.scheme_label, schedule))
        csv_path = workdir / "report.csv"
        plot_path = workdir / "plot_data.csv"
        io.scenarios_to_csv(results, csv_path)
        io.emit_plot_data(entries, plot_path)
        return [csv_path, plot_path]
    raise ValueError(f"unknown pipeline stage {stage!r}")


def _pipeline_market(deals: Path, fitp: Path, costsp: Path) -> Market:
    records, _ = io.read_deals_csv(deals)
    fit = io.read_json(fitp)
    model = io.value_model_from_json(fit["value_model"])
    bins = io.bins_from_json(fit["bins"]) if "bins" in fit else SizeBinConfig()
    costs = io.costs_from_json(io.read_json(costsp))
    return Market(tuple(records), model, costs, bins)


def _pipeline_grid(kv: dict[str, str], kind: str, market: Market) -> GridBisectionConfig:
    return GridBisectionConfig(
        dims=_dims_for(kind, market),
        points_per_dim=int(kv.get("optimize.points_per_dim", "5")),
        zoom=float(kv.get("optimize.zoom", "0.5")),
        lower=float(kv.get("optimize.lower", "0")),
        upper=float(kv.get("optimize.upper", "5000")),
        stop_width=float(kv.get("optimize.stop_width", "1")),
    )


if __name__ == "__main__":
    sys.exit(main())
