"""File formats: deals CSV, JSON artifacts, optimizer traces, plot data.

Every writer is deterministic -- fixed column orders, sorted JSON keys, no
timestamps -- so identical inputs and seeds reproduce byte-identical files.
All JSON artifacts carry a ``format_version`` field.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass

from .counterfactuals import ScenarioResult, SegmentWelfare
from .estimation import FitResult
from .market import (
    CostParams,
    CustomerRecord,
    Interval,
    SizeBinConfig,
    ValueModel,
)
from .synth import CovariateSpec, GeneratorSettings
from .tariff import DEFAULT_SEGMENT_STARTS, PriceSchedule, marginal_price

FORMAT_VERSION = "1"
CORE_COLUMNS = ("id", "year", "size", "success", "unit_price", "snc")


# -- deals CSV ----------------------------------------------------------------


def write_deals_csv(records, path, covariate_names=None) -> None:
    records = list(records)
    if covariate_names is None:
        names: set[str] = set()
        for r in records:
            names.update(r.covariates)
        covariate_names = sorted(names)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(CORE_COLUMNS) + list(covariate_names))
        for r in records:
            writer.writerow(
                [
                    r.id,
                    r.year,
                    r.size,
                    r.success,
                    repr(float(r.observed_unit_price)),
                    repr(float(r.snc_value)),
                ]
                + [repr(float(r.covariates[name])) for name in covariate_names]
            )


def read_deals_csv(path, covariate_names=None):
    """Parse and validate a deals file.

    Returns (records, ignored_columns).  A malformed cell fails with its
    1-based data row number and column name; when an expected covariate list
    is supplied, extra columns are ignored with a warning.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        for col in CORE_COLUMNS:
            if col not in header:
                raise ValueError(f"{path}: missing required column {col!r}")
        cov_cols = [c for c in header if c not in CORE_COLUMNS]
        ignored: list[str] = []
        if covariate_names is not None:
            ignored = [c for c in cov_cols if c not in covariate_names]
            missing = [c for c in covariate_names if c not in cov_cols]
            if missing:
                raise ValueError(f"{path}: missing covariate columns {missing}")
            cov_cols = [c for c in cov_cols if c in covariate_names]
            if ignored:
                warnings.warn(f"{path}: ignoring unknown covariate columns {ignored}")
        pos = {c: header.index(c) for c in header}

        records = []
        for rowno, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise ValueError(
                    f"{path}: row {rowno}: expected {len(header)} fields, got {len(row)}"
                )

            def cell(col, cast):
                raw = row[pos[col]]
                try:
                    return cast(raw)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {rowno}: column {col!r}: cannot parse {raw!r}"
                    ) from None

            try:
                records.append(
                    CustomerRecord(
                        id=row[pos["id"]],
                        year=cell("year", int),
                        covariates={c: cell(c, float) for c in cov_cols},
                        size=cell("size", int),
                        success=cell("success", int),
                        observed_unit_price=cell("unit_price", float),
                        snc_value=cell("snc", float),
                    )
                )
            except ValueError as exc:
                raise ValueError(f"{path}: row {rowno}: {exc}") from None
    return records, ignored


# -- JSON artifacts -----------------------------------------------------------


def write_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def schedule_to_json(schedule: PriceSchedule) -> dict:
    d = schedule.to_dict()
    d["format_version"] = FORMAT_VERSION
    return d


def schedule_from_json(d: dict) -> PriceSchedule:
    return PriceSchedule.from_dict(d)


def _interval_to_list(iv: Interval) -> list:
    lo, hi = iv
    return [lo, hi]


def _interval_from_list(pair) -> Interval:
    lo, hi = pair
    return (int(lo), None if hi is None else int(hi))


def value_model_to_json(vm: ValueModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "beta": dict(vm.beta),
        "year_effects": {str(y): e for y, e in vm.year_effects.items()},
        "size_effects": [
            _interval_to_list(iv) + [vm.size_effects[iv]] for iv in vm.size_intervals
        ],
        "sigma": vm.sigma,
        "error_family": vm.error_family,
        "smoothness": vm.smoothness,
    }


def value_model_from_json(d: dict) -> ValueModel:
    return ValueModel(
        beta=d["beta"],
        year_effects={int(y): e for y, e in d["year_effects"].items()},
        size_effects={
            _interval_from_list(entry[:2]): entry[2] for entry in d["size_effects"]
        },
        sigma=d["sigma"],
        error_family=d["error_family"],
        smoothness=d.get("smoothness", 1.0),
    )


def fit_result_to_json(fit: FitResult, bins: SizeBinConfig | None = None) -> dict:
    d = {
        "format_version": FORMAT_VERSION,
        "value_model": value_model_to_json(fit.value_model),
        "neg_log_likelihood": fit.neg_log_likelihood,
        "converged": fit.converged,
        "grad_max_norm": fit.grad_max_norm,
        "n_obs": fit.n_obs,
        "parameter_names": list(fit.parameter_names),
        "parameters": [float(x) for x in fit.parameters],
        "standard_errors": dict(fit.standard_errors),
        "size_pmf": {str(s): p for s, p in fit.size_pmf.items()},
    }
    if bins is not None:
        d["bins"] = {
            "estimation": [_interval_to_list(iv) for iv in bins.estimation_bins],
            "pricing": [_interval_to_list(iv) for iv in bins.pricing_bins],
        }
    return d


def bins_from_json(d: dict) -> SizeBinConfig:
    return SizeBinConfig(
        estimation_bins=tuple(_interval_from_list(x) for x in d["estimation"]),
        pricing_bins=tuple(_interval_from_list(x) for x in d["pricing"]),
    )


def costs_to_json(costs: CostParams) -> dict:
    return {"format_version": FORMAT_VERSION, "c1": costs.c1, "c2": costs.c2}


def costs_from_json(d: dict) -> CostParams:
    return CostParams(c1=d["c1"], c2=d["c2"])


def scenario_to_json(result: ScenarioResult, schedule: PriceSchedule | None = None) -> dict:
    d = {
        "format_version": FORMAT_VERSION,
        "scheme_label": result.scheme_label,
        "profit": result.profit,
        "revenue": result.revenue,
        "consumer_welfare": result.consumer_welfare,
        "social_welfare": result.social_welfare,
        "per_segment": {
            label: {
                "profit": s.profit,
                "revenue": s.revenue,
                "consumer_welfare": s.consumer_welfare,
                "social_welfare": s.social_welfare,
                "buyer_count_expectation": s.buyer_count_expectation,
            }
            for label, s in result.per_segment.items()
        },
    }
    if result.confidence:
        d["confidence"] = {k: list(v) for k, v in result.confidence.items()}
    if schedule is not None:
        d["schedule"] = schedule.to_dict()
    return d


def scenario_from_json(d: dict) -> tuple[ScenarioResult, PriceSchedule | None]:
    result = ScenarioResult(
        scheme_label=d["scheme_label"],
        profit=d["profit"],
        revenue=d["revenue"],
        consumer_welfare=d["consumer_welfare"],
        social_welfare=d["social_welfare"],
        per_segment={
            label: SegmentWelfare(**s) for label, s in d["per_segment"].items()
        },
        confidence={k: tuple(v) for k, v in d["confidence"].items()}
        if "confidence" in d
        else None,
    )
    schedule = PriceSchedule.from_dict(d["schedule"]) if "schedule" in d else None
    return result, schedule


# -- CSV reports --------------------------------------------------------------


def scenarios_to_csv(results, path) -> None:
    """Long-format welfare table: one row per (scheme, segment, measure)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scheme", "segment", "measure", "value"])
        for r in results:
            for measure in ("profit", "revenue", "consumer_welfare", "social_welfare"):
                writer.writerow([r.scheme_label, "total", measure, repr(getattr(r, measure))])
            for label, seg in r.per_segment.items():
                for measure in (
                    "profit",
                    "revenue",
                    "consumer_welfare",
                    "social_welfare",
                    "buyer_count_expectation",
                ):
                    writer.writerow(
                        [r.scheme_label, label, measure, repr(getattr(seg, measure))]
                    )


def trace_to_csv(trace, path) -> None:
    trace = list(trace)
    if not trace:
        dims = 0
    else:
        dims = len(trace[0].lower)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header = ["iteration"]
        for d in range(dims):
            header += [f"lower_{d}", f"upper_{d}"]
        header += [f"incumbent_{d}" for d in range(dims)]
        header += ["grid_best_value", "incumbent_value"]
        writer.writerow(header)
        for rec in trace:
            row = [rec.iteration]
            for d in range(dims):
                row += [repr(rec.lower[d]), repr(rec.upper[d])]
            row += [repr(x) for x in rec.incumbent]
            row += [repr(rec.grid_best_value), repr(rec.incumbent_value)]
            writer.writerow(row)


@dataclass(frozen=True)
class PlotEntry:
    label: str
    schedule: PriceSchedule
    rate_ci: dict[int, tuple[float, float]] | None = None


def emit_plot_data(entries, path, bins=DEFAULT_SEGMENT_STARTS) -> None:
    """Marginal-price-versus-size curves in long format.

    One row per (scheme, representative size); representative sizes are the
    first purchasable quantity of each size bin.  Confidence bounds are
    filled when the entry carries them, else left empty.
    """
    sizes = [max(int(b), 1) for b in bins]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["scheme", "size", "marginal_price", "ci_lo", "ci_hi"])
        for entry in entries:
            for size in sizes:
                price = marginal_price(entry.schedule, size)
                lo, hi = "", ""
                if entry.rate_ci and size in entry.rate_ci:
                    lo, hi = (repr(float(x)) for x in entry.rate_ci[size])
                writer.writerow([entry.label, size, repr(float(price)), lo, hi])


# -- flat key-value configs -----------------------------------------------------


def parse_kv_file(path) -> dict[str, str]:
    """key = value lines; blank lines and #-comments ignored; later keys win."""
    out: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}: line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def apply_overrides(kv: dict[str, str], overrides) -> dict[str, str]:
    out = dict(kv)
    for item in overrides or ():
        if "=" not in item:
            raise ValueError(f"override {item!r} must look like key=value")
        key, _, value = item.partition("=")
        out[key.strip()] = value.strip()
    return out


def _parse_pairs(text: str, key_cast, val_cast=float) -> dict:
    out = {}
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        k, _, v = part.partition(":")
        out[key_cast(k.strip())] = val_cast(v.strip())
    return out


def _parse_interval_key(text: str) -> Interval:
    lo, _, hi = text.partition("-")
    return (int(lo), None if hi.strip() in ("inf", "") else int(hi))


def _parse_bins(text: str) -> tuple[Interval, ...]:
    edges = [int(x) for x in text.split(",")]
    out = []
    for i, lo in enumerate(edges):
        hi = edges[i + 1] if i + 1 < len(edges) else None
        out.append((lo, hi))
    return tuple(out)


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(x) for x in text.split(",") if x.strip())


def settings_from_kv(kv: dict[str, str]) -> GeneratorSettings:
    """Assemble generator settings from a flat config.

    Required keys: n_customers, size_pmf, beta, year_effects, size_effects,
    sigma, c1, c2, observed.kind, observed.rates.  Optional: family,
    smoothness, covariate.<name>, year_pmf, snc_pmf, estimation_bins,
    pricing_bins, observed.bins, observed.fee.
    """
    covs = []
    for key, val in kv.items():
        if key.startswith("covariate."):
            name = key[len("covariate."):]
            dist, _, params = val.partition(":")
            covs.append(
                CovariateSpec(name, dist.strip(), _parse_floats(params) or (1.0,))
            )
    covs.sort(key=lambda c: c.name)
    if not any(c.name == "const" for c in covs):
        covs.insert(0, CovariateSpec("const", "const", (1.0,)))

    bins = SizeBinConfig(
        estimation_bins=_parse_bins(kv["estimation_bins"]) if "estimation_bins" in kv else SizeBinConfig().estimation_bins,
        pricing_bins=_parse_bins(kv["pricing_bins"]) if "pricing_bins" in kv else SizeBinConfig().pricing_bins,
    )
    vm = ValueModel(
        beta=_parse_pairs(kv["beta"], str),
        year_effects=_parse_pairs(kv["year_effects"], int),
        size_effects={
            iv: g for iv, g in _parse_pairs(kv["size_effects"], _parse_interval_key).items()
        },
        sigma=float(kv["sigma"]),
        error_family=kv.get("family", "logistic"),
        smoothness=float(kv.get("smoothness", "1")),
    )
    kind = kv["observed.kind"]
    rates = _parse_floats(kv["observed.rates"])
    sched_bins = (
        tuple(int(x) for x in kv["observed.bins"].split(","))
        if "observed.bins" in kv
        else tuple(lo for lo, _ in bins.pricing_bins)
    )
    schedule = PriceSchedule(
        kind,
        rates,
        float(kv.get("observed.fee", "0")),
        sched_bins if kind in ("via_origin", "continuous") else (0,),
    )
    return GeneratorSettings(
        n_customers=int(kv["n_customers"]),
        covariates=tuple(covs),
        size_pmf=_parse_pairs(kv["size_pmf"], int),
        value_model=vm,
        costs=CostParams(c1=float(kv["c1"]), c2=float(kv["c2"])),
        observed_schedule=schedule,
        bins=bins,
        year_pmf=_parse_pairs(kv["year_pmf"], int) if "year_pmf" in kv else None,
        snc_pmf=_parse_pairs(kv["snc_pmf"], float) if "snc_pmf" in kv else None,
    )


def latents_to_csv(draw, path) -> None:
    """Latent values beside the observable ids, for oracle checks."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "latent_value", "mean_value", "intended_size", "chosen_quantity"])
        for rec, v, mu, qbar, q in zip(
            draw.market.customers,
            draw.latent_values,
            draw.mean_values,
            draw.intended_sizes,
            draw.chosen_quantities,
        ):
            writer.writerow([rec.id, repr(float(v)), repr(float(mu)), int(qbar), int(q)])
