"""Report builders shared by the HTTP service and the CLI.

Every report is a plain JSON-ready dict that embeds a run manifest
(subcommand, full config, package version, timestamp) so any output file can
be reproduced bit for bit: the timestamp honors SOURCE_DATE_EPOCH, and a
rerun reuses the manifest's stored timestamp.  Non-finite floats are mapped
to null (zero wealth reports a null log and a 0.0 growth factor) so payloads
stay inside strict JSON.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .assignments import LaplaceAssignment
from .covering import (
    FiniteSet,
    ProductThreshold,
    SideInfoSample,
    Threshold1D,
    ThresholdFunction,
    ProductThresholdFunction,
    minimal_covering,
)
from .data import (
    ArMixing,
    extract_side_info,
    generate,
    ingest_csv_text,
    parse_process_spec,
    parse_side_mode,
    parse_side_process,
    to_price_relatives,
)
from .epoch_mixture import EpochMixtureAssignment
from .montecarlo import McConfig, mc_wealth_epoch_mixture, mc_wealth_statewise, mc_wealth_up
from .portfolio import (
    BRUTE_FORCE_LIMIT,
    InfeasibleExactError,
    MarketSequence,
    SimplexVector,
    best_crp,
    best_state_crp,
    crp_trajectory,
    crp_wealth,
    epoch_mixture_wealth_two_stock,
    induced_wealth_exact,
    state_crp_trajectory,
    statewise_universal_wealth_two_stock,
    trajectory_table,
    universal_crp_wealth_two_stock,
)
from .regret import LOG2, pathwise_bound_report, regret_port, regret_prob
from .empirical import rho_growth_report


def run_timestamp(override: str | None = None) -> str:
    """ISO timestamp for manifests; SOURCE_DATE_EPOCH pins it for reproducible runs."""
    if override:
        return override
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat()
    return datetime.now(tz=timezone.utc).isoformat()


def build_manifest(subcommand: str, config: dict, timestamp: str | None = None) -> dict:
    return {
        "subcommand": subcommand,
        "config": config,
        "version": __version__,
        "timestamp": run_timestamp(timestamp),
    }


def _finite(x: float) -> float | None:
    return float(x) if math.isfinite(x) else None


def _growth(log_wealth: float) -> float | None:
    if log_wealth == -math.inf:
        return 0.0
    try:
        return float(math.exp(log_wealth))
    except OverflowError:
        return None


def parse_function_class(spec: dict, side_dim: int | None = None):
    family = spec.get("family")
    if family == "threshold1d":
        return Threshold1D()
    if family == "product_threshold":
        dim = spec.get("dim") or side_dim
        if dim is None:
            raise ValueError("product_threshold needs a dimension")
        if dim > 4:
            raise ValueError("product_threshold is limited to 4 coordinates")
        return ProductThreshold(dim=int(dim))
    if family == "finite":
        fns = []
        for d in spec.get("functions", []):
            kind = d.get("kind")
            if kind == "threshold":
                fns.append(ThresholdFunction(float(d["threshold"])))
            elif kind == "product_threshold":
                fns.append(ProductThresholdFunction(tuple(float(a) for a in d["thresholds"])))
            else:
                raise ValueError(f"unknown finite member kind: {kind!r}")
        return FiniteSet(tuple(fns), states_count=spec.get("n_states"))
    raise ValueError(f"unknown function-class family: {family!r}")


def _strategy_row(name: str, log_wealth: float, stderr: float | None, method: str) -> dict:
    return {
        "name": name,
        "log_wealth": _finite(log_wealth),
        "growth_factor": _growth(log_wealth),
        "stderr": _finite(stderr) if stderr is not None else None,
        "method": method,
    }


def _exact_or_mc_universal(market: MarketSequence, samples: int, seed: int) -> dict:
    if market.n_stocks == 2:
        return _strategy_row(
            "universal_crp", universal_crp_wealth_two_stock(market), None, "exact"
        )
    if market.n_stocks ** market.n_days <= BRUTE_FORCE_LIMIT:
        w = induced_wealth_exact(LaplaceAssignment(market.n_stocks), market)
        return _strategy_row("universal_crp", w, None, "exact")
    r = mc_wealth_up(market, McConfig(samples=samples, seed=seed))
    return _strategy_row("universal_crp", r.log_wealth, r.stderr, "monte_carlo")


def _exact_or_mc_mixture(
    market: MarketSequence, side: SideInfoSample, function_class, samples: int, seed: int
) -> tuple[dict, list[dict] | None]:
    if market.n_stocks == 2:
        w, breakdown = epoch_mixture_wealth_two_stock(market, side, function_class)
        return _strategy_row("side_info_mixture", w, None, "exact"), breakdown
    if market.n_stocks ** market.n_days <= BRUTE_FORCE_LIMIT:
        w = induced_wealth_exact(
            EpochMixtureAssignment(market.n_stocks, function_class), market, side
        )
        return _strategy_row("side_info_mixture", w, None, "exact"), None
    r = mc_wealth_epoch_mixture(market, side, function_class, McConfig(samples=samples, seed=seed))
    return (
        _strategy_row("side_info_mixture", r.log_wealth, r.stderr, "monte_carlo"),
        r.per_epoch,
    )


def backtest_report(
    csv_text: str,
    function_class_spec: dict,
    side: str = "prev-first",
    samples: int = 10_000,
    seed: int = 0,
    input_name: str | None = None,
    timestamp: str | None = None,
) -> dict:
    table = ingest_csv_text(csv_text)
    market = to_price_relatives(table)
    side_sample = extract_side_info(market, parse_side_mode(side))
    function_class = parse_function_class(function_class_spec, side_dim=side_sample.dim)

    uniform = SimplexVector.uniform(market.n_stocks)
    strategies = [_strategy_row("uniform_crp", crp_wealth(uniform, market), None, "exact")]
    best_theta, best_w = best_crp(market)
    row = _strategy_row("best_crp_hindsight", best_w, None, "exact")
    row["weights"] = [float(x) for x in best_theta.weights]
    strategies.append(row)
    strategies.append(_exact_or_mc_universal(market, samples, seed))
    mixture_row, breakdown = _exact_or_mc_mixture(market, side_sample, function_class, samples, seed)
    strategies.append(mixture_row)

    covering = minimal_covering(function_class, side_sample)
    per_rep = []
    rep_crps = []
    for rep in covering.representatives:
        crp, w = best_state_crp(market, rep.states(side_sample), S=rep.n_states)
        rep_crps.append(crp)
        per_rep.append(
            {"params": rep.params(), "log_wealth": _finite(w), "growth_factor": _growth(w)}
        )
    best_idx = int(np.argmax([r["log_wealth"] if r["log_wealth"] is not None else -np.inf for r in per_rep]))

    best_rep = covering.representatives[best_idx]
    trajectory = trajectory_table(
        {
            "uniform_crp": crp_trajectory(uniform, market),
            "best_crp_hindsight": crp_trajectory(best_theta, market),
            "best_state_crp": state_crp_trajectory(
                rep_crps[best_idx], market, best_rep.states(side_sample)
            ),
        }
    )

    warnings = []
    if market.n_stocks > 5 and any(s["method"] == "monte_carlo" for s in strategies):
        warnings.append(
            f"naive Monte Carlo wealth estimation needs on the order of "
            f"(1/accuracy)^m draws; treat the {market.n_stocks}-stock estimates as crude"
        )

    config = {
        "input": {
            "name": input_name,
            "sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
            "rows": table.n_rows,
        },
        "function_class": function_class_spec,
        "side": side,
        "samples": samples,
        "seed": seed,
    }
    return {
        "manifest": build_manifest("backtest", config, timestamp),
        "n_days": market.n_days,
        "n_stocks": market.n_stocks,
        "tickers": list(table.tickers),
        "strategies": strategies,
        "state_strategies": {
            "ell": covering.ell,
            "best": per_rep[best_idx],
            "per_representative": per_rep,
        },
        "per_epoch": breakdown,
        "trajectory": trajectory,
        "warnings": warnings,
    }


def cover_report(
    function_class_spec: dict, points, timestamp: str | None = None
) -> dict:
    sample = SideInfoSample(np.asarray(points, dtype=np.float64))
    function_class = parse_function_class(function_class_spec, side_dim=sample.dim)
    covering = minimal_covering(function_class, sample)
    config = {"function_class": function_class_spec, "points": np.asarray(points).tolist()}
    return {
        "manifest": build_manifest("cover", config, timestamp),
        **covering.to_json_dict(),
        "labels": covering.label_matrix.tolist(),
    }


def rho_report(
    side_process_spec: dict,
    function_class_spec: dict,
    horizons: list[int],
    trials: int = 50,
    seed: int = 0,
    timestamp: str | None = None,
) -> dict:
    process = parse_side_process(side_process_spec)
    function_class = parse_function_class(function_class_spec, side_dim=1)
    result = rho_growth_report(
        process.sampler(), function_class, process.oracle(), horizons, trials, seed
    )
    config = {
        "process": side_process_spec,
        "function_class": function_class_spec,
        "horizons": list(horizons),
        "trials": trials,
        "seed": seed,
    }
    exponent = result["fitted_exponent"]
    return {
        "manifest": build_manifest("rho", config, timestamp),
        "rows": [
            {**r, "fitted_exponent": _finite(r["fitted_exponent"])} for r in result["rows"]
        ],
        "fitted_exponent": _finite(exponent),
    }


def simulate_report(
    estimator: str,
    csv_text: str | None = None,
    process_spec: dict | None = None,
    horizon: int | None = None,
    function_class_spec: dict | None = None,
    side: str = "prev-first",
    threshold: float = 1.0,
    samples: int = 10_000,
    seed: int = 0,
    exact: bool = False,
    input_name: str | None = None,
    timestamp: str | None = None,
) -> dict:
    if (csv_text is None) == (process_spec is None):
        raise ValueError("provide exactly one market source: csv_text or process_spec")
    if csv_text is not None:
        market = to_price_relatives(ingest_csv_text(csv_text))
        source = {
            "input": {
                "name": input_name,
                "sha256": hashlib.sha256(csv_text.encode()).hexdigest(),
            }
        }
    else:
        spec = parse_process_spec(process_spec)
        if horizon is None:
            raise ValueError("process-driven simulation needs a horizon")
        market = generate(spec, horizon).market
        source = {"process": process_spec, "horizon": horizon}

    side_sample = extract_side_info(market, parse_side_mode(side))
    config = {
        **source,
        "estimator": estimator,
        "side": side,
        "threshold": threshold,
        "samples": samples,
        "seed": seed,
        "exact": exact,
        "function_class": function_class_spec,
    }
    manifest = build_manifest("simulate", config, timestamp)
    cfg = McConfig(samples=samples, seed=seed)

    if estimator == "up":
        if exact:
            if market.n_stocks == 2:
                return {"manifest": manifest, "log_wealth": _finite(universal_crp_wealth_two_stock(market)), "stderr": 0.0, "method": "exact"}
            w = induced_wealth_exact(LaplaceAssignment(market.n_stocks), market)
            return {"manifest": manifest, "log_wealth": _finite(w), "stderr": 0.0, "method": "exact"}
        r = mc_wealth_up(market, cfg)
    elif estimator == "statewise":
        states = ThresholdFunction(threshold).states(side_sample)
        if exact:
            if market.n_stocks != 2:
                raise InfeasibleExactError("exact state-conditional wealth is only available for two stocks")
            w = statewise_universal_wealth_two_stock(market, states)
            return {"manifest": manifest, "log_wealth": _finite(w), "stderr": 0.0, "method": "exact"}
        r = mc_wealth_statewise(market, states, cfg)
    elif estimator == "mixture":
        function_class = parse_function_class(
            function_class_spec or {"family": "threshold1d"}, side_dim=side_sample.dim
        )
        if exact:
            if market.n_stocks == 2:
                w, breakdown = epoch_mixture_wealth_two_stock(market, side_sample, function_class)
                return {"manifest": manifest, "log_wealth": _finite(w), "stderr": 0.0, "method": "exact", "per_epoch": breakdown}
            if market.n_stocks ** market.n_days > BRUTE_FORCE_LIMIT:
                raise InfeasibleExactError(
                    f"{market.n_stocks}^{market.n_days} paths exceed the exact budget; "
                    "drop --exact to use the Monte Carlo estimator"
                )
            w = induced_wealth_exact(
                EpochMixtureAssignment(market.n_stocks, function_class), market, side_sample
            )
            return {"manifest": manifest, "log_wealth": _finite(w), "stderr": 0.0, "method": "exact"}
        r = mc_wealth_epoch_mixture(market, side_sample, function_class, cfg)
    else:
        raise ValueError(f"unknown estimator: {estimator!r}")

    out = {"manifest": manifest, "method": "monte_carlo", **r.to_json_dict()}
    out["log_wealth"] = _finite(r.log_wealth)
    out["stderr"] = _finite(r.stderr)
    if market.n_stocks > 5:
        out["warnings"] = [
            f"naive Monte Carlo wealth estimation needs on the order of "
            f"(1/accuracy)^m draws; treat the {market.n_stocks}-stock estimates as crude"
        ]
    return out


def regret_sweep_report(
    process_spec: dict,
    function_class_spec: dict,
    horizons: list[int],
    trials: int = 3,
    seed: int = 0,
    side: str = "prev-first",
    timestamp: str | None = None,
) -> dict:
    """Per-horizon mean hindsight portfolio regret and log-loss regret of the
    epoch-doubling strategy, with the realized growth bound.

    The portfolio regret is exact (two-stock quadrature candidate plus the
    hindsight solver).  The log-loss regret is exact for tiny horizons and
    otherwise the greedy-adversary lower bound; the bound column is the
    largest per-representative pathwise bound, converted to nats.
    """
    base = parse_process_spec(process_spec)
    side_mode = None if isinstance(base, ArMixing) else parse_side_mode(side)
    root = np.random.SeedSequence(seed)
    rows = []
    for n in horizons:
        trial_seeds = root.spawn(trials)
        port_vals, prob_vals, bound_vals = [], [], []
        prob_method = None
        for t in range(trials):
            spec_seed = int(trial_seeds[t].generate_state(1)[0])
            spec = parse_process_spec({**base.to_dict(), "seed": spec_seed})
            gen = generate(spec, n)
            market = gen.market
            side_sample = gen.side if gen.side is not None else extract_side_info(market, side_mode)
            function_class = parse_function_class(function_class_spec, side_dim=side_sample.dim)
            if market.n_stocks != 2:
                raise InfeasibleExactError("the regret sweep needs a two-stock process")
            assignment = EpochMixtureAssignment(2, function_class)
            candidate, _ = epoch_mixture_wealth_two_stock(market, side_sample, function_class)
            port_vals.append(regret_port(candidate, market, side_sample, function_class))
            probe = pathwise_bound_report(assignment, side_sample, function_class, S=function_class.n_states)
            bound_vals.append(max(r["rhs_bits"] for r in probe["rows"]) * LOG2)
            if 2 ** n <= 4096:
                prob_vals.append(regret_prob(assignment, side_sample, function_class))
                prob_method = "exact"
            else:
                prob_vals.append(max(r["lhs_bits"] for r in probe["rows"]) * LOG2)
                prob_method = "greedy"
        rows.append(
            {
                "n": int(n),
                "trials": trials,
                "reg_port": float(np.mean(port_vals)),
                "reg_prob": float(np.mean(prob_vals)),
                "reg_prob_method": prob_method,
                "bound": float(np.mean(bound_vals)),
                "reg_port_over_n": float(np.mean(port_vals) / n),
            }
        )
    config = {
        "process": process_spec,
        "function_class": function_class_spec,
        "horizons": list(horizons),
        "trials": trials,
        "seed": seed,
        "side": side,
    }
    return {"manifest": build_manifest("regret-sweep", config, timestamp), "rows": rows}


# ---------------------------------------------------------------------------
# CSV rendering
# ---------------------------------------------------------------------------


def report_to_csv(report: dict) -> str:
    """Flat CSV rendering of a report's main table."""
    sub = report["manifest"]["subcommand"]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    if sub == "backtest":
        writer.writerow(["name", "log_wealth", "growth_factor", "stderr", "method"])
        for row in report["strategies"]:
            writer.writerow([row["name"], row["log_wealth"], row["growth_factor"], row["stderr"], row["method"]])
        best = report["state_strategies"]["best"]
        writer.writerow(["best_state_crp", best["log_wealth"], best["growth_factor"], None, "exact"])
        if report.get("trajectory"):
            writer.writerow([])
            names = [k for k in report["trajectory"][0] if k != "t"]
            writer.writerow(["t", *names])
            for row in report["trajectory"]:
                writer.writerow([row["t"], *[row[k] for k in names]])
    elif sub == "regret-sweep":
        writer.writerow(["n", "trials", "reg_port", "reg_prob", "reg_prob_method", "bound", "reg_port_over_n"])
        for r in report["rows"]:
            writer.writerow([r["n"], r["trials"], r["reg_port"], r["reg_prob"], r["reg_prob_method"], r["bound"], r["reg_port_over_n"]])
    elif sub == "rho":
        writer.writerow(["n", "trials", "mean_rho", "stderr", "fitted_exponent"])
        for r in report["rows"]:
            writer.writerow([r["n"], r["trials"], r["mean_rho"], r["stderr"], r["fitted_exponent"]])
    elif sub == "cover":
        writer.writerow(["index", "params", "ell"])
        for i, p in enumerate(report["parameters"]):
            writer.writerow([i, p, report["ell"]])
    elif sub == "simulate":
        writer.writerow(["log_wealth", "stderr", "method"])
        writer.writerow([report["log_wealth"], report["stderr"], report["method"]])
        if report.get("per_epoch"):
            writer.writerow([])
            writer.writerow(["j", "ell", "log_factor"])
            for e in report["per_epoch"]:
                writer.writerow([e["j"], e["ell"], e["log_factor"]])
    else:
        raise ValueError(f"no CSV rendering for {sub!r} reports")
    return buf.getvalue()
