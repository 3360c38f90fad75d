"""Command-line entry point.

Subcommands: simulate, pivot, fit, summary, diagnose, serve.
Exit codes: 0 ok, 2 usage error, 3 data error, 4 unsupported model,
5 I/O or archive error. LAGGARD_THREADS caps chain parallelism.
"""

from __future__ import annotations

import argparse
import json
import sys

import pandas as pd

from . import inference
from .archive import load_fit, save_fit
from .data import (
    Dataset,
    dataset_from_frame,
    exposure_columns_by_prefix,
    iqr_scale,
    modifier_split_candidates,
    pivot_time_series,
)
from .diagnostics import diagnose, gelman_split_rhat
from .engine import McmcControl, ModelSpec, ShrinkageConfig, run_chains
from .errors import ArchiveError, DataError, SpecError, UnsupportedModelError
from .inference import Levels, Mean, Percentile
from .trees import TreePriorParams

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_UNSUPPORTED = 4
EXIT_IO = 5


def parse_marginalize(text: str):
    """mean | qNN | levels=v1,v2,... -> MarginalizePolicy."""
    text = text.strip()
    if text == "mean":
        return Mean()
    if text.startswith("q"):
        try:
            return Percentile(float(text[1:]))
        except ValueError:
            raise SpecError(f"bad percentile spec {text!r}; expected e.g. q25") from None
    if text.startswith("levels="):
        try:
            values = tuple(float(v) for v in text[len("levels=") :].split(","))
        except ValueError:
            raise SpecError(f"bad levels spec {text!r}; expected levels=v1,v2,...") from None
        return Levels(values)
    raise SpecError(f"unknown marginalization {text!r}; use mean, qNN, or levels=v1,...")


def _csv_list(text: str) -> list[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="laggard",
        description="Treed distributed-lag models: fit, summarize, diagnose, explore.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="simulate a dataset from a JSON scenario config")
    sim.add_argument("config", help="JSON scenario file")
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--out", required=True, help="output CSV path")

    piv = sub.add_parser("pivot", help="pivot a time-series table to wide lag columns")
    piv.add_argument("data", help="input CSV with one row per date")
    piv.add_argument("--date-col", required=True)
    piv.add_argument("--exposure-cols", required=True, help="comma-separated column names")
    piv.add_argument("--lags", type=int, required=True)
    piv.add_argument("--keep-cols", default=None, help="comma-separated columns carried at time t")
    piv.add_argument("--out", required=True)

    fit = sub.add_parser("fit", help="fit a treed distributed-lag model")
    fit.add_argument("data", help="wide-format CSV")
    fit.add_argument("--outcome", required=True)
    fit.add_argument("--covariates", default="", help="comma-separated covariate columns")
    fit.add_argument(
        "--exposures",
        required=True,
        help="comma-separated exposure prefixes; lag columns are <prefix><lag>",
    )
    fit.add_argument("--family", default="gaussian")
    fit.add_argument("--dlm-type", default="linear")
    fit.add_argument("--mixture", action="store_true")
    fit.add_argument("--interactions", default="none", choices=["none", "noself", "all"])
    fit.add_argument("--het", action="store_true")
    fit.add_argument(
        "--modifiers",
        default=None,
        help="comma-separated modifier columns (default with --het: all covariates)",
    )
    fit.add_argument("--trees", type=int, default=20)
    fit.add_argument("--burn", type=int, default=2500)
    fit.add_argument("--iter", type=int, default=10000)
    fit.add_argument("--thin", type=int, default=5)
    fit.add_argument("--chains", type=int, default=1)
    fit.add_argument("--seed", type=int, default=0)
    fit.add_argument("--kappa", type=float, default=1.0)
    fit.add_argument("--tree-alpha", type=float, default=0.95)
    fit.add_argument("--tree-beta", type=float, default=2.0)
    fit.add_argument("--no-scale", action="store_true", help="skip IQR exposure scaling")
    fit.add_argument("--store-trees", action="store_true")
    fit.add_argument("--progress", action="store_true")
    fit.add_argument("--out", required=True, help="output archive path")

    summ = sub.add_parser("summary", help="summarize a fit archive")
    summ.add_argument("archive")
    summ.add_argument("--conf", type=float, default=0.95)
    summ.add_argument("--marginalize", default="mean", help="mean | qNN | levels=v1,v2,...")
    summ.add_argument("--json", dest="json_out", default=None, help="also write a JSON document")

    diag = sub.add_parser("diagnose", help="convergence diagnostics for one or more archives")
    diag.add_argument("archives", nargs="+")
    diag.add_argument("--lags", default=None, help="comma-separated trace lags")
    diag.add_argument("--params", default=None, help="comma-separated picks: sigma2,cumulative,gamma")
    diag.add_argument("--out", default=None, help="write the JSON report here instead of stdout")

    serve = sub.add_parser("serve", help="serve the explorer UI and JSON API for an archive")
    serve.add_argument("archive")
    serve.add_argument("--port", type=int, default=8173)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--static-dir", default=None, help="explorer asset directory")

    return p


def _load_fit_dataset(args):
    frame = pd.read_csv(args.data)
    covariates = _csv_list(args.covariates)
    prefixes = _csv_list(args.exposures)
    groups = {pref: exposure_columns_by_prefix(frame.columns, pref) for pref in prefixes}
    modifiers = []
    if args.het:
        modifiers = _csv_list(args.modifiers) if args.modifiers is not None else list(covariates)
        if not modifiers:
            raise SpecError("--het requires modifiers (give --modifiers or --covariates)")
    data = dataset_from_frame(frame, args.outcome, covariates, groups, modifiers)
    if not args.no_scale:
        data = Dataset(
            outcome=data.outcome,
            design=data.design,
            design_names=data.design_names,
            exposures=tuple(iqr_scale(e) for e in data.exposures),
            modifiers=data.modifiers,
        )
    return data


def cmd_fit(args) -> int:
    data = _load_fit_dataset(args)
    modifier_defs = tuple(modifier_split_candidates(m) for m in data.modifiers)
    spec = ModelSpec(
        family=args.family,
        dlm_type=args.dlm_type,
        mixture=args.mixture,
        het=args.het,
        interaction_mode=args.interactions,
        tree_prior=TreePriorParams(alpha=args.tree_alpha, beta=args.tree_beta, num_trees=args.trees),
        shrinkage=ShrinkageConfig(),
        kappa=args.kappa,
        modifiers=modifier_defs,
    )
    control = McmcControl(
        n_burn=args.burn,
        n_iter=args.iter,
        n_thin=args.thin,
        seed=args.seed,
        n_chains=args.chains,
        store_trees=args.store_trees,
        progress=args.progress,
    )
    print(
        f"Model run info:\n - model: {spec.model_class} ({spec.family})\n"
        f" - observations: {data.n}, lags: {data.n_lags}, trees: {args.trees}\n"
        f" - burn-in: {args.burn}, iterations: {args.iter}, thinning: {args.thin}\n"
        f" - chains: {args.chains}, seed: {args.seed}"
    )
    fits = run_chains(spec, data, control)
    combined = inference.combine_fits(fits)
    save_fit(combined, args.out)
    pairs = list(combined.interaction_draws)
    if pairs:
        print(f" - interaction pairs: {len(pairs)}")
    print(f"archive written: {args.out} ({combined.n_retained} retained draws)")
    return EXIT_OK


def cmd_summary(args) -> int:
    fit = load_fit(args.archive)
    policy = parse_marginalize(args.marginalize)
    summary = inference.summarize(fit, conf_level=args.conf, policy=policy)
    sys.stdout.write(summary.render())
    if args.json_out:
        with open(args.json_out, "w") as f:
            json.dump(summary.to_dict(), f, indent=1, sort_keys=True)
            f.write("\n")
    return EXIT_OK


def cmd_pivot(args) -> int:
    table = pd.read_csv(args.data)
    keep = _csv_list(args.keep_cols) if args.keep_cols is not None else None
    wide = pivot_time_series(table, args.date_col, _csv_list(args.exposure_cols), args.lags, keep)
    wide.to_csv(args.out, index=False)
    print(f"wrote {len(wide)} rows to {args.out}")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    fits = [load_fit(a) for a in args.archives]
    lags = [int(v) for v in _csv_list(args.lags)] if args.lags else None
    params = _csv_list(args.params) if args.params else None
    reports = [diagnose(f, lags=lags, params=params) for f in fits]
    doc = {"reports": [r.to_dict() for r in reports]}
    if len(reports) > 1:
        rhat = {}
        shared = set(reports[0].traces)
        for r in reports[1:]:
            shared &= set(r.traces)
        for name in sorted(shared):
            rhat[name] = gelman_split_rhat([r.traces[name] for r in reports])
        doc["split_rhat"] = rhat
    text = json.dumps(doc, indent=1, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
        print(f"report written: {args.out}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    from .simulate import sim_config_from_file, simulate_dataset

    config = sim_config_from_file(args.config)
    data, truth = simulate_dataset(config, seed=args.seed)
    frame = {"y": data.outcome}
    for j, name in enumerate(data.design_names):
        if name == "(Intercept)":
            continue
        frame[name] = data.design[:, j]
    for e in data.exposures:
        for lag in range(1, data.n_lags + 1):
            frame[f"{e.name}{lag}"] = e.values[:, lag - 1]
    for m in data.modifiers:
        frame[m.name] = m.values
    pd.DataFrame(frame).to_csv(args.out, index=False)
    print(f"wrote {data.n} rows to {args.out}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .server import create_app

    fit = load_fit(args.archive)
    static_dir = args.static_dir
    if static_dir is None:
        import pathlib

        candidate = pathlib.Path(__file__).resolve().parents[3] / "frontend" / "dist"
        static_dir = candidate if candidate.is_dir() else None
    app = create_app(fit, static_dir=static_dir)
    try:
        uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    except SystemExit as exc:  # uvicorn exits on bind failure
        raise ArchiveError(f"server failed to start on {args.host}:{args.port}") from exc
    except OSError as exc:
        raise ArchiveError(f"port {args.port} unavailable: {exc}") from exc
    return EXIT_OK


_COMMANDS = {
    "simulate": cmd_simulate,
    "pivot": cmd_pivot,
    "fit": cmd_fit,
    "summary": cmd_summary,
    "diagnose": cmd_diagnose,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UnsupportedModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ArchiveError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
