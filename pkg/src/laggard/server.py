"""Read-only JSON API over a fit archive, plus static explorer assets.

Every response carries the archive format version. Heterogeneity
endpoints return a machine-readable 404 on archives without modifier
trees. All numeric payloads are produced by the inference operations
directly, so API and library results are identical.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles

from . import inference
from .archive import FORMAT_VERSION
from .engine import PosteriorFit
from .errors import LaggardError, SpecError


def _envelope(payload: dict) -> dict:
    return {"format_version": FORMAT_VERSION, **payload}


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"format_version": FORMAT_VERSION, "error": message},
    )


def _modifier_meta(fit: PosteriorFit) -> list:
    spec = fit.meta["spec"]
    columns = fit.meta["modifier_columns"]
    out = []
    for d in spec.modifiers:
        entry = {"name": d.name, "kind": d.kind}
        col = columns[d.name]
        if d.kind == "continuous":
            entry["min"] = float(col.min())
            entry["max"] = float(col.max())
        else:
            entry["levels"] = sorted(int(v) for v in np.unique(col))
        out.append(entry)
    return out


def split_proportions(fit: PosteriorFit, modifier: str) -> dict:
    """Proportion of modifier-tree splits using each split location."""
    spec = fit.meta["spec"]
    defs = {d.name: (i, d) for i, d in enumerate(spec.modifiers)}
    if modifier not in defs:
        raise SpecError(f"unknown modifier {modifier!r}")
    mod_idx, d = defs[modifier]
    counts: dict[str, int] = {}
    total = 0
    for trees in inference._het_structures(fit):
        for tree in trees:
            for node, _ in tree.internals_with_depth():
                if node.mod_idx != mod_idx:
                    continue
                total += 1
                if d.kind == "continuous":
                    key = f"{node.threshold:.10g}"
                else:
                    key = ",".join(str(v) for v in node.subset)
                counts[key] = counts.get(key, 0) + 1
    return {
        "modifier": modifier,
        "kind": d.kind,
        "n_splits": total,
        "proportions": {
            k: v / total for k, v in sorted(counts.items())
        }
        if total
        else {},
    }


def create_app(fit: PosteriorFit, static_dir=None) -> FastAPI:
    app = FastAPI(title="laggard explorer API", docs_url=None, redoc_url=None)
    fit = inference.combine_fits(fit)
    spec = fit.meta["spec"]
    het = spec.het

    @app.exception_handler(LaggardError)
    async def _laggard_error(request: Request, exc: LaggardError):
        return _error(400, str(exc))

    @app.get("/api/meta")
    def api_meta():
        return _envelope(
            {
                "model_class": fit.meta["model_class"],
                "family": fit.meta["family"],
                "n": fit.meta["n"],
                "n_lags": fit.n_lags,
                "n_retained": fit.n_retained,
                "exposure_names": list(fit.exposure_names),
                "interaction_mode": fit.meta["interaction_mode"],
                "het": het,
                "mixture": spec.mixture,
                "modifiers": _modifier_meta(fit),
            }
        )

    @app.get("/api/summary")
    def api_summary(conf: float = 0.95, marginalize: str = "mean"):
        from .cli import parse_marginalize

        policy = parse_marginalize(marginalize)
        summary = inference.summarize(fit, conf_level=conf, policy=policy)
        return _envelope({"summary": summary.to_dict()})

    @app.get("/api/pips")
    def api_pips():
        if not het:
            return _error(404, "archive has no modifier trees; PIPs are undefined")
        return _envelope({"pips": inference.modifier_pip(fit)})

    @app.get("/api/splits")
    def api_splits(modifier: str):
        if not het:
            return _error(404, "archive has no modifier trees; split points are undefined")
        return _envelope(split_proportions(fit, modifier))

    @app.post("/api/individual")
    def api_individual(body: dict):
        if not het:
            return _error(404, "archive has no modifier trees; individualized effects are undefined")
        row = body.get("modifiers")
        if not isinstance(row, dict):
            return _error(400, "body must carry a 'modifiers' object")
        conf = float(body.get("conf", 0.95))
        curves = inference.individualized_effect(fit, row, conf_level=conf)
        return _envelope(
            {
                "exposures": {
                    name: {k: v.tolist() for k, v in tab.items()} for name, tab in curves.items()
                }
            }
        )

    @app.post("/api/subgroup")
    def api_subgroup(body: dict):
        if not het:
            return _error(404, "archive has no modifier trees; subgroup effects are undefined")
        group_by = body.get("group_by")
        if not isinstance(group_by, list) or not group_by:
            return _error(400, "body must carry a non-empty 'group_by' list")
        conf = float(body.get("conf", 0.95))
        result = inference.subgroup_effect(fit, group_by, conf_level=conf)
        payload = {}
        for label, entry in result.items():
            payload[label] = {
                "n_rows": entry["n_rows"],
                "exposures": {
                    name: {k: v.tolist() for k, v in tab.items()}
                    for name, tab in entry["exposures"].items()
                },
            }
        return _envelope({"subgroups": payload})

    @app.get("/api/exposures")
    def api_exposures():
        payload = {"exposure_names": list(fit.exposure_names)}
        if spec.mixture:
            payload["selection"] = inference.exposure_selection(fit)
        if not het:
            payload["cumulative"] = {
                name: dict(
                    zip(
                        ("mean", "lower", "upper"),
                        inference.cumulative_effect(
                            inference.marginal_effect(fit, name)
                            if spec.mixture
                            else fit.theta_draws[name]
                        ),
                    )
                )
                for name in fit.exposure_names
            }
        return _envelope(payload)

    if static_dir is not None:
        static_dir = Path(static_dir)
        index = static_dir / "index.html"

        @app.get("/")
        def root():
            if index.exists():
                return FileResponse(index)
            return _error(404, "explorer assets not built")

        if static_dir.is_dir():
            app.mount("/assets", StaticFiles(directory=static_dir), name="assets")

    return app
