"""Record JSON fixtures for the explorer test suite.

Fits a small heterogeneous model, stands up the archive API in-process,
and saves each endpoint response verbatim so the frontend tests exercise
real payloads without a running server.

Run from the repository root:  python3 frontend/scripts/record_fixtures.py
"""

import json
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from laggard.data import modifier_split_candidates
from laggard.engine import McmcControl, ModelSpec, fit
from laggard.server import create_app
from laggard.simulate import HetRule, ModifierSpec, SimConfig, simulate_dataset, window_curve

OUT = Path(__file__).resolve().parent.parent / "tests" / "fixtures"

T = 6
cfg = SimConfig(
    n=200,
    T=T,
    exposure_names=("pm",),
    theta={"pm": window_curve(T, 2, 4, 0.05)},
    gamma=(0.5,),
    noise_sd=1.0,
    modifiers=(
        ModifierSpec("age", "continuous", low=20.0, high=70.0),
        ModifierSpec("sex", "categorical", levels=("F", "M")),
    ),
    het_rule=HetRule(
        modifier="sex",
        exposure="pm",
        theta_when=window_curve(T, 2, 4, 0.3),
        theta_else=np.zeros(T),
        level="M",
    ),
)
data, _ = simulate_dataset(cfg, seed=7)
defs = tuple(modifier_split_candidates(m) for m in data.modifiers)
spec = ModelSpec(het=True, modifiers=defs)
posterior = fit(spec, data, McmcControl(n_burn=100, n_iter=200, n_thin=2, seed=7))

client = TestClient(create_app(posterior))
OUT.mkdir(parents=True, exist_ok=True)


def record(name: str, response) -> None:
    doc = {"status": response.status_code, "body": response.json()}
    (OUT / f"{name}.json").write_text(json.dumps(doc, indent=1, sort_keys=True))
    print(name, response.status_code)


record("meta", client.get("/api/meta"))
record("pips", client.get("/api/pips"))
record("splits_age", client.get("/api/splits", params={"modifier": "age"}))
record("splits_sex", client.get("/api/splits", params={"modifier": "sex"}))
record("splits_unknown", client.get("/api/splits", params={"modifier": "bmi"}))
record(
    "individual",
    client.post("/api/individual", json={"modifiers": {"age": 40.0, "sex": 1}, "conf": 0.95}),
)
record(
    "individual_bad",
    client.post("/api/individual", json={"modifiers": {"age": 40.0}}),
)
record(
    "subgroup_sex",
    client.post("/api/subgroup", json={"group_by": [{"modifier": "sex"}], "conf": 0.95}),
)
record(
    "subgroup_sex_age",
    client.post(
        "/api/subgroup",
        json={
            "group_by": [{"modifier": "sex"}, {"modifier": "age", "bins": [20.0, 45.0, 70.1]}],
            "conf": 0.95,
        },
    ),
)
