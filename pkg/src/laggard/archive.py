"""Single-file fit archives.

A fit archive is a zip container with a human-inspectable JSON manifest
plus ``.npy`` array blocks (little-endian IEEE-754 doubles) and JSON tree
records. Writing is fully deterministic: fixed entry order, fixed
timestamps, fixed compression, so identical fits produce identical bytes.
Readers reject archives whose format major version they do not know.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile

import numpy as np

from .data import ModifierDef
from .engine import McmcControl, ModelSpec, PosteriorFit, ShrinkageConfig
from .errors import ArchiveError
from .trees import TreePriorParams

FORMAT_VERSION = "1.0"

_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


def _npy_bytes(arr: np.ndarray) -> bytes:
    buf = io.BytesIO()
    np.save(buf, np.ascontiguousarray(arr), allow_pickle=False)
    return buf.getvalue()


def _load_npy(zf: zipfile.ZipFile, name: str) -> np.ndarray:
    with zf.open(name) as f:
        return np.load(io.BytesIO(f.read()), allow_pickle=False)


def _spec_to_json(spec: ModelSpec) -> dict:
    return {
        "family": spec.family,
        "dlm_type": spec.dlm_type,
        "mixture": spec.mixture,
        "het": spec.het,
        "interaction_mode": spec.interaction_mode,
        "kappa": spec.kappa,
        "modifier_sparsity": spec.modifier_sparsity,
        "tree_prior": {
            "alpha": spec.tree_prior.alpha,
            "beta": spec.tree_prior.beta,
            "num_trees": spec.tree_prior.num_trees,
        },
        "shrinkage": {
            "halfcauchy_scale": spec.shrinkage.halfcauchy_scale,
            "init_tau": spec.shrinkage.init_tau,
        },
        "modifiers": [
            {
                "name": d.name,
                "kind": d.kind,
                "split_candidates": [
                    list(c) if isinstance(c, (tuple, list, frozenset, set)) else c
                    for c in d.split_candidates
                ],
                "n_levels": d.n_levels,
            }
            for d in spec.modifiers
        ],
    }


def _spec_from_json(doc: dict) -> ModelSpec:
    modifiers = []
    for d in doc["modifiers"]:
        cands = tuple(
            tuple(c) if isinstance(c, list) else c for c in d["split_candidates"]
        )
        modifiers.append(
            ModifierDef(d["name"], d["kind"], cands, n_levels=d["n_levels"])
        )
    return ModelSpec(
        family=doc["family"],
        dlm_type=doc["dlm_type"],
        mixture=doc["mixture"],
        het=doc["het"],
        interaction_mode=doc["interaction_mode"],
        kappa=doc["kappa"],
        modifier_sparsity=doc["modifier_sparsity"],
        tree_prior=TreePriorParams(**doc["tree_prior"]),
        shrinkage=ShrinkageConfig(**doc["shrinkage"]),
        modifiers=tuple(modifiers),
    )


def save_fit(fit: PosteriorFit, path) -> None:
    """Write a PosteriorFit to a deterministic single-file archive."""
    meta = fit.meta
    spec: ModelSpec = meta["spec"]
    control: McmcControl = meta["control"]
    names = list(meta["exposure_names"])
    digest = hashlib.sha256()
    for values in meta["exposure_values"]:
        digest.update(np.ascontiguousarray(values).tobytes())
    for mname in sorted(meta["modifier_columns"]):
        digest.update(np.ascontiguousarray(meta["modifier_columns"][mname]).tobytes())
    manifest = {
        "format_version": FORMAT_VERSION,
        "model_class": meta["model_class"],
        "spec": _spec_to_json(spec),
        "control": {
            "n_burn": control.n_burn,
            "n_iter": control.n_iter,
            "n_thin": control.n_thin,
            "seed": control.seed,
            "n_chains": control.n_chains,
            "store_trees": control.store_trees,
        },
        "n": meta["n"],
        "p": meta["p"],
        "n_lags": meta["n_lags"],
        "exposure_names": names,
        "design_names": list(meta["design_names"]),
        "scale_factors": list(meta["scale_factors"]),
        "interaction_pairs": [list(k) for k in fit.interaction_draws],
        "kernel_backend": meta["kernel_backend"],
        "data_sha256": digest.hexdigest(),
    }

    entries: list[tuple[str, bytes]] = []
    entries.append(
        ("manifest.json", json.dumps(manifest, indent=1, sort_keys=True).encode())
    )
    entries.append(("arrays/gamma.npy", _npy_bytes(fit.gamma_draws)))
    entries.append(("arrays/sigma2.npy", _npy_bytes(fit.sigma2_draws)))
    for i, name in enumerate(names):
        entries.append((f"arrays/theta_{i}.npy", _npy_bytes(fit.theta_draws[name])))
    for j, key in enumerate(fit.interaction_draws):
        entries.append((f"arrays/interaction_{j}.npy", _npy_bytes(fit.interaction_draws[key])))
    entries.append(("arrays/selection_counts.npy", _npy_bytes(fit.exposure_selection_counts)))
    entries.append(("arrays/modifier_usage.npy", _npy_bytes(fit.modifier_usage)))
    for kind in sorted(fit.tree_logs["accepted"]):
        entries.append((f"arrays/accepted_{kind}.npy", _npy_bytes(fit.tree_logs["accepted"][kind])))
        entries.append((f"arrays/proposed_{kind}.npy", _npy_bytes(fit.tree_logs["proposed"][kind])))
    entries.append(("arrays/tree_sizes.npy", _npy_bytes(fit.tree_logs["tree_sizes"])))
    for i, values in enumerate(meta["exposure_values"]):
        entries.append((f"arrays/exposure_{i}.npy", _npy_bytes(values)))
    for i, (mname, col) in enumerate(sorted(meta["modifier_columns"].items())):
        entries.append((f"arrays/modifier_{i}.npy", _npy_bytes(col)))
    entries.append(
        (
            "modifier_columns.json",
            json.dumps(sorted(meta["modifier_columns"]), sort_keys=True).encode(),
        )
    )
    if fit.tree_records is not None:
        entries.append(("trees.json", json.dumps(fit.tree_records, sort_keys=True).encode()))
    if fit.het_tree_records is not None:
        entries.append(("het_trees.json", json.dumps(fit.het_tree_records, sort_keys=True).encode()))

    try:
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED, compresslevel=6) as zf:
            for name, payload in entries:
                info = zipfile.ZipInfo(name, date_time=_FIXED_DATE)
                info.compress_type = zipfile.ZIP_DEFLATED
                info.external_attr = 0o644 << 16
                zf.writestr(info, payload, compresslevel=6)
    except OSError as exc:
        raise ArchiveError(f"cannot write archive {path}: {exc}") from exc


def load_fit(path) -> PosteriorFit:
    """Read a fit archive back into a PosteriorFit."""
    try:
        zf = zipfile.ZipFile(path, "r")
    except (OSError, zipfile.BadZipFile) as exc:
        raise ArchiveError(f"cannot read archive {path}: {exc}") from exc
    with zf:
        try:
            manifest = json.loads(zf.read("manifest.json"))
        except KeyError:
            raise ArchiveError("archive has no manifest.json") from None
        version = manifest.get("format_version", "")
        major = version.split(".")[0]
        if major != FORMAT_VERSION.split(".")[0]:
            raise ArchiveError(
                f"unsupported archive format version {version!r}; this reader supports major {FORMAT_VERSION.split('.')[0]}"
            )
        spec = _spec_from_json(manifest["spec"])
        ctrl = manifest["control"]
        control = McmcControl(
            n_burn=ctrl["n_burn"],
            n_iter=ctrl["n_iter"],
            n_thin=ctrl["n_thin"],
            seed=ctrl["seed"],
            n_chains=ctrl["n_chains"],
            store_trees=ctrl["store_trees"],
        )
        names = manifest["exposure_names"]
        theta = {name: _load_npy(zf, f"arrays/theta_{i}.npy") for i, name in enumerate(names)}
        interactions = {}
        for j, key in enumerate(manifest["interaction_pairs"]):
            interactions[tuple(key)] = _load_npy(zf, f"arrays/interaction_{j}.npy")
        kinds = sorted(
            n.removeprefix("arrays/accepted_").removesuffix(".npy")
            for n in zf.namelist()
            if n.startswith("arrays/accepted_")
        )
        tree_logs = {
            "accepted": {k: _load_npy(zf, f"arrays/accepted_{k}.npy") for k in kinds},
            "proposed": {k: _load_npy(zf, f"arrays/proposed_{k}.npy") for k in kinds},
            "tree_sizes": _load_npy(zf, "arrays/tree_sizes.npy"),
        }
        exposure_values = [
            _load_npy(zf, f"arrays/exposure_{i}.npy") for i in range(len(names))
        ]
        mod_names = json.loads(zf.read("modifier_columns.json"))
        modifier_columns = {
            mname: _load_npy(zf, f"arrays/modifier_{i}.npy")
            for i, mname in enumerate(mod_names)
        }
        tree_records = None
        if "trees.json" in zf.namelist():
            tree_records = json.loads(zf.read("trees.json"))
        het_records = None
        if "het_trees.json" in zf.namelist():
            het_records = json.loads(zf.read("het_trees.json"))

        meta = {
            "model_class": manifest["model_class"],
            "family": spec.family,
            "spec": spec,
            "control": control,
            "n": manifest["n"],
            "p": manifest["p"],
            "n_lags": manifest["n_lags"],
            "exposure_names": names,
            "design_names": manifest["design_names"],
            "scale_factors": manifest["scale_factors"],
            "interaction_mode": spec.interaction_mode,
            "kernel_backend": manifest["kernel_backend"],
            "exposure_values": exposure_values,
            "modifier_columns": modifier_columns,
        }
        return PosteriorFit(
            meta=meta,
            gamma_draws=_load_npy(zf, "arrays/gamma.npy"),
            sigma2_draws=_load_npy(zf, "arrays/sigma2.npy"),
            theta_draws=theta,
            interaction_draws=interactions,
            exposure_selection_counts=_load_npy(zf, "arrays/selection_counts.npy"),
            modifier_usage=_load_npy(zf, "arrays/modifier_usage.npy"),
            tree_logs=tree_logs,
            tree_records=tree_records,
            het_tree_records=het_records,
        )
