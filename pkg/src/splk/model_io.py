"""Versioned model archives (numpy ``.npz`` + embedded JSON header).

Every fitted model type serializes to a single self-describing file: a JSON
``meta`` entry records the format version, model type, partition layout, and
scalar fit metadata, while all numeric state (hyperparameters, pseudo-inputs,
cached factorizations, boundary grids and agreed values) is stored verbatim
as arrays.  Loading reconstructs the exact cached state rather than refitting
or refactorizing, so a loaded model predicts bit-identically — that is the
round-trip contract the tests pin down.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import InvalidInputError
from .gp import FullGpModel
from .kernel import KernelParams
from .local_kriging import BoundaryCache, LocalModel, SplkModel
from .partition import AxisRotation, BoundaryGrid, OrthopeDomain, PartitionSpec
from .spgp import SpgpModel

FORMAT_VERSION = 1


def _json_coerce(obj):
    """``json.dumps`` fallback: numpy scalars and arrays become plain types."""
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot embed {type(obj).__name__} in an archive header")


def _params_state(params: KernelParams):
    return params.to_log_vector(), params.jitter


def _params_restore(log_vec, jitter) -> KernelParams:
    return KernelParams.from_log_vector(np.asarray(log_vec), jitter=float(jitter))


def _pack_spgp(model: SpgpModel, prefix: str, arrays: dict, meta: dict):
    log_vec, jitter = _params_state(model.params)
    arrays[prefix + "params"] = log_vec
    for name in ("pseudo", "X", "y", "L_m", "L_B", "A", "gamma", "alpha",
                 "mean_weights", "proj_gram"):
        arrays[prefix + name] = getattr(model, name)
    meta.update(jitter=jitter, y_delta_y=model.y_delta_y,
                log_likelihood=model.log_likelihood, n_iter=model.n_iter,
                converged=model.converged, message=model.message)


def _unpack_spgp(z, prefix: str, meta: dict) -> SpgpModel:
    return SpgpModel(
        params=_params_restore(z[prefix + "params"], meta["jitter"]),
        pseudo=z[prefix + "pseudo"], X=z[prefix + "X"], y=z[prefix + "y"],
        L_m=z[prefix + "L_m"], L_B=z[prefix + "L_B"], A=z[prefix + "A"],
        gamma=z[prefix + "gamma"], alpha=z[prefix + "alpha"],
        mean_weights=z[prefix + "mean_weights"], proj_gram=z[prefix + "proj_gram"],
        y_delta_y=meta["y_delta_y"], log_likelihood=meta["log_likelihood"],
        n_iter=meta["n_iter"], converged=meta["converged"], message=meta["message"],
    )


def save_model(path, model, meta: dict = None):
    """Write a fitted model to ``path`` as a versioned archive.

    ``meta`` can carry caller JSON-serializable extras (e.g. the target
    standardization used before fitting); it round-trips through
    :func:`load_model` untouched.
    """
    arrays = {}
    header = {"format_version": FORMAT_VERSION, "extra": meta or {}}
    if isinstance(model, FullGpModel):
        header["model_type"] = "full"
        log_vec, jitter = _params_state(model.params)
        arrays.update(params=log_vec, X=model.X, y=model.y,
                      factor=model.factor, alpha=model.alpha)
        header["fit"] = dict(jitter=jitter, log_likelihood=model.log_likelihood,
                             n_iter=model.n_iter, converged=model.converged,
                             degenerate=model.degenerate, message=model.message)
    elif isinstance(model, SpgpModel):
        header["model_type"] = "spgp"
        header["fit"] = {}
        _pack_spgp(model, "", arrays, header["fit"])
    elif isinstance(model, SplkModel):
        header["model_type"] = "splk"
        spec = model.spec
        header["partition"] = dict(
            axis=spec.axis, fold_density=spec.fold_density,
            pseudo_density=spec.pseudo_density, width_mode=spec.width_mode,
            n_subdomains=spec.n_subdomains)
        header["converged"] = model.converged
        arrays.update(domain_lower=model.domain.lower, domain_upper=model.domain.upper,
                      cuts=spec.cuts)
        if model.rotation is not None:
            arrays.update(rotation_mean=model.rotation.mean,
                          rotation_components=model.rotation.components)
        header["locals"] = []
        for j, local in enumerate(model.locals):
            fit_meta = {}
            _pack_spgp(local.spgp, f"local{j}_", arrays, fit_meta)
            fit_meta["has_boundary"] = local.boundary is not None
            header["locals"].append(fit_meta)
            if local.boundary is not None:
                cache = local.boundary
                for name in ("points", "r", "s", "G", "c", "proj_bm", "cross_bm"):
                    arrays[f"local{j}_b_{name}"] = getattr(cache, name)
        for b, (grid, r) in enumerate(zip(model.grids, model.r_values)):
            arrays[f"grid{b}_points"] = grid.points
            arrays[f"grid{b}_r"] = r
    else:
        raise InvalidInputError(f"cannot serialize {type(model).__name__}")
    np.savez_compressed(path, meta=np.frombuffer(
        json.dumps(header, default=_json_coerce).encode(), dtype=np.uint8), **arrays)


def load_model(path):
    """Load a model archive; returns ``(model, meta)``.

    Raises
    ------
    InvalidInputError
        On unknown format versions or model types, so stale archives fail
        loudly instead of mispredicting.
    """
    with np.load(path) as z:
        header = json.loads(bytes(z["meta"]).decode())
        version = header.get("format_version")
        if version != FORMAT_VERSION:
            raise InvalidInputError(
                f"unsupported archive format version {version!r} "
                f"(this build reads {FORMAT_VERSION})")
        kind = header.get("model_type")
        if kind == "full":
            fit = header["fit"]
            model = FullGpModel(
                params=_params_restore(z["params"], fit["jitter"]),
                X=z["X"], y=z["y"], factor=z["factor"], alpha=z["alpha"],
                log_likelihood=fit["log_likelihood"], n_iter=fit["n_iter"],
                converged=fit["converged"], degenerate=fit["degenerate"],
                message=fit["message"])
        elif kind == "spgp":
            model = _unpack_spgp(z, "", header["fit"])
        elif kind == "splk":
            part = header["partition"]
            spec = PartitionSpec(axis=part["axis"], cuts=z["cuts"],
                                 fold_density=part["fold_density"],
                                 pseudo_density=part["pseudo_density"],
                                 width_mode=part["width_mode"])
            domain = OrthopeDomain(lower=z["domain_lower"], upper=z["domain_upper"])
            rotation = None
            if "rotation_mean" in z:
                rotation = AxisRotation(mean=z["rotation_mean"],
                                        components=z["rotation_components"])
            locals_ = []
            for j, fit_meta in enumerate(header["locals"]):
                spgp = _unpack_spgp(z, f"local{j}_", fit_meta)
                boundary = None
                if fit_meta["has_boundary"]:
                    boundary = BoundaryCache(
                        points=z[f"local{j}_b_points"], r=z[f"local{j}_b_r"],
                        s=z[f"local{j}_b_s"], G=z[f"local{j}_b_G"],
                        c=z[f"local{j}_b_c"], proj_bm=z[f"local{j}_b_proj_bm"],
                        cross_bm=z[f"local{j}_b_cross_bm"])
                locals_.append(LocalModel(index=j, spgp=spgp, boundary=boundary))
            grids, r_values = [], []
            for b in range(spec.n_boundaries):
                pts = z[f"grid{b}_points"]
                grids.append(BoundaryGrid(left=b, right=b + 1,
                                          position=float(spec.cuts[b]), points=pts))
                r_values.append(z[f"grid{b}_r"])
            model = SplkModel(domain=domain, spec=spec, rotation=rotation,
                              locals=locals_, grids=grids, r_values=r_values,
                              converged=header["converged"])
        else:
            raise InvalidInputError(f"unknown model type {kind!r} in archive")
        return model, header.get("extra", {})
