"""Command-line benchmark harness.

Subcommands
-----------
generate      write a synthetic dataset to CSV
train         fit one model on a CSV and save a model archive
predict       load an archive and append mean/variance/subdomain columns
benchmark     cross-product of methods x parameters x seeds, MSE + timing
sweep-lambda  boundary control-grid density sweep for the partitioned model
sweep-ks      pseudo-density x subdomain-count sweep

Every flag can also come from a ``--config`` file of ``key = value`` lines
(flags win over the file).  Every output CSV embeds the fully resolved
configuration as ``# key = value`` comment lines, so a result file is its
own provenance record.  Reported timings are wall-clock around the fit call
only.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
import warnings

import numpy as np

from . import __version__
from .data import (Dataset, destandardize_mean, destandardize_variance,
                   fluctuated_from_preset, augment_dimension, load_csv, mse,
                   save_csv, split, standardize, FLUCTUATED_PRESETS)
from .errors import InvalidInputError, SplkError
from .gp import fit_full_gp, predict_full_gp
from .local_kriging import fit_splk, naive_local_predict, splk_predict
from .model_io import load_model, save_model
from .optimize import OptimizerSettings
from .spgp import fit_spgp, spgp_predict

METHODS = ("full", "spgp", "splk", "naive-local")

# Outside this range a subdomain is legal but likely over- or under-resolved.
SUBDOMAIN_SIZE_GUIDANCE = (500, 5000)

DEFAULTS = dict(
    preset="syn-3d", n=8000, noise=True, augment=False,
    data=None, target_col=None, method="splk",
    m="32", subdomains="4", k="2.0", fold="3",
    axis=None, width_mode="equal-count", pca=False,
    seed="0", train_frac=0.9, max_iter=None,
    out=None, model_out=None, model_in=None,
)


# ---------------------------------------------------------------------------
# Config plumbing


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; ``#`` comments and blanks are skipped."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"{path}: line {lineno}: expected 'key = value'")
            key, val = line.split("=", 1)
            values[key.strip().replace("-", "_")] = val.strip()
    return values


def _as_bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise InvalidInputError(f"cannot read {v!r} as a boolean")


def _int_list(v):
    return [int(s) for s in str(v).split(",") if s.strip() != ""]


def _float_list(v):
    return [float(s) for s in str(v).split(",") if s.strip() != ""]


def _single(values, flag):
    if len(values) != 1:
        raise InvalidInputError(f"--{flag} expects a single value here, got {values}")
    return values[0]


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults < config file < explicit flags, with light type coercion."""
    resolved = dict(DEFAULTS)
    if getattr(args, "config", None):
        resolved.update(parse_config_file(args.config))
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None:
            continue
        resolved[key] = val
    resolved["n"] = int(resolved["n"])
    resolved["train_frac"] = float(resolved["train_frac"])
    resolved["pca"] = _as_bool(resolved["pca"])
    resolved["noise"] = _as_bool(resolved["noise"])
    resolved["augment"] = _as_bool(resolved["augment"])
    resolved["seeds"] = _int_list(resolved["seed"])
    resolved["m_list"] = _int_list(resolved["m"])
    resolved["subdomain_list"] = _int_list(resolved["subdomains"])
    resolved["k_list"] = _float_list(resolved["k"])
    resolved["fold_list"] = _int_list(resolved["fold"])
    if resolved["axis"] is not None:
        resolved["axis"] = int(resolved["axis"])
    if resolved["max_iter"] is not None:
        resolved["max_iter"] = int(resolved["max_iter"])
    if resolved["target_col"] is not None:
        try:
            resolved["target_col"] = int(resolved["target_col"])
        except (TypeError, ValueError):
            pass
    return resolved


def config_header(resolved: dict) -> dict:
    """The comment-header entries embedded into every output CSV."""
    skip = {"seeds", "m_list", "subdomain_list", "k_list", "fold_list"}
    header = {"tool": f"splk {__version__}", "cpu_count": os.cpu_count()}
    for key in sorted(resolved):
        if key not in skip and resolved[key] is not None:
            header[key] = resolved[key]
    return header


def _write_rows(path, header: dict, columns, rows):
    with open(path, "w", newline="") as fh:
        for key, val in header.items():
            fh.write(f"# {key} = {val}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow(row)


# ---------------------------------------------------------------------------
# Shared steps


def _load_dataset(resolved, seed) -> Dataset:
    if resolved["data"]:
        return load_csv(resolved["data"], target_column=resolved["target_col"])
    data = fluctuated_from_preset(resolved["preset"], resolved["n"], seed,
                                  noise=resolved["noise"])
    if resolved["augment"]:
        data = augment_dimension(data, seed=seed)
    return data


def _settings(resolved, method) -> OptimizerSettings:
    max_iter = resolved.get("max_iter")
    if max_iter is None:
        max_iter = 200 if method == "full" else 500
    restarts = 3 if method == "full" else 1
    return OptimizerSettings(max_iter=max_iter, restarts=restarts)


def _fit(method, train: Dataset, resolved, seed, m=None, subdomains=None,
         k=None, fold=None):
    settings = _settings(resolved, method)
    if method == "full":
        return fit_full_gp(train, settings=settings)
    if method == "spgp":
        return fit_spgp(train, m=m, seed=seed, settings=settings)
    if method in ("splk", "naive-local"):
        return fit_splk(train, n_subdomains=subdomains, pseudo_density=k,
                        fold_density=fold, axis=resolved["axis"],
                        width_mode=resolved["width_mode"], use_pca=resolved["pca"],
                        seed=seed, settings=settings)
    raise InvalidInputError(f"unknown method {method!r}; choose from {METHODS}")


def _predict(method, model, X):
    if method == "full":
        mean, var = predict_full_gp(model, X)
        sub = np.zeros(len(X), dtype=int)
    elif method == "spgp":
        mean, var = spgp_predict(model, X)
        sub = np.zeros(len(X), dtype=int)
    elif method == "splk":
        mean, var, sub = splk_predict(model, X)
    elif method == "naive-local":
        mean, var, sub = naive_local_predict(model, X)
    else:
        raise InvalidInputError(f"unknown method {method!r}")
    return mean, var, sub


def _size_guidance(model):
    lo, hi = SUBDOMAIN_SIZE_GUIDANCE
    for local in model.locals:
        n_j = local.spgp.X.shape[0]
        if not (lo <= n_j <= hi):
            warnings.warn(
                f"subdomain {local.index} holds {n_j} points, outside the "
                f"recommended [{lo}, {hi}] range", stacklevel=3)


def _settings_grid(resolved):
    """(method, params) combinations for the benchmark cross product."""
    combos = []
    for method in str(resolved["method"]).split(","):
        method = method.strip()
        if method == "full":
            combos.append((method, {}))
        elif method == "spgp":
            combos.extend((method, {"m": m}) for m in resolved["m_list"])
        elif method in ("splk", "naive-local"):
            combos.extend(
                (method, {"subdomains": S, "k": k, "fold": fold})
                for S in resolved["subdomain_list"]
                for k in resolved["k_list"]
                for fold in resolved["fold_list"])
        else:
            raise InvalidInputError(f"unknown method {method!r}; choose from {METHODS}")
    return combos


def benchmark_one(resolved, method, params, seed):
    """One benchmark cell: generate/load, split, standardize, fit, score.

    Returns a result dict; fit failures are captured in ``error`` instead of
    aborting the sweep.
    """
    out = dict(method=method, seed=seed, **params)
    try:
        data = _load_dataset(resolved, seed)
        train, test = split(data, frac=resolved["train_frac"], seed=seed)
        train_std, record = standardize(train)
        t0 = time.perf_counter()
        model = _fit(method, train_std, resolved, seed, **params)
        out["train_seconds"] = time.perf_counter() - t0
        mean, _, _ = _predict(method, model, test.X)
        out["mse"] = mse(destandardize_mean(mean, record), test.y)
        out["n_train"], out["n_test"], out["d"] = train.n, test.n, train.d
        out["model"] = model
    except SplkError as exc:
        out["error"] = f"{type(exc).__name__}: {exc}"
    return out


# ---------------------------------------------------------------------------
# Commands


def run_generate(resolved) -> int:
    if not resolved["out"]:
        raise InvalidInputError("generate needs --out")
    seed = _single(resolved["seeds"], "seed")
    data = _load_dataset(resolved, seed)
    save_csv(data, resolved["out"], config=config_header(resolved))
    print(f"wrote {data.n} x {data.d + 1} dataset to {resolved['out']}")
    return 0


def run_train(resolved) -> int:
    if not resolved["data"]:
        raise InvalidInputError("train needs --data")
    if not resolved["model_out"]:
        raise InvalidInputError("train needs --model-out")
    method = _single([m.strip() for m in str(resolved["method"]).split(",")], "method")
    seed = _single(resolved["seeds"], "seed")
    data = load_csv(resolved["data"], target_column=resolved["target_col"])
    train_std, record = standardize(data)
    params = {}
    if method == "spgp":
        params["m"] = _single(resolved["m_list"], "m")
    elif method in ("splk", "naive-local"):
        params = dict(subdomains=_single(resolved["subdomain_list"], "subdomains"),
                      k=_single(resolved["k_list"], "k"),
                      fold=_single(resolved["fold_list"], "lambda"))
    t0 = time.perf_counter()
    model = _fit(method, train_std, resolved, seed, **params)
    elapsed = time.perf_counter() - t0
    if method in ("splk", "naive-local"):
        _size_guidance(model)
    meta = dict(method=method,
                standardization=dict(y_shift=record.y_shift, y_scale=record.y_scale),
                config={k: v for k, v in config_header(resolved).items()})
    save_model(resolved["model_out"], model, meta=meta)
    print(f"trained {method} on {data.n} points in {elapsed:.2f}s "
          f"-> {resolved['model_out']}")
    return 0


def _load_queries(path, d):
    """Query CSV: either d input columns, or d+1 with a trailing target ignored."""
    probe = load_csv(path, target_column=-1)
    M = np.hstack([probe.X, probe.y[:, None]])
    columns = probe.default_columns()
    if M.shape[1] == d:
        return M, columns
    if M.shape[1] == d + 1:
        return M[:, :d], columns[:d]
    raise InvalidInputError(
        f"{path}: query file has {M.shape[1]} columns, expected {d} or {d + 1}")


def run_predict(resolved) -> int:
    if not (resolved["model_in"] and resolved["data"] and resolved["out"]):
        raise InvalidInputError("predict needs --model-in, --data, and --out")
    model, meta = load_model(resolved["model_in"])
    method = meta.get("method", "splk")
    if method == "full":
        d = model.X.shape[1]
    elif method == "spgp":
        d = model.pseudo.shape[1]
    else:
        d = model.domain.d
    Xq, columns = _load_queries(resolved["data"], d)
    mean, var, sub = _predict(method, model, Xq)
    std = meta.get("standardization")
    if std:
        from .data import Standardization
        record = Standardization(y_shift=std["y_shift"], y_scale=std["y_scale"])
        mean = destandardize_mean(mean, record)
        var = destandardize_variance(var, record)
    header = config_header(resolved)
    header["model_method"] = method
    rows = [[format(v, ".17g") for v in row] + [format(mu, ".17g"),
                                               format(s2, ".17g"), int(sj)]
            for row, mu, s2, sj in zip(Xq, mean, var, sub)]
    _write_rows(resolved["out"], header, columns + ["mean", "variance", "subdomain"], rows)
    print(f"wrote {len(rows)} predictions to {resolved['out']}")
    return 0


def run_benchmark(resolved) -> int:
    if not resolved["out"]:
        raise InvalidInputError("benchmark needs --out")
    columns = ["method", "m", "subdomains", "k", "lambda", "seed",
               "n_train", "n_test", "d", "train_seconds", "mse", "error"]
    rows = []
    for method, params in _settings_grid(resolved):
        for seed in resolved["seeds"]:
            res = benchmark_one(resolved, method, params, seed)
            rows.append([
                res["method"], res.get("m", ""), res.get("subdomains", ""),
                res.get("k", ""), res.get("fold", ""), res["seed"],
                res.get("n_train", ""), res.get("n_test", ""), res.get("d", ""),
                format(res["train_seconds"], ".6f") if "train_seconds" in res else "",
                format(res["mse"], ".17g") if "mse" in res else "",
                res.get("error", ""),
            ])
    _write_rows(resolved["out"], config_header(resolved), columns, rows)
    print(f"wrote {len(rows)} benchmark rows to {resolved['out']}")
    return 0


def run_sweep_lambda(resolved) -> int:
    if not resolved["out"]:
        raise InvalidInputError("sweep-lambda needs --out")
    S = _single(resolved["subdomain_list"], "subdomains")
    k = _single(resolved["k_list"], "k")
    columns = ["lambda", "seed", "control_points", "n_train", "train_seconds",
               "mse", "error"]
    rows = []
    for fold in resolved["fold_list"]:
        for seed in resolved["seeds"]:
            res = benchmark_one(resolved, "splk",
                                dict(subdomains=S, k=k, fold=fold), seed)
            if "model" in res:
                _size_guidance(res["model"])
                total = sum(r.size for r in res["model"].r_values)
            else:
                total = ""
            rows.append([fold, seed, total, res.get("n_train", ""),
                         format(res["train_seconds"], ".6f") if "train_seconds" in res else "",
                         format(res["mse"], ".17g") if "mse" in res else "",
                         res.get("error", "")])
    _write_rows(resolved["out"], config_header(resolved), columns, rows)
    print(f"wrote {len(rows)} sweep rows to {resolved['out']}")
    return 0


def run_sweep_ks(resolved) -> int:
    if not resolved["out"]:
        raise InvalidInputError("sweep-ks needs --out")
    fold = _single(resolved["fold_list"], "lambda")
    columns = ["k", "subdomains", "seed", "pseudo_total", "n_train",
               "train_seconds", "mse", "error"]
    rows = []
    for k in resolved["k_list"]:
        for S in resolved["subdomain_list"]:
            for seed in resolved["seeds"]:
                res = benchmark_one(resolved, "splk",
                                    dict(subdomains=S, k=k, fold=fold), seed)
                if "model" in res:
                    _size_guidance(res["model"])
                    pseudo_total = sum(l.spgp.m for l in res["model"].locals)
                else:
                    pseudo_total = ""
                rows.append([k, S, seed, pseudo_total, res.get("n_train", ""),
                             format(res["train_seconds"], ".6f") if "train_seconds" in res else "",
                             format(res["mse"], ".17g") if "mse" in res else "",
                             res.get("error", "")])
    _write_rows(resolved["out"], config_header(resolved), columns, rows)
    print(f"wrote {len(rows)} sweep rows to {resolved['out']}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splk", description="Partitioned sparse GP regression toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--data", help="dataset CSV path")
        p.add_argument("--target-col", dest="target_col",
                       help="target column name or index (default: last)")
        p.add_argument("--method", help=f"one of {METHODS} (comma list in benchmark)")
        p.add_argument("--m", help="pseudo-input count(s) for spgp, comma list")
        p.add_argument("--subdomains", help="subdomain count(s), comma list")
        p.add_argument("--k", help="pseudo density multiplier(s), comma list")
        p.add_argument("--lambda", dest="fold", help="control grid fold density, comma list")
        p.add_argument("--axis", help="cut axis (default: max variance)")
        p.add_argument("--width-mode", dest="width_mode",
                       choices=["equal-count", "fixed-width"])
        p.add_argument("--pca", action="store_true", default=None,
                       help="rotate onto principal axes before slicing")
        p.add_argument("--seed", help="seed or comma list of seeds")
        p.add_argument("--train-frac", dest="train_frac", type=float,
                       help="training fraction for splits (default 0.9)")
        p.add_argument("--max-iter", dest="max_iter",
                       help="optimizer iteration cap per fit")
        p.add_argument("--preset", choices=sorted(FLUCTUATED_PRESETS),
                       help="synthetic generator preset when no --data")
        p.add_argument("--n", help="synthetic dataset size")
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--model-out", dest="model_out", help="model archive path")
        p.add_argument("--model-in", dest="model_in", help="model archive path")

    gen = sub.add_parser("generate", help="write a synthetic dataset CSV")
    add_common(gen)
    gen.add_argument("--no-noise", dest="noise", action="store_false", default=None)
    gen.add_argument("--augment", action="store_true", default=None,
                     help="append an extra low-influence input dimension")
    for name in ("train", "predict", "benchmark", "sweep-lambda", "sweep-ks"):
        add_common(sub.add_parser(name))
    return parser


RUNNERS = {
    "generate": run_generate,
    "train": run_train,
    "predict": run_predict,
    "benchmark": run_benchmark,
    "sweep-lambda": run_sweep_lambda,
    "sweep-ks": run_sweep_ks,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        resolved = resolve_config(args)
        return RUNNERS[args.command](resolved)
    except (SplkError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
