"""Command line: ``potts <task> --config path [--seed n] [--out dir]``.

Every run writes into ``<out>/<task>-<config hash>/``: the resolved config,
a JSON summary and, for tabular tasks, ``results.csv``.  Colours and vertex
indices in files are 1-based.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checks
from .constraints import ProportionConstraint
from .cut import maxcut_exhaustive, maxcut_localsearch
from .errors import ConfigInvalid, PottsCutError, SuiteUnknown, TaskFailed
from .experiments import maxcut_estimate
from .graph import SpeciesStructure, expected_edges, read_edgelist, sample_graph, write_edgelist
from .kernel import BlockKernel, kernel_from_dict
from .parisi import (MinimizeOptions, ModelSpec, ParisiParams, Scheme, d_digest, functional, ground_state,
                     minimize, predict_maxcut, replica_symmetric)
from .spinglass import free_energy_enum, sample_disorder
from .stats import Estimate, child_seeds

TASKS = ("sample-graph", "maxcut", "free-energy", "groundstate", "parisi-eval", "parisi-min",
         "predict", "verify", "compare")

ESTIMATOR_COLUMNS = ["N", "kappa", "beta", "constraint_hash", "mean", "stderr", "replicas", "seed", "config_hash"]
PARISI_COLUMNS = ["model_hash", "d_hash", "r", "beta", "value", "err", "wall_ms", "seed", "config_hash"]

# keys each task accepts; "task" and "seed" are always allowed
ALLOWED = {
    "sample-graph": {"kernel", "N", "c"},
    "maxcut": {"graph", "kernel", "N", "c", "kappa", "restarts", "solver", "replicas", "control_variate"},
    "free-energy": {"N", "kappa", "beta", "species_counts", "delta2", "d", "epsilon", "replicas"},
    "groundstate": {"kappa", "rho", "delta2", "d", "betas", "r", "restarts", "search_nodes"},
    "parisi-eval": {"kappa", "rho", "delta2", "beta", "params", "d", "nodes"},
    "parisi-min": {"kappa", "rho", "delta2", "beta", "d", "r", "restarts", "search_nodes", "nodes"},
    "predict": {"kernel", "c", "kappa", "r", "betas", "step", "refine_step", "restarts"},
    "verify": {"suite"},
    "compare": {"kernel", "N", "c_values", "kappa", "replicas", "restarts", "r", "betas", "step"},
}
REQUIRED = {
    "sample-graph": {"kernel", "N", "c"},
    "maxcut": {"kappa"},
    "free-energy": {"N", "kappa", "beta"},
    "groundstate": {"kappa", "d", "betas", "r"},
    "parisi-eval": {"kappa", "params"},
    "parisi-min": {"kappa", "d", "r"},
    "predict": {"kernel", "c", "kappa"},
    "verify": {"suite"},
    "compare": {"kernel", "N", "c_values", "kappa"},
}


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:12]


def git_blob_hash(data: bytes) -> str:
    return hashlib.sha1(b"blob %d\0" % len(data) + data).hexdigest()


def validate(task: str, cfg: dict) -> dict:
    if task not in TASKS:
        raise ConfigInvalid(f"unknown task {task!r}")
    if cfg.get("task", task) != task:
        raise ConfigInvalid(f"config is for task {cfg['task']!r}, not {task!r}")
    unknown = set(cfg) - ALLOWED[task] - {"task", "seed"}
    if unknown:
        raise ConfigInvalid(f"unknown keys for {task}: {sorted(unknown)}")
    missing = REQUIRED[task] - set(cfg)
    if task == "maxcut" and "graph" not in cfg and not {"kernel", "N", "c"} <= set(cfg):
        missing |= {"graph or kernel/N/c"}
    if missing:
        raise ConfigInvalid(f"missing keys for {task}: {sorted(missing)}")
    return {**cfg, "task": task}


def workers() -> int:
    try:
        return max(1, int(os.environ.get("POTTS_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    if workers() == 1 or len(items) < 2:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers()) as pool:
        return list(pool.map(fn, items))


def _model(cfg) -> ModelSpec:
    kappa = int(cfg["kappa"])
    delta2 = cfg.get("delta2", [[1.0]])
    rho = cfg.get("rho", [1.0 / len(delta2)] * len(delta2))
    return ModelSpec(kappa, rho, delta2, float(cfg.get("beta", 1.0)))


def _opts(cfg) -> MinimizeOptions:
    keys = {k: int(cfg[k]) for k in ("restarts", "search_nodes", "nodes") if k in cfg}
    return MinimizeOptions(seed=int(cfg.get("seed", 0)), **keys)


def _parisi_row(model, d, r, beta, value, err, wall, seed, chash):
    return {"model_hash": model.digest(), "d_hash": d_digest(d), "r": r, "beta": beta, "value": value,
            "err": err, "wall_ms": round(wall * 1000), "seed": seed, "config_hash": chash}


# --- tasks ------------------------------------------------------------------

def task_sample_graph(cfg, out):
    kernel = kernel_from_dict(cfg["kernel"])
    G = sample_graph(kernel, int(cfg["N"]), float(cfg["c"]), int(cfg.get("seed", 0)))
    write_edgelist(G, out / "graph.edgelist")
    return {"edges": G.m, "expected_edges": expected_edges(kernel, int(cfg["N"]), float(cfg["c"]))}, None


def _one_cut(args):
    kernel_dict, N, c, kappa, restarts, seed = args
    G = sample_graph(kernel_from_dict(kernel_dict), N, c, seed)
    return maxcut_localsearch(G, kappa, restarts=restarts, seed=seed)[0] / N


def task_maxcut(cfg, out):
    kappa = int(cfg["kappa"])
    seed = int(cfg.get("seed", 0))
    restarts = int(cfg.get("restarts", 10))
    if "graph" in cfg:
        G = read_edgelist(cfg["graph"])
        if cfg.get("solver", "localsearch") == "exhaustive":
            value, sigma = maxcut_exhaustive(G, kappa)
        else:
            value, sigma = maxcut_localsearch(G, kappa, restarts=restarts, seed=seed)
        row = {"N": G.n, "kappa": kappa, "beta": "", "constraint_hash": "", "mean": value, "stderr": "",
               "replicas": 1, "seed": seed}
        return {"value": int(value), "assignment": (np.asarray(sigma) + 1).tolist()}, [row]
    N, c = int(cfg["N"]), float(cfg["c"])
    kernel = kernel_from_dict(cfg["kernel"])
    replicas = int(cfg.get("replicas", 10))
    if cfg.get("control_variate", True):
        est = maxcut_estimate(kernel, N, c, kappa, replicas, seed, restarts)
    else:
        vals = _pmap(_one_cut, [(cfg["kernel"], N, c, kappa, restarts, s) for s in child_seeds(seed, replicas)])
        est = Estimate.from_samples(vals)
    row = {"N": N, "kappa": kappa, "beta": "", "constraint_hash": "", "mean": est.mean,
           "stderr": est.stderr, "replicas": replicas, "seed": seed}
    return {"mean": est.mean, "stderr": est.stderr}, [row]


def _one_free_energy(args):
    counts, delta2, kappa, betas, d, eps, seed = args
    species = SpeciesStructure(np.repeat(np.arange(len(counts)), counts), delta2)
    con = None if d is None else ProportionConstraint(d, eps)
    g = sample_disorder(species, seed)
    return [free_energy_enum(g, b, kappa, con, species) for b in betas]


def task_free_energy(cfg, out):
    N, kappa = int(cfg["N"]), int(cfg["kappa"])
    betas = [float(b) for b in np.atleast_1d(cfg["beta"])]
    counts = [int(n) for n in cfg.get("species_counts", [N])]
    if sum(counts) != N:
        raise ConfigInvalid("species_counts must sum to N")
    delta2 = cfg.get("delta2", [[1.0] * len(counts)] * len(counts))
    seed = int(cfg.get("seed", 0))
    replicas = int(cfg.get("replicas", 50))
    d, eps = cfg.get("d"), float(cfg.get("epsilon", 0.0))
    vals = np.array(_pmap(_one_free_energy, [(counts, delta2, kappa, betas, d, eps, s)
                                             for s in child_seeds(seed, replicas)]))
    chash = "" if d is None else ProportionConstraint(d, eps).digest()
    rows, summary = [], {}
    for k, b in enumerate(betas):
        est = Estimate.from_samples(vals[:, k])
        rows.append({"N": N, "kappa": kappa, "beta": b, "constraint_hash": chash, "mean": est.mean,
                     "stderr": est.stderr, "replicas": replicas, "seed": seed})
        summary[str(b)] = {"mean": est.mean, "stderr": est.stderr}
    return summary, rows


def task_groundstate(cfg, out):
    model = _model(cfg)
    seed = int(cfg.get("seed", 0))
    t0 = time.perf_counter()
    fit = ground_state(model, cfg["d"], cfg["betas"], int(cfg["r"]), _opts(cfg))
    wall = time.perf_counter() - t0
    rows = [_parisi_row(model, cfg["d"], int(cfg["r"]), float(b), float(v), float(e), wall / len(fit.betas),
                        seed, None)
            for b, v, e in zip(fit.betas, fit.values, fit.errors)]
    summary = {"ground_state": fit.value, "slope": fit.slope, "residual": fit.residual,
               "monotone": fit.monotone, "per_beta": (fit.values / fit.betas).tolist()}
    return summary, rows


def _params_from_cfg(cfg, model):
    p = cfg["params"]
    if p == "replica-symmetric":
        return replica_symmetric(cfg["d"])
    try:
        lam = np.array(p["lambda"], dtype=float)
        return ParisiParams(p["x"], p["Q"], np.where(lam <= -1e299, -np.inf, lam))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigInvalid(f"bad params: {exc}") from None


def task_parisi_eval(cfg, out):
    model = _model(cfg)
    params = _params_from_cfg(cfg, model)
    scheme = Scheme(nodes=int(cfg.get("nodes", 20)))
    t0 = time.perf_counter()
    val = functional(params, model, scheme=scheme, error_estimate=True)
    wall = time.perf_counter() - t0
    row = _parisi_row(model, params.d, params.r, model.beta, val.value, val.err, wall, int(cfg.get("seed", 0)), None)
    summary = {"value": val.value, "err": val.err, "z_term": val.z_term, "lagrange_term": val.lagrange_term,
               "y_term": val.y_term, "x0": val.x0.tolist()}
    return summary, [row]


def task_parisi_min(cfg, out):
    model = _model(cfg)
    t0 = time.perf_counter()
    res = minimize(model, cfg["d"], int(cfg["r"]), _opts(cfg))
    wall = time.perf_counter() - t0
    row = _parisi_row(model, cfg["d"], int(cfg["r"]), model.beta, res.value, res.err, wall,
                      int(cfg.get("seed", 0)), None)
    summary = {"value": res.value, "err": res.err, "stalled": res.stalled, "evaluations": res.evaluations,
               "params": res.params.to_dict()}
    return summary, [row]


def _block_kernel(cfg) -> BlockKernel:
    kernel = kernel_from_dict(cfg["kernel"])
    if not isinstance(kernel, BlockKernel):
        raise ConfigInvalid("predictions need a block or constant kernel")
    return kernel


def task_predict(cfg, out):
    kernel = _block_kernel(cfg)
    betas = cfg.get("betas", [2.0, 4.0, 8.0, 16.0])
    pred = predict_maxcut(kernel, float(cfg["c"]), int(cfg["kappa"]), step=float(cfg.get("step", 0.05)),
                          r=int(cfg.get("r", 2)), beta_grid=betas, opts=_opts(cfg),
                          refine_step=float(cfg.get("refine_step", 0.01)))
    return {"d": pred.d.tolist(), "value": pred.value, "leading": pred.leading,
            "ground_state": pred.ground_state, "c": pred.c}, None


def task_compare(cfg, out):
    kernel = _block_kernel(cfg)
    N, kappa = int(cfg["N"]), int(cfg["kappa"])
    seed = int(cfg.get("seed", 0))
    betas = cfg.get("betas", [2.0, 4.0, 8.0, 16.0])
    cache, rows = {}, []
    for c in cfg["c_values"]:
        c = float(c)
        est = maxcut_estimate(kernel, N, c, kappa, int(cfg.get("replicas", 10)), seed, int(cfg.get("restarts", 10)))
        pred = predict_maxcut(kernel, c, kappa, step=float(cfg.get("step", 0.05)), r=int(cfg.get("r", 2)),
                              beta_grid=betas, opts=_opts(cfg), cache=cache)
        rows.append({"c": c, "graph_mean": est.mean, "graph_stderr": est.stderr, "prediction": pred.value,
                     "graph_correction": (est.mean - pred.leading) / math.sqrt(c),
                     "predicted_correction": 0.5 * pred.ground_state, "seed": seed})
    return {"rows": rows}, rows


TASK_FUNCS = {
    "sample-graph": task_sample_graph, "maxcut": task_maxcut, "free-energy": task_free_energy,
    "groundstate": task_groundstate, "parisi-eval": task_parisi_eval, "parisi-min": task_parisi_min,
    "predict": task_predict, "compare": task_compare,
}
CSV_COLUMNS = {"maxcut": ESTIMATOR_COLUMNS, "free-energy": ESTIMATOR_COLUMNS, "groundstate": PARISI_COLUMNS,
               "parisi-eval": PARISI_COLUMNS, "parisi-min": PARISI_COLUMNS}


def _write_csv(path, rows, columns):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def run(task: str, cfg: dict, out_root, input_bytes: bytes = b"") -> tuple[int, Path]:
    """Execute one task and return ``(exit code, output directory)``."""
    cfg = validate(task, cfg)
    chash = config_hash(cfg)
    out = Path(out_root) / f"{task}-{chash}"
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(json.dumps(cfg, indent=2, sort_keys=True) + "\n")
    inputs = input_bytes
    if "graph" in cfg:
        inputs += Path(cfg["graph"]).read_bytes()
    t0 = time.perf_counter()
    code = 0
    if task == "verify":
        results = checks.run_suite(cfg["suite"], seed=int(cfg.get("seed", 0)))
        for r in results:
            print(r.line())
        code = 0 if all(r.passed for r in results) else 1
        summary = {"suite": cfg["suite"], "passed": code == 0,
                   "checks": [{"name": r.name, "passed": r.passed, "measured": r.measured,
                               "tolerance": r.tolerance, "detail": r.detail} for r in results]}
        rows = None
    else:
        try:
            summary, rows = TASK_FUNCS[task](cfg, out)
        except ConfigInvalid:
            raise
        except (PottsCutError, ValueError) as exc:
            raise TaskFailed(f"{task}: {type(exc).__name__}: {exc}") from exc
    wall = time.perf_counter() - t0
    if rows:
        for row in rows:
            row["config_hash"] = chash
        columns = CSV_COLUMNS.get(task, list(rows[0]))
        _write_csv(out / "results.csv", rows, columns)
    meta = {"task": task, "config_hash": chash, "input_hash": git_blob_hash(inputs),
            "seed": int(cfg.get("seed", 0)), "wall_ms": round(wall * 1000)}
    (out / "summary.json").write_text(json.dumps({**meta, "result": summary}, indent=2, sort_keys=True,
                                                 default=float) + "\n")
    return code, out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="potts", description="Potts spin glass and Max kappa-cut experiments")
    ap.add_argument("task", choices=TASKS)
    ap.add_argument("--config", required=True, help="JSON config file")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--out", default="runs", help="output root directory")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2
    try:
        raw = Path(args.config).read_bytes()
        cfg = json.loads(raw)
        if not isinstance(cfg, dict):
            raise ConfigInvalid("config must be a JSON object")
    except (OSError, json.JSONDecodeError, ConfigInvalid) as exc:
        print(f"potts: bad config: {exc}", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
    try:
        code, out = run(args.task, cfg, args.out, raw)
    except (ConfigInvalid, SuiteUnknown) as exc:
        print(f"potts: {exc}", file=sys.stderr)
        return 2
    except TaskFailed as exc:
        print(f"potts: {exc}", file=sys.stderr)
        return 1
    print(out)
    return code


if __name__ == "__main__":
    sys.exit(main())
