"""Command-line driver.

Every command reads an optional JSON config (unknown keys are rejected),
writes its results plus a ``manifest.json`` into ``--out``, and logs to
standard error. ``gpsample replay <manifest>`` re-runs a manifest.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
failure.
"""
import argparse
import csv
import json
import logging
import platform
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .errors import ConfigError, DataError, EmptyData, GPSampleError
from .kernels import KernelSpec
from .regression import Dataset, condition_on, fit

FORMAT_VERSION = 1
log = logging.getLogger("gpsample")

REQUIRED = object()


def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v > 0


def _pos(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0


def _str(v):
    return isinstance(v, str)


def _opt(check):
    return lambda v: v is None or check(v)


def _int_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_pos_int(x) for x in v)


def _bool(v):
    return isinstance(v, bool)


def _bounds(v):
    return v is None or (isinstance(v, list) and all(isinstance(r, list) and len(r) == 2
                                                     and r[0] < r[1] for r in v))


_FIT = {
    "data": (REQUIRED, _str),
    "bounds": (None, _bounds),
    "family": ("SE", _str),
    "sigma_n": (1e-3, _pos),
    "fit_noise": (False, _bool),
    "restarts": (10, _pos_int),
    "standardize": (True, _bool),
}

SCHEMAS = {
    "fit": _FIT,
    "sample": {
        **_FIT,
        "model": (None, _opt(_str)),
        "sampler": ("PC", _str),
        "feature_map": ("RFF", _str),
        "n_features": (2000, _pos_int),
        "n_paths": (5, _pos_int),
        "query": (None, _opt(_str)),
        "n_query": (200, _pos_int),
    },
    "gsa": {
        "problem": ("ishigami", _str),
        "method": ("gp", _str),
        "n_train": (300, _pos_int),
        "family": ("SE", _str),
        "sigma_n": (1e-4, _pos),
        "restarts": (10, _pos_int),
        "n_x": (10_000, _pos_int),
        "n_s": (200, _pos_int),
        "n_features": (2000, _pos_int),
        "sampler": ("PC", _str),
        "n_pairs": (10, _pos_int),
        "paths_per_feature_map": (None, _opt(_pos_int)),
    },
    "optimize": {
        "problem": ("schwefel", _str),
        "dim": (None, _opt(_pos_int)),
        "n_init": (None, _opt(_pos_int)),
        "K": (50, _pos_int),
        "acquisition": ("TS_PC", _str),
        "lcb_beta": (2.0, _pos),
        "family": ("SE", _str),
        "sigma_n": (1e-3, _pos),
        "n_features": (2000, _pos_int),
        "n_starts": (500, _pos_int),
        "n_polish": (10, _pos_int),
        "restarts": (3, _pos_int),
        "noise": (True, _bool),
        "c_star": (None, _opt(lambda v: isinstance(v, (int, float)))),
    },
    "mo-optimize": {
        "problem": ("vlmop2", _str),
        "n_init": (20, _pos_int),
        "K": (50, _pos_int),
        "sampler": ("RFF", _str),
        "family": ("SE", _str),
        "sigma_n": (1e-3, _pos),
        "n_features": (2000, _pos_int),
        "restarts": (3, _pos_int),
        "population": (500, _pos_int),
        "generations": (100, _pos_int),
        "crossover_fraction": (0.65, _pos),
        "noise": (True, _bool),
        "ref_point": (None, _opt(lambda v: isinstance(v, list))),
        "baseline_population": (200, _pos_int),
        "baseline_generations": (200, _pos_int),
        "baseline_hv": (None, _opt(_pos)),
    },
    "convergence-study": {
        "family": ("SE", _str),
        "lengthscale": (1.0, _pos),
        "sigma_f": (1.0, _pos),
        "lo": (-5.0, lambda v: isinstance(v, (int, float))),
        "hi": (5.0, lambda v: isinstance(v, (int, float))),
        "n_grid": (2000, _pos_int),
        "n_features": ([50, 100, 200, 500, 1000, 2000, 5000, 10000], _int_list),
        "methods": (["RFF", "QMC"], lambda v: isinstance(v, list) and all(map(_str, v))),
        "repeats": (100, _pos_int),
        "measure_scale": (None, _opt(_pos)),
        "halfwidth": (None, _opt(_pos)),
    },
    "wasserstein-study": {
        "ns": ([4, 16, 64, 256, 1024], _int_list),
        "n_features": (2000, _pos_int),
        "realizations": (20, _pos_int),
        "n_query": (2000, _pos_int),
        "family": ("SE", _str),
        "sigma_n": (1e-3, _pos),
        "restarts": (5, _pos_int),
        "refit": (False, _bool),
    },
}


def resolve_config(command, raw):
    """Fill defaults, reject unknown keys and validate values."""
    schema = SCHEMAS[command]
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys for {command!r}: {', '.join(unknown)}")
    cfg = {}
    for key, (default, check) in schema.items():
        if key in raw:
            val = raw[key]
        elif default is REQUIRED:
            raise ConfigError(f"missing required config key {key!r}")
        else:
            val = default
        if not check(val):
            raise ConfigError(f"invalid value for {key!r}: {val!r}")
        cfg[key] = val
    return cfg


# ------------------------------------------------------------------ io helpers
def read_dataset_csv(path):
    """Read ``x1,...,xd,y`` rows; returns ``(X, y)``."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if len(rows) < 2:
        raise EmptyData(f"{path} has no data rows")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[-1] != "y":
        raise DataError(f"{path}: header must be x1,...,xd,y")
    try:
        A = np.array([[float(v) for v in r] for r in rows[1:]])
    except ValueError as exc:
        raise DataError(f"{path}: non-numeric entry ({exc})") from exc
    if A.shape[1] != len(header):
        raise DataError(f"{path}: ragged rows")
    if not np.all(np.isfinite(A)):
        raise DataError(f"{path}: non-finite values")
    return A[:, :-1], A[:, -1]


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(f"# format_version={FORMAT_VERSION}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump({"format_version": FORMAT_VERSION, **obj}, fh, indent=2, default=_jsonable)
        fh.write("\n")


def write_jsonl(path, records):
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps({"format_version": FORMAT_VERSION, **rec}, default=_jsonable))
            fh.write("\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _strip_timing(rec):
    return {k: v for k, v in rec.items() if k != "seconds"}


def _dataset_from_cfg(cfg):
    X, y = read_dataset_csv(cfg["data"])
    bounds = cfg["bounds"]
    if bounds is None:
        lo, hi = X.min(axis=0), X.max(axis=0)
        hi = np.where(hi > lo, hi, lo + 1.0)
        bounds = np.column_stack([lo, hi])
    bounds = np.asarray(bounds, dtype=float)
    if bounds.shape != (X.shape[1], 2):
        raise ConfigError(f"bounds must have shape ({X.shape[1]}, 2)")
    return Dataset.from_raw(X, y, bounds, cfg["standardize"])


def _fit_from_cfg(cfg, seed):
    data = _dataset_from_cfg(cfg)
    return fit(data, cfg["family"], cfg["sigma_n"], cfg["restarts"], seed,
               fit_noise=cfg["fit_noise"])


# ------------------------------------------------------------------ commands
def cmd_fit(cfg, seed, out):
    gp = _fit_from_cfg(cfg, seed)
    cond = float(np.linalg.cond(gp.kernel.gram(gp.data.X)))
    write_json(out / "model.json", {
        "kernel": gp.kernel.to_dict(), "log_marginal_likelihood": gp.lml,
        "condition_number": cond,
        "data": {"n": gp.data.n, "dim": gp.data.dim, "y_mean": gp.data.y_mean,
                 "y_std": gp.data.y_std, "bounds": gp.data.bounds.tolist()}})
    return ["model.json"]


def cmd_sample(cfg, seed, out):
    from .features import build_feature_map
    from .paths import draw_path
    from .rng import split
    fit_rng, fm_rng, path_rng = split(np.random.default_rng(np.random.SeedSequence(seed)), 3)
    if cfg["model"]:
        try:
            doc = json.loads(Path(cfg["model"]).read_text())
            spec = KernelSpec.from_dict(doc.get("kernel", doc))
        except OSError as exc:
            raise DataError(f"cannot read {cfg['model']}: {exc}") from exc
        except (KeyError, ValueError, TypeError, AttributeError) as exc:
            raise ConfigError(f"invalid model file: {exc}") from exc
        gp = condition_on(_dataset_from_cfg(cfg), spec)
    else:
        gp = _fit_from_cfg(cfg, fit_rng)
    data = gp.data
    if cfg["query"]:
        try:
            Xq = np.loadtxt(cfg["query"], delimiter=",", ndmin=2, comments="#", skiprows=1)
        except (OSError, ValueError) as exc:
            raise DataError(f"cannot read query points: {exc}") from exc
    else:
        if data.dim > 2:
            raise ConfigError("grid queries are limited to d <= 2; supply a query CSV")
        axes = [np.linspace(lo, hi, cfg["n_query"]) for lo, hi in data.bounds]
        Xq = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, data.dim)
    fmap = build_feature_map(cfg["feature_map"], gp.kernel, cfg["n_features"], fm_rng,
                             halfwidth=1.5, center=0.5)
    path = draw_path(gp, fmap, path_rng, cfg["sampler"].upper(), count=cfg["n_paths"])
    F = data.y_from_model(path(data.to_unit(Xq)))
    header = [f"x{i + 1}" for i in range(data.dim)] + ["path_id", "value"]
    write_csv(out / "samples.csv", header,
              ([*x, j, v] for j in range(F.shape[1]) for x, v in zip(Xq, F[:, j])))
    return ["samples.csv"]


def cmd_gsa(cfg, seed, out):
    from .sobol import estimate_indices, generate_pick_freeze, gsa_benchmark, run_gp_gsa
    try:
        fn, dist = gsa_benchmark(cfg["problem"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    method = cfg["method"].lower()
    if method == "gp":
        res, gp = run_gp_gsa(fn, dist, cfg["n_train"], cfg["family"], cfg["sigma_n"],
                             cfg["restarts"], seed, n_x=cfg["n_x"], n_s=cfg["n_s"],
                             n_features=cfg["n_features"], sampler=cfg["sampler"].upper(),
                             n_pairs=cfg["n_pairs"],
                             paths_per_feature_map=cfg["paths_per_feature_map"])
        summary = res.to_dict()
        summary["kernel"] = gp.kernel.to_dict()
    elif method == "direct":
        pf = generate_pick_freeze(dist, cfg["n_x"], seed)
        S, ST = estimate_indices(fn, pf)
        # same layout as the GP summary; a single estimate has zero spread
        summary = {"format_version": FORMAT_VERSION, "n_x": cfg["n_x"],
                   "per_dim": [{"name": n, "S_median": float(s), "S_iqr": 0.0,
                                "ST_median": float(t), "ST_iqr": 0.0}
                               for n, s, t in zip(dist.names, S, ST)]}
    else:
        raise ConfigError("method must be 'gp' or 'direct'")
    write_json(out / "gsa.json", summary)
    rows = [[v["name"], v["S_median"], v["S_iqr"], v["ST_median"], v["ST_iqr"]]
            for v in summary["per_dim"]]
    write_csv(out / "indices.csv", ["input", "S", "S_iqr", "ST", "ST_iqr"], rows)
    return ["gsa.json", "indices.csv"]


def cmd_optimize(cfg, seed, out):
    from .bo import AcquisitionSpec, gp_ts_so, new_campaign
    from .rng import split
    from .testbeds import so_benchmark
    try:
        prob = so_benchmark(cfg["problem"], cfg["dim"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    c_star = cfg["c_star"] if cfg["c_star"] is not None else prob.c_star
    if c_star is None:
        raise ConfigError(f"problem {prob.name!r} has no known minimum; set c_star")
    try:
        acq = AcquisitionSpec(cfg["acquisition"], cfg["lcb_beta"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    init_rng, run_rng = split(np.random.default_rng(np.random.SeedSequence(seed)), 2)
    n_init = cfg["n_init"] or 10 * prob.dim
    t0 = time.perf_counter()
    camp = new_campaign(prob, prob.bounds, n_init, init_rng, c_star=c_star)
    log.info("initial regret %.3f", camp.regret())
    gp_ts_so(camp, cfg["family"], cfg["sigma_n"], cfg["n_features"], cfg["K"], acq, run_rng,
             cfg["n_starts"], cfg["n_polish"], restarts=cfg["restarts"], add_noise=cfg["noise"],
             callback=lambda r: log.info("iter %d  y_min %.6g", r["iteration"], r["y_min"]))
    recs = [{**_strip_timing(r), "regret": float(np.log10(max(r["y_min_true"] - c_star, 1e-300)))}
            for r in camp.history]
    write_jsonl(out / "history.jsonl", recs)
    x, y, yt = camp.incumbent
    summary = {"problem": prob.metadata(), "best_x": x.tolist(), "best_y": float(y),
               "best_y_true": float(yt), "final_regret": camp.regret(), "c_star": c_star}
    write_json(out / "summary.json", summary)
    log.info("wall time %.1f s", time.perf_counter() - t0)
    return ["history.jsonl", "summary.json"]


def cmd_mo_optimize(cfg, seed, out):
    from .moo import Nsga2Config, gp_ts_mo, new_mo_campaign, nsga2
    from .rng import split
    from .testbeds import mo_benchmark
    try:
        prob = mo_benchmark(cfg["problem"])
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc
    ref = np.asarray(cfg["ref_point"] if cfg["ref_point"] is not None else prob.ref_point, float)
    if ref.size != prob.n_obj:
        raise ConfigError(f"ref_point needs {prob.n_obj} entries")
    try:
        nsga = Nsga2Config(cfg["population"], cfg["generations"], cfg["crossover_fraction"])
        base_cfg = Nsga2Config(cfg["baseline_population"], cfg["baseline_generations"],
                               cfg["crossover_fraction"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    base_rng, init_rng, run_rng = split(np.random.default_rng(np.random.SeedSequence(seed)), 3)
    base = cfg["baseline_hv"]
    if base is None:
        base = nsga2(prob, prob.bounds, base_cfg, base_rng).hypervolume(ref)
    camp = new_mo_campaign(prob, cfg["n_init"], init_rng, ref_point=ref, baseline_hv=base)
    gp_ts_mo(camp, cfg["family"], cfg["sigma_n"], cfg["n_features"], cfg["K"], nsga,
             cfg["sampler"].upper(), run_rng, cfg["restarts"], cfg["noise"],
             callback=lambda r: log.info("iter %d  gamma %.4f", r["iteration"], r["gamma"]))
    d, m = prob.dim, prob.n_obj
    write_csv(out / "archive.csv", [f"x{i + 1}" for i in range(d)] + [f"y{j + 1}" for j in range(m)],
              (np.concatenate([x, y]) for x, y in zip(camp.archive.X, camp.archive.Y)))
    write_csv(out / "hv_history.csv", ["iteration", "gamma"],
              ([i + 1, g] for i, g in enumerate(camp.hv_history)))
    write_jsonl(out / "history.jsonl", [_strip_timing(r) for r in camp.history])
    write_json(out / "summary.json", {"problem": prob.metadata(), "baseline_hv": base,
                                      "final_gamma": camp.gamma(), "archive_size": len(camp.archive)})
    return ["archive.csv", "hv_history.csv", "history.jsonl", "summary.json"]


def cmd_convergence_study(cfg, seed, out):
    from .studies import convergence_study
    spec = KernelSpec(cfg["family"], cfg["sigma_f"], [cfg["lengthscale"]])
    if not cfg["hi"] > cfg["lo"]:
        raise ConfigError("hi must exceed lo")
    rows, slopes = convergence_study(spec, cfg["lo"], cfg["hi"], cfg["n_grid"], cfg["n_features"],
                                     tuple(cfg["methods"]), cfg["repeats"], seed,
                                     cfg["measure_scale"], cfg["halfwidth"])
    keys = ["method", "n_features", "repeats", "mean", "median", "q05", "q95"]
    write_csv(out / "convergence.csv", keys, ([r[k] for k in keys] for r in rows))
    write_json(out / "slopes.json", {"loglog_slope_of_mean": slopes})
    return ["convergence.csv", "slopes.json"]


def cmd_wasserstein_study(cfg, seed, out):
    from .studies import wasserstein_study
    rows = wasserstein_study(cfg["ns"], cfg["n_features"], cfg["realizations"], cfg["n_query"],
                             cfg["family"], cfg["sigma_n"], seed, cfg["restarts"], cfg["refit"])
    keys = ["n_train", "method", "median", "q25", "q75", "lengthscale"]
    write_csv(out / "wasserstein.csv", keys, ([r[k] for k in keys] for r in rows))
    write_jsonl(out / "values.jsonl", [{"n_train": r["n_train"], "method": r["method"],
                                        "values": r["values"]} for r in rows])
    return ["wasserstein.csv", "values.jsonl"]


COMMANDS = {
    "fit": cmd_fit,
    "sample": cmd_sample,
    "gsa": cmd_gsa,
    "optimize": cmd_optimize,
    "mo-optimize": cmd_mo_optimize,
    "convergence-study": cmd_convergence_study,
    "wasserstein-study": cmd_wasserstein_study,
}

HELP = {
    "fit": "fit GP hyperparameters to a CSV data set",
    "sample": "draw posterior sample paths on a grid or query points",
    "gsa": "Sobol' indices of a benchmark, directly or through GP paths",
    "optimize": "single-objective Thompson sampling on a benchmark",
    "mo-optimize": "multi-objective Thompson sampling on a benchmark",
    "convergence-study": "kernel approximation error versus feature count",
    "wasserstein-study": "Wasserstein accuracy of RFF and PC posterior samplers",
}


# ------------------------------------------------------------------ plumbing
def build_info():
    return {"package": "gpsample", "version": __version__, "python": platform.python_version(),
            "numpy": np.__version__, "scipy": scipy.__version__}


def _thread_limit(n):
    if n is None:
        return nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        log.warning("threadpoolctl is not installed; --threads ignored")
        return nullcontext()
    return threadpool_limits(limits=n)


def run(command, raw_cfg, seed, out, threads=None):
    """Validate, execute and write the manifest; returns the output files."""
    cfg = resolve_config(command, raw_cfg)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"command": command, "config": cfg, "seed": seed, "threads": threads,
                "build": build_info()}
    with _thread_limit(threads):
        files = COMMANDS[command](cfg, seed, out)
    write_json(out / "manifest.json", {**manifest, "outputs": files})
    return files


def _load_config(path):
    if path is None:
        return {}
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc


def _parse_set(items):
    out = {}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        try:
            out[key] = json.loads(val)
        except json.JSONDecodeError:
            out[key] = val
    return out


def make_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON configuration file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one config key (value parsed as JSON when possible)")
    common.add_argument("--seed", type=int, default=0, help="root random seed")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--threads", type=int, default=None, help="BLAS thread limit")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p = argparse.ArgumentParser(prog="gpsample", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        keys = "\n".join(f"  {k} = {'(required)' if d is REQUIRED else json.dumps(d)}"
                         for k, (d, _) in SCHEMAS[name].items())
        sub.add_parser(name, parents=[common], help=HELP[name], description=HELP[name],
                       epilog="config keys and defaults:\n" + keys,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    rp = sub.add_parser("replay", help="re-run a manifest")
    rp.add_argument("manifest")
    rp.add_argument("--out", required=True)
    rp.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None):
    args = make_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        if args.command == "replay":
            m = _load_config(args.manifest)
            if m.get("format_version") != FORMAT_VERSION or m.get("command") not in COMMANDS:
                raise ConfigError("not a recognised manifest")
            run(m["command"], m["config"], m["seed"], args.out, m.get("threads"))
        else:
            raw = {**_load_config(args.config), **_parse_set(args.set)}
            run(args.command, raw, args.seed, args.out, args.threads)
    except ConfigError as exc:
        log.error("%s", exc)
        return 2
    except DataError as exc:
        log.error("%s", exc)
        return 3
    except GPSampleError as exc:
        log.error("%s", exc)
        return exc.exit_code
    except (ValueError, KeyError) as exc:
        # invalid option values surfacing from library constructors
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
