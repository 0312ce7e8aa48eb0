"""Operator surface: synthetic completion runs, real-data completion,
the DC benchmark table, and the diagnostic battery.

Configuration is a flat key=value file (``--config``); explicit command-line
flags override it.  Defaults follow the benchmark protocol values.
"""

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import kernels
from .exceptions import SolverError
from .ilpa import IlpaConfig, STATUS_ABORTED, ilpa_run, write_trace_csv
from .matcomp import (SamplingModel, ScadConfig, build_instance, default_rank,
                      initial_point, make_observation, metric_nmae, metric_re,
                      read_triplets, report_rank, sample_indices)
from .numerics import RandomSource
from .subgm import SubgmConfig, subgm_run


def load_config_file(path):
    """Flat key=value lines; '#' comments and blanks ignored."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise SolverError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _coerce(value, like):
    if isinstance(like, bool):
        return value.lower() in ("1", "true", "yes", "on")
    if isinstance(like, int):
        return int(value)
    if isinstance(like, float):
        return float(value)
    return value


def effective_options(args, defaults):
    """defaults < config file < explicit flags."""
    out = dict(defaults)
    if getattr(args, "config", None):
        for key, raw in load_config_file(args.config).items():
            if key in out:
                out[key] = _coerce(raw, out[key])
            else:
                out[key] = raw
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            out[key] = val
    return out


def _solver_config(opts, step_scale_hint=None):
    gamma_min = opts["gamma_min"]
    if gamma_min is None or gamma_min <= 0:
        gamma_min = max(10.0, max(opts["n1"], opts["n2"]) / 100.0)
    return IlpaConfig(rho=2.0, gamma_min=gamma_min, gamma_max=1e6,
                      eps1=opts["eps1"], eps2=opts["eps2"], kbar=opts["kbar"],
                      kmax=opts["kmax"], inexact_mode=opts["inexact_mode"])


SYNTH_DEFAULTS = dict(n1=1000, n2=1000, rank_true=10, sr=0.25, scheme="S1",
                      noise="V", outliers=0.3, c_lambda=0.06, rank=0,
                      eps1=5e-6, eps2=5e-4, kbar=10, kmax=2000,
                      gamma_min=0.0, inexact_mode="paper", seeds=1)

COMPLETE_DEFAULTS = dict(rating_min=-10.0, rating_max=10.0, rating_shift=0.0,
                         sr=0.25, scheme="S1", rank=0, c_lambda=0.06,
                         eps1=1e-4, eps2=5e-3, kbar=10, kmax=2000,
                         gamma_min=0.0, inexact_mode="paper")


def _run_one_completion(obs, r, c_lambda, solver, opts, seed_rng, holdout=None,
                        rating_range=None, shift=0.0):
    p = build_instance(obs, r=r, cfg=ScadConfig(c_lambda=c_lambda))
    x0 = initial_point(obs, r, seed_rng)
    cfg = _solver_config({**opts, "n1": obs.n1, "n2": obs.n2})
    t0 = time.perf_counter()
    if solver == "ilpa":
        x, trace, status = ilpa_run(p, cfg, x0)
    else:
        scfg = SubgmConfig(eps1=opts["eps1"], eps2=opts["eps2"], kbar=500, kmax=opts["kmax"])
        x, trace, status = subgm_run(p, scfg, x0)
    wall_ms = (time.perf_counter() - t0) * 1e3
    metrics = {
        "re": None,
        "nmae": None,
        "rank": report_rank(x, obs.n1, obs.n2, r),
        "time_ms": wall_ms,
        "iters": trace[-1].k,
        "status": status,
        "phi": trace[-1].phi,
    }
    if obs.ground_truth is not None:
        metrics["re"] = metric_re(x, obs)
    if holdout is not None:
        rmin, rmax = rating_range
        metrics["nmae"] = metric_nmae(x, holdout, rmin, rmax, obs.n1, obs.n2, r, shift=0.0)
    return x, trace, metrics


def cmd_synth(args):
    opts = effective_options(args, SYNTH_DEFAULTS)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    kernels.set_num_threads(args.threads)
    runs = []
    for s in range(int(opts["seeds"])):
        seed = args.seed + s
        rng = RandomSource(seed)
        n1, n2 = int(opts["n1"]), int(opts["n2"])
        r_true = int(opts["rank_true"])
        M = rng.normal((n1, r_true)) @ rng.normal((n2, r_true)).T
        model = SamplingModel(n1, n2, opts["scheme"], float(opts["sr"]))
        obs = make_observation(M, model, rng, noise_kind=opts["noise"],
                               outlier_fraction=float(opts["outliers"]))
        r = int(opts["rank"]) or default_rank(n1, n2)
        _, trace, metrics = _run_one_completion(
            obs, r, float(opts["c_lambda"]), args.solver, opts, rng)
        metrics["seed"] = seed
        runs.append(metrics)
        suffix = f"_seed{seed}" if int(opts["seeds"]) > 1 else ""
        write_trace_csv(trace, out_dir / f"trace{suffix}.csv",
                        header_fields={"threads": args.threads,
                                       "backend": kernels.backend_name(),
                                       "solver": args.solver, "seed": seed})
    payload = runs[0] if len(runs) == 1 else {
        "runs": runs,
        "aggregate": _aggregate(runs, ("re", "rank", "time_ms", "iters")),
    }
    (out_dir / "metrics.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(json.dumps(payload, indent=2, sort_keys=True))
    return 0


def _aggregate(runs, keys):
    agg = {}
    for key in keys:
        vals = [r[key] for r in runs if r.get(key) is not None]
        if vals:
            agg[f"{key}_mean"] = float(np.mean(vals))
            agg[f"{key}_std"] = float(np.std(vals))
    return agg


def cmd_complete(args):
    opts = effective_options(args, COMPLETE_DEFAULTS)
    out_dir = Path(args.out_dir)
    data = Path(args.data)
    if not data.exists():
        print(f"error: data file {data} not found", file=sys.stderr)
        return 2
    try:
        I, J, vals, n1, n2 = read_triplets(data, shift=float(opts["rating_shift"]))
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    out_dir.mkdir(parents=True, exist_ok=True)
    kernels.set_num_threads(args.threads)
    rng = RandomSource(args.seed)
    known = {}
    for i, j, v in zip(I, J, vals):
        known[(int(i), int(j))] = float(v)

    model = SamplingModel(n1, n2, opts["scheme"], float(opts["sr"]))
    SI, SJ = sample_indices(model, rng)
    keep = np.fromiter(((int(i), int(j)) in known for i, j in zip(SI, SJ)),
                       dtype=bool, count=len(SI))
    SI, SJ = SI[keep], SJ[keep]
    b = np.array([known[(int(i), int(j))] for i, j in zip(SI, SJ)])
    from .matcomp import Observation
    obs = Observation(SI, SJ, b, n1, n2)
    sampled_cells = set(zip(SI.tolist(), SJ.tolist()))
    holdout_cells = [(i, j) for (i, j) in known if (i, j) not in sampled_cells]
    try:
        if len(b) == 0:
            raise SolverError("no sampled entries landed on known cells")
        HI = np.array([i for i, _ in holdout_cells], dtype=np.int64)
        HJ = np.array([j for _, j in holdout_cells], dtype=np.int64)
        HV = np.array([known[c] for c in holdout_cells])
        r = int(opts["rank"]) or default_rank(n1, n2)
        _, trace, metrics = _run_one_completion(
            obs, r, float(opts["c_lambda"]), args.solver, opts, rng,
            holdout=(HI, HJ, HV),
            rating_range=(float(opts["rating_min"]), float(opts["rating_max"])))
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    metrics["seed"] = args.seed
    metrics["sampling_ratio_actual"] = len(b) / (n1 * n2)
    write_trace_csv(trace, out_dir / "trace.csv",
                    header_fields={"threads": args.threads,
                                   "backend": kernels.backend_name(),
                                   "solver": args.solver, "seed": args.seed})
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    print(json.dumps(metrics, indent=2, sort_keys=True))
    return 0


def cmd_dc_bench(args):
    from .dcsuite import build_example, nopt_benchmark

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ids = [int(t) for t in args.examples.split(",") if t]
    rows = []
    for ex_id in ids:
        ex = build_example(ex_id)
        res = nopt_benchmark(ex, runs=args.runs, seed=args.seed,
                             solver=args.solver, threads=args.threads)
        rows.append(res)
        print(f"example {ex_id}: min {res.min_obj!r} max {res.max_obj!r} "
              f"mean {res.mean_obj!r} Nopt {res.nopt} time {res.mean_time_s:.4f}s"
              + (f" aborted {res.n_aborted}" if res.n_aborted else ""))
    with open(out_dir / "bench.csv", "w") as fh:
        fh.write("example,min,max,mean,Nopt,time\n")
        for res in rows:
            fh.write(f"{res.example},{res.min_obj!r},{res.max_obj!r},"
                     f"{res.mean_obj!r},{res.nopt},{res.mean_time_s:.6f}\n")
    return 0


def cmd_check(args):
    from .diagnostics import run_all

    results = run_all(corrupt_vartheta2=args.corrupt_vartheta2_grad)
    failed = [name for name, ok, _ in results if not ok]
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    if failed:
        print("failed checks: " + ", ".join(failed), file=sys.stderr)
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="dcprox",
                                     description="DC composite optimization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def shared(sp):
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--out-dir", default="out")
        sp.add_argument("--config", default=None, help="flat key=value file")
        sp.add_argument("--solver", choices=("ilpa", "subgm"), default="ilpa")
        sp.add_argument("--inexact-mode", choices=("theory", "paper"), default=None)

    sp = sub.add_parser("synth", help="synthetic low-rank completion benchmark")
    shared(sp)
    sp.add_argument("--n1", type=int, default=None)
    sp.add_argument("--n2", type=int, default=None)
    sp.add_argument("--rank-true", type=int, default=None, help="true rank (default 10)")
    sp.add_argument("--sr", type=float, default=None, help="sampling ratio (default 0.25)")
    sp.add_argument("--scheme", choices=("S1", "S2"), default=None)
    sp.add_argument("--noise", choices=("I", "II", "III", "IV", "V"), default=None)
    sp.add_argument("--outliers", type=float, default=None, help="outlier fraction (default 0.3)")
    sp.add_argument("--c-lambda", type=float, default=None, help="lambda = c_lambda*||b|| (default 0.06)")
    sp.add_argument("--rank", type=int, default=None, help="factor rank (default min(100, min(n)/2))")
    sp.add_argument("--seeds", type=int, default=None, help="number of seeds to average")
    sp.add_argument("--eps1", type=float, default=None)
    sp.add_argument("--eps2", type=float, default=None)
    sp.add_argument("--kbar", type=int, default=None)
    sp.add_argument("--kmax", type=int, default=None)
    sp.add_argument("--gamma-min", type=float, default=None, help="0 -> max(10, n/100)")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("complete", help="completion on a rating-triplet file")
    shared(sp)
    sp.add_argument("--data", required=True)
    sp.add_argument("--rating-min", type=float, default=None)
    sp.add_argument("--rating-max", type=float, default=None)
    sp.add_argument("--rating-shift", type=float, default=None,
                    help="added to ratings before solving (e.g. -3 for movie data)")
    sp.add_argument("--sr", type=float, default=None)
    sp.add_argument("--scheme", choices=("S1", "S2"), default=None)
    sp.add_argument("--rank", type=int, default=None)
    sp.add_argument("--c-lambda", type=float, default=None)
    sp.add_argument("--eps1", type=float, default=None)
    sp.add_argument("--eps2", type=float, default=None)
    sp.add_argument("--kbar", type=int, default=None)
    sp.add_argument("--kmax", type=int, default=None)
    sp.add_argument("--gamma-min", type=float, default=None)
    sp.set_defaults(func=cmd_complete)

    sp = sub.add_parser("dc-bench", help="multi-start DC benchmark table")
    shared(sp)
    sp.add_argument("--examples", default="1,2,3,4,5,6")
    sp.add_argument("--runs", type=int, default=100)
    sp.set_defaults(func=cmd_dc_bench)

    sp = sub.add_parser("check", help="run the diagnostic battery")
    shared(sp)
    sp.add_argument("--corrupt-vartheta2-grad", action="store_true",
                    help=argparse.SUPPRESS)  # negative-control test hook
    sp.set_defaults(func=cmd_check)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
