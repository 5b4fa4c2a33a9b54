"""Command-line driver: sweeps, replica farming, reports and run manifests.

Exit codes: 0 all checks passed, 1 a check failed, 2 usage error,
3 resource or budget error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .environment import (
    BudgetError, build_transfer_matrix, compute_lambda_c, sample_cycle_stationary,
    sample_environment_chain, sample_environment_rejection, save_snapshot, text_dump,
)
from .regeneration import (
    IncrementSample, InsufficientSampleError, direct_speed, moment_diagnostic, mz_fluctuation_check,
    speed_estimate, tail_index_hill, write_increments_csv,
)
from .seeding import replica_seed
from .walker import simulate_batch

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3
OUT_ENV = "LADDERWALK_OUT"
CSV_VERSION = "1"
SWEEP_HEADER = ["p", "lambda", "n", "replicas", "estimate", "se", "method", "seed", "discrepancy"]


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# output handling

class Output:
    """Collects files for one run; refuses to clobber without ``overwrite``."""

    def __init__(self, directory, stem, overwrite):
        self.dir = Path(directory)
        self.stem = stem
        self.overwrite = overwrite
        self.files = []

    def path(self, suffix):
        return self.dir / f"{self.stem}{suffix}"

    def check(self, *suffixes):
        self.dir.mkdir(parents=True, exist_ok=True)
        for s in suffixes + (".manifest.json",):
            if self.path(s).exists() and not self.overwrite:
                raise UsageError(f"{self.path(s)} exists; pass --overwrite to replace it")

    def write_text(self, suffix, text):
        p = self.path(suffix)
        with open(p, "w" if self.overwrite else "x", newline="") as fh:
            fh.write(text)
        self.files.append(str(p))
        return p

    def write_csv(self, suffix, header, rows):
        buf = io.StringIO()
        buf.write(f"# ladderwalk csv v{CSV_VERSION}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
        return self.write_text(suffix, buf.getvalue())

    def write_json(self, suffix, obj):
        return self.write_text(suffix, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def _json_default(o):
    if isinstance(o, np.bool_):
        return bool(o)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.floating):
        return float(o)
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _versions():
    import numba
    import scipy

    return {"ladderwalk": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def write_manifest(out: Output, args, extra: dict, started: float):
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    manifest = {
        "config": cfg,
        "lambda_c": compute_lambda_c(args.p),
        "versions": _versions(),
        "wall_time_s": round(time.time() - started, 3),
        "outputs": list(out.files),
        **extra,
    }
    out.write_json(".manifest.json", manifest)


# ---------------------------------------------------------------------------
# argument handling

def _float_list(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")


def read_config_file(path) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"bad config line: {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value file; flags given on the command line win")
    common.add_argument("--from-manifest", help="rerun with the configuration echoed in a manifest")
    common.add_argument("--p", type=float, default=0.5, help="edge density in (0, 1)")
    common.add_argument("--lambda", dest="lam", type=float, default=None, help="bias")
    common.add_argument("--lambda-grid", type=_float_list, default=None, help="comma-separated biases")
    common.add_argument("--steps", type=int, default=None, help="walk length")
    common.add_argument("--replicas", type=int, default=None)
    common.add_argument("--cutoff", type=int, default=30, help="regeneration confirmation distance")
    common.add_argument("--seed", type=int, default=0, help="master seed")
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or .)")
    common.add_argument("--hill-k", type=int, default=None)
    common.add_argument("--level", type=float, default=0.01, help="test level")
    common.add_argument("--overwrite", action="store_true")

    parser = argparse.ArgumentParser(prog="ladderwalk", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("lambda-c", parents=[common], help="critical bias over a density grid")
    s.add_argument("--grid-points", type=int, default=99)
    s.set_defaults(func=cmd_lambda_c)

    s = sub.add_parser("sample-env", parents=[common], help="sample and save an environment window")
    s.add_argument("--sampler", choices=["chain", "rejection", "cycle"], default="chain")
    s.add_argument("--columns", type=int, default=200, help="slabs (chain), window width (rejection) or cycles")
    s.add_argument("--max-attempts", type=int, default=1_000_000)
    s.set_defaults(func=cmd_sample_env)

    s = sub.add_parser("simulate", parents=[common], help="run walks and export regeneration increments")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("speed-sweep", parents=[common], help="speed estimates over a bias grid")
    s.set_defaults(func=cmd_speed_sweep)

    s = sub.add_parser("clt", parents=[common], help="covariance and normality of the rescaled walk")
    s.set_defaults(func=cmd_clt)

    s = sub.add_parser("derivative", parents=[common], help="speed derivative as a covariance")
    s.add_argument("--fd-step", type=float, default=0.05)
    s.set_defaults(func=cmd_derivative)

    s = sub.add_parser("trap-stats", parents=[common], help="trap return times against closed forms")
    s.add_argument("--depth", type=int, default=3)
    s.set_defaults(func=cmd_trap_stats)

    s = sub.add_parser("tail-index", parents=[common], help="Hill estimate of the regeneration-time tail")
    s.set_defaults(func=cmd_tail_index)

    s = sub.add_parser("mz-check", parents=[common], help="scaled fluctuations at exponent r")
    s.add_argument("--r", type=float, default=1.2)
    s.set_defaults(func=cmd_mz_check)
    return parser


def _merge_file_config(args, parser, argv):
    sources = []
    if args.from_manifest:
        cfg = json.loads(Path(args.from_manifest).read_text())["config"]
        sources.append({k: v for k, v in cfg.items() if k not in ("config", "from_manifest", "out", "overwrite")})
    if args.config:
        sources.append(read_config_file(args.config))
    if not sources:
        return args
    given = {a.split("=")[0].lstrip("-").replace("-", "_") for a in argv if a.startswith("--")}
    given = {"lam" if g == "lambda" else g for g in given}
    types = {"p": float, "lam": float, "steps": int, "replicas": int, "cutoff": int, "seed": int,
             "hill_k": int, "level": float, "r": float, "depth": int, "columns": int, "fd_step": float,
             "grid_points": int, "max_attempts": int}
    for src in sources:
        for k, v in src.items():
            key = "lam" if k == "lambda" else k
            if key in given or not hasattr(args, key) or v is None:
                continue
            if key == "lambda_grid" and isinstance(v, str):
                v = _float_list(v)
            elif key in types and isinstance(v, str):
                v = types[key](v)
            setattr(args, key, v)
    return args


def _validate(args):
    if not 0 < args.p < 1:
        raise UsageError("--p must lie in (0, 1)")
    if args.lam is not None and args.lam < 0:
        raise UsageError("--lambda must be >= 0")
    if args.lambda_grid is not None and any(l < 0 for l in args.lambda_grid):
        raise UsageError("--lambda-grid entries must be >= 0")
    for name in ("steps", "replicas"):
        v = getattr(args, name)
        if v is not None and v < 0:
            raise UsageError(f"--{name} must be >= 0")
    if args.cutoff < 1:
        raise UsageError("--cutoff must be >= 1")
    if not 0 < args.level < 1:
        raise UsageError("--level must lie in (0, 1)")
    if args.hill_k is not None and args.hill_k < 1:
        raise UsageError("--hill-k must be >= 1")


def _need(args, *names):
    for n in names:
        if getattr(args, n) is None:
            flag = "--lambda" if n == "lam" else "--" + n.replace("_", "-")
            raise UsageError(f"{args.command} needs {flag}")


def _output(args, stem, *suffixes):
    directory = args.out or os.environ.get(OUT_ENV, ".")
    out = Output(directory, stem, args.overwrite)
    out.check(*suffixes)
    return out


def _tag(cmd, lam):
    return f"{cmd}:lambda={lam!r}"


def _batch(args, cmd, lam, steps, replicas, checkpoints=(), alt_lambdas=(), tag=None):
    return simulate_batch(args.p, lam, steps, replicas, args.seed, tag or _tag(cmd, lam),
                          checkpoints=checkpoints, alt_lambdas=alt_lambdas)


def _batch_extra(batch, cutoff):
    censored = 0
    found = 0
    for r in batch.good():
        tau, _, _, c = r.regenerations(cutoff)
        censored += c
        found += tau.size
    return {"discard_rate": batch.discard_rate, "censored_candidates": censored, "regenerations": found,
            "replica_seeds": batch.seeds.tolist()}


# ---------------------------------------------------------------------------
# subcommands; each returns (exit_code, summary dict)

def cmd_lambda_c(args, started):
    out = _output(args, "lambda_c", ".csv")
    grid = np.array([args.p]) if args.grid_points <= 1 else np.linspace(0.01, 0.99, args.grid_points)
    lc = np.array([compute_lambda_c(p) for p in grid])
    out.write_csv(".csv", ["p", "lambda_c", "lambda_c_half"], zip(grid, lc, lc / 2))
    sym = float(np.max(np.abs(lc - np.array([compute_lambda_c(1 - p) for p in grid]))))
    checks = {"symmetry_max_abs": sym, "symmetric": sym < 1e-12,
              "argmin_p": float(grid[np.argmin(lc)])}
    print(f"lambda_c({args.p}) = {compute_lambda_c(args.p):.6f}")
    write_manifest(out, args, {"checks": checks}, started)
    return (EXIT_OK if checks["symmetric"] else EXIT_FAIL), checks


def cmd_sample_env(args, started):
    out = _output(args, f"env_{args.sampler}", ".ladw", ".txt")
    if args.sampler == "chain":
        cfg = sample_environment_chain(build_transfer_matrix(args.p), args.columns, args.seed)
    elif args.sampler == "cycle":
        cfg = sample_cycle_stationary(build_transfer_matrix(args.p), args.columns, args.seed)
    else:
        half = args.columns // 2
        cfg = sample_environment_rejection(args.p, half, args.columns - half, args.seed, args.max_attempts)
    save_snapshot(cfg, out.path(".ladw"), overwrite=args.overwrite)
    out.files.append(str(out.path(".ladw")))
    out.write_text(".txt", text_dump(cfg))
    info = {"x_min": cfg.x_min, "x_max": cfg.x_max, "traps": len(cfg.traps),
            "pre_regeneration_points": int(cfg.pre_regen.sum())}
    write_manifest(out, args, info, started)
    return EXIT_OK, info


def cmd_simulate(args, started):
    _need(args, "lam", "steps", "replicas")
    out = _output(args, "simulate", ".increments.csv", ".replicas.csv")
    if args.replicas == 0:
        write_manifest(out, args, {"dry_run": True}, started)
        return EXIT_OK, {"dry_run": True}
    batch = _batch(args, "simulate", args.lam, args.steps, args.replicas)
    sample = IncrementSample.from_batch(batch, args.cutoff)
    write_increments_csv(sample, out.path(".increments.csv"), overwrite=args.overwrite)
    out.files.append(str(out.path(".increments.csv")))
    out.write_csv(".replicas.csv", ["seed", "x_final", "m_final", "steps", "flagged"],
                  [(r.seed, r.x_final, r.m_final, r.steps, int(r.flagged)) for r in batch.replicas])
    extra = _batch_extra(batch, args.cutoff)
    write_manifest(out, args, extra, started)
    return EXIT_OK, {"increments": sample.size, "discard_rate": batch.discard_rate}


def _speed_rows(args, lam, steps, replicas):
    batch = _batch(args, "speed-sweep", lam, steps, replicas)
    good = batch.good()
    reg = speed_estimate(IncrementSample.from_batch(batch, args.cutoff))
    direct = direct_speed([r.x_final for r in good], steps)
    disc = (reg.estimate - direct.estimate) / math.hypot(reg.se, direct.se) if reg.se + direct.se > 0 else 0.0
    rows = [
        (args.p, lam, steps, len(good), reg.estimate, reg.se, reg.method, args.seed, disc),
        (args.p, lam, steps, len(good), direct.estimate, direct.se, direct.method, args.seed, disc),
    ]
    return rows, batch


def cmd_speed_sweep(args, started):
    grid = args.lambda_grid or ([args.lam] if args.lam is not None else [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.9, 1.2])
    steps = args.steps if args.steps is not None else 100_000
    replicas = args.replicas if args.replicas is not None else 100
    out = _output(args, "speed_sweep", ".csv")
    if replicas == 0:
        write_manifest(out, args, {"dry_run": True}, started)
        return EXIT_OK, {"dry_run": True}
    rows, failures, extra = [], [], {}
    for lam in grid:
        try:
            r, batch = _speed_rows(args, lam, steps, replicas)
            rows.extend(r)
            extra[repr(lam)] = _batch_extra(batch, args.cutoff)
        except (InsufficientSampleError, ValueError) as exc:
            rows.append((args.p, lam, steps, replicas, math.nan, math.nan, "error", args.seed, math.nan))
            failures.append({"lambda": lam, "error": str(exc)})
    out.write_csv(".csv", SWEEP_HEADER, rows)
    write_manifest(out, args, {"per_lambda": extra, "failures": failures}, started)
    return (EXIT_FAIL if failures else EXIT_OK), {"rows": len(rows), "failures": failures}


def cmd_clt(args, started):
    from .analysis import clt_suite, variance_growth

    _need(args, "lam")
    steps = args.steps if args.steps is not None else 100_000
    replicas = args.replicas if args.replicas is not None else 1000
    out = _output(args, "clt", ".json")
    levels = [max(steps // 100, 2), max(steps // 10, 2), steps]
    cps = sorted(set(levels + [steps // 2]))
    batch = _batch(args, "clt", args.lam, steps, replicas, checkpoints=cps)
    speed_batch = _batch(args, "clt", args.lam, steps, replicas, tag=_tag("clt-speed", args.lam))
    v = speed_estimate(IncrementSample.from_batch(speed_batch, args.cutoff))
    X, M = batch.at("cp_x"), batch.at("cp_m")
    ih, i1 = cps.index(steps // 2), cps.index(steps)
    cov, norm = clt_suite(X[:, ih], X[:, i1], M[:, ih], M[:, i1], steps, args.lam, v.estimate)
    growth = variance_growth([X[:, cps.index(n)] for n in levels], levels)
    lc = compute_lambda_c(args.p)
    regime = "gaussian" if args.lam < lc / 2 else "anomalous"
    ok = norm.passes(args.level) if regime == "gaussian" else growth.diverges
    report = {"regime": regime, "speed": v.to_dict(), "covariance": cov.__dict__, "normality": norm.__dict__,
              "variance_growth": {"n": levels, "scaled_var": growth.scaled_var, "se": growth.se,
                                  "diverges": growth.diverges},
              "pass": bool(ok)}
    out.write_json(".json", report)
    write_manifest(out, args, _batch_extra(batch, args.cutoff), started)
    return (EXIT_OK if ok else EXIT_FAIL), {"regime": regime, "pass": bool(ok)}


def cmd_derivative(args, started):
    from .analysis import derivative_via_covariance, finite_difference

    _need(args, "lam")
    steps = args.steps if args.steps is not None else 100_000
    replicas = args.replicas if args.replicas is not None else 10_000
    h = args.fd_step
    out = _output(args, "derivative", ".json")
    speeds = {}
    for lam in (args.lam - h, args.lam, args.lam + h):
        b = _batch(args, "derivative-speed", lam, steps, replicas)
        speeds[lam] = speed_estimate(IncrementSample.from_batch(b, args.cutoff))
    batch = _batch(args, "derivative", args.lam, steps, replicas, checkpoints=[steps])
    sig = derivative_via_covariance(batch.at("cp_x")[:, 0], batch.at("cp_m")[:, 0], steps,
                                    speeds[args.lam].estimate)
    fd = finite_difference(speeds[args.lam + h], speeds[args.lam - h], h)
    z = (sig.estimate - fd.estimate) / math.hypot(sig.se, fd.se)
    ok = abs(z) <= 3
    report = {"sigma12": sig.to_dict(), "finite_difference": fd.to_dict(), "z": z, "pass": bool(ok),
              "speeds": {repr(k): v.to_dict() for k, v in speeds.items()}}
    out.write_json(".json", report)
    write_manifest(out, args, _batch_extra(batch, args.cutoff), started)
    return (EXIT_OK if ok else EXIT_FAIL), {"sigma12": sig.estimate, "fd": fd.estimate, "z": z}


def cmd_trap_stats(args, started):
    from .analysis import (TrapChainSpec, expected_trap_return_time, moment_bounds,
                           simulate_trap_excursions, trap_return_time_exact)

    lam = args.lam if args.lam is not None else 0.5
    n = args.replicas if args.replicas is not None else 100_000
    spec = TrapChainSpec(args.depth, lam)
    out = _output(args, "trap_stats", ".json")
    closed = expected_trap_return_time(lam, args.depth)
    exact = trap_return_time_exact(spec)
    sample = simulate_trap_excursions(spec, n, replica_seed(args.seed, 0, "trap-stats")).astype(float)
    mc, se = sample.mean(), sample.std(ddof=1) / math.sqrt(n)
    moments = {}
    ok = abs(closed - exact) <= 1e-10 * closed and abs(mc - closed) <= 3 * se
    for kappa in (1.5, 2.0):
        lo, hi = moment_bounds(lam, args.depth, kappa)
        vals = sample**kappa
        emp, ese = vals.mean(), vals.std(ddof=1) / math.sqrt(n)
        inside = lo <= emp + 3 * ese and emp - 3 * ese <= hi
        ok = ok and inside
        moments[repr(kappa)] = {"lower": lo, "empirical": emp, "se": ese, "upper": hi, "inside": inside}
    report = {"closed_form": closed, "linear_solve": exact, "monte_carlo": mc, "se": se, "moments": moments,
              "pass": bool(ok)}
    out.write_json(".json", report)
    write_manifest(out, args, {}, started)
    return (EXIT_OK if ok else EXIT_FAIL), {"closed_form": closed, "monte_carlo": mc}


def cmd_tail_index(args, started):
    _need(args, "lam")
    steps = args.steps if args.steps is not None else 1_000_000
    replicas = args.replicas if args.replicas is not None else 100
    out = _output(args, "tail_index", ".json")
    batch = _batch(args, "tail-index", args.lam, steps, replicas)
    sample = IncrementSample.from_batch(batch, args.cutoff)
    hill = tail_index_hill(sample.tau_inc, args.hill_k)
    target = compute_lambda_c(args.p) / args.lam
    rel = abs(hill.estimate - target) / target
    ok = rel <= 0.25
    report = {"hill": hill.to_dict(), "target": target, "relative_error": rel, "pass": bool(ok)}
    out.write_json(".json", report)
    write_manifest(out, args, _batch_extra(batch, args.cutoff), started)
    return (EXIT_OK if ok else EXIT_FAIL), {"alpha": hill.estimate, "target": target}


def cmd_mz_check(args, started):
    _need(args, "lam")
    steps = args.steps if args.steps is not None else 100_000
    replicas = args.replicas if args.replicas is not None else 200
    out = _output(args, "mz_check", ".json")
    levels = sorted({max(steps // 100, 1), max(steps // 10, 1), steps})
    batch = _batch(args, "mz", args.lam, steps, replicas, checkpoints=levels)
    speed_batch = _batch(args, "mz", args.lam, steps, replicas, tag=_tag("mz-speed", args.lam))
    v = speed_estimate(IncrementSample.from_batch(speed_batch, args.cutoff))
    rep = mz_fluctuation_check(batch.at("cp_x"), batch.at("cp_m"), levels, args.r, v.estimate)
    threshold = min(compute_lambda_c(args.p) / args.lam, 2.0) if args.lam > 0 else 2.0
    expect_decay = args.r < threshold
    ok = rep.decays == expect_decay
    report = {"r": args.r, "threshold": threshold, "n": levels, "x_median": rep.x_median, "x_max": rep.x_max,
              "m_median": rep.m_median, "m_max": rep.m_max, "decays": rep.decays,
              "expected_decay": expect_decay, "pass": bool(ok)}
    out.write_json(".json", report)
    write_manifest(out, args, _batch_extra(batch, args.cutoff), started)
    return (EXIT_OK if ok else EXIT_FAIL), {"decays": rep.decays, "expected": expect_decay}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    started = time.time()
    try:
        args = _merge_file_config(args, parser, argv)
        _validate(args)
        code, summary = args.func(args, started)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BudgetError as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InsufficientSampleError, MemoryError) as exc:
        print(f"resource error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    print(json.dumps(summary, default=_json_default, sort_keys=True))
    return code


if __name__ == "__main__":
    sys.exit(main())
