"""Command-line front end.

Subcommands: estimate, test, bootstrap, simulate, gof.  All artifacts embed
the fully resolved configuration and seed; runs with the same seed are
byte-identical.  Exit codes: 0 ok, 2 input error, 3 estimation error,
4 config error.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import secrets
import sys

import numpy as np

from .core import MixtureSample, TimeGrid, default_grid, read_sample
from .errors import EstimationError, IsomixError, NoEvents, ValidationError
from .estimators import METHODS, EmConfig, estimate, ks_gof_statistic
from .inference import bootstrap_bands, permutation_test
from .simulation import experiment, power_study, run_replications

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_ESTIMATION = 3
EXIT_CONFIG = 4


class ConfigError(Exception):
    pass


def _add_common(p, *, method=True):
    p.add_argument("--input", required=True, help="input CSV: time,status,q1[,q2,...]")
    p.add_argument("--output", default="-", help="output path ('-' = stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    if method:
        p.add_argument("--method", choices=METHODS, default="em_pava")
        p.add_argument("--grid", default="events",
                       help="'events' or 'even:N:LO:HI'")
        p.add_argument("--max-iter", type=int, default=500)
        p.add_argument("--tol", type=float, default=1e-8)
        p.add_argument("--init", choices=("pooled-km", "uniform"),
                       default="pooled-km")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="isomix",
                                 description="Component CDF estimation from "
                                             "right-censored mixture data")
    sub = ap.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("estimate", help="fit component CDFs")
    _add_common(p)

    p = sub.add_parser("test", help="permutation test of F1 == F2")
    _add_common(p)
    p.add_argument("--perms", type=int, default=1000, metavar="K")
    p.add_argument("--restrict", default=None,
                   help="comma-separated times t1,t2,... restricting the statistic")

    p = sub.add_parser("bootstrap", help="bootstrap sd and percentile bands")
    _add_common(p)
    p.add_argument("--boot", type=int, default=200, metavar="B")
    p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("simulate", help="Monte-Carlo study from a TOML/JSON config")
    _add_common(p, method=False)

    p = sub.add_parser("gof", help="Kolmogorov-Smirnov distance to a parametric model")
    _add_common(p)
    p.add_argument("--family", required=True,
                   help="'exponential:r1,r2' or a benchmark design 'exp1|exp2|exp3'")
    return ap


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("ISOMIX_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ConfigError(f"ISOMIX_SEED={env!r} is not an integer") from exc
    return secrets.randbelow(2**31)


def _parse_grid(spec: str, sample: MixtureSample) -> TimeGrid:
    if spec == "events":
        return default_grid(sample, "events")
    if spec.startswith("even:"):
        parts = spec.split(":")
        if len(parts) != 4:
            raise ConfigError(f"bad grid spec {spec!r}; expected even:N:LO:HI")
        try:
            count, lo, hi = int(parts[1]), float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ConfigError(f"bad grid spec {spec!r}: {exc}") from exc
        try:
            return default_grid(sample, "even", count=count, lo=lo, hi=hi)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    raise ConfigError(f"unknown grid spec {spec!r}")


def _em_config(args) -> EmConfig:
    init = {"pooled-km": "pooled_km", "uniform": "uniform_linear"}[args.init]
    try:
        return EmConfig(max_iterations=args.max_iter, tolerance=args.tol,
                        initialization=init)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _resolved(args, seed: int, **extra) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k != "seed"}
    cfg["seed"] = seed
    cfg.update(extra)
    return cfg


def _emit(text: str, path: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _json_dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)!r}")


def _curves_csv(grid, values, config, extra_cols=None) -> str:
    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(config, sort_keys=True, default=_jsonable)}\n")
    cols = ["t", "component", "estimate"] + list(extra_cols or ())
    buf.write(",".join(cols) + "\n")
    for j, t in enumerate(grid.times):
        for k in range(values.shape[1]):
            row = [repr(float(t)), str(k + 1), repr(float(values[j, k]))]
            if extra_cols:
                row += [repr(float(extra_cols[name][j, k])) for name in extra_cols]
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def cmd_estimate(args) -> int:
    seed = _resolve_seed(args)
    sample = read_sample(args.input)
    grid = _parse_grid(args.grid, sample)
    rep = estimate(sample, grid, args.method, _em_config(args))
    config = _resolved(args, seed)
    manifest = {"config": config, "method": rep.method,
                "iterations": rep.iterations, "converged": rep.converged,
                "objective": rep.objective, "warnings": list(rep.warnings)}
    if (args.format or "csv") == "json":
        manifest["curves"] = {"t": grid.times, "values": rep.curves.values}
        _emit(_json_dump(manifest), args.output)
    else:
        _emit(_curves_csv(grid, rep.curves.values, config), args.output)
        if args.output != "-":
            _emit(_json_dump(manifest), args.output + ".manifest.json")
    return EXIT_OK


def cmd_test(args) -> int:
    seed = _resolve_seed(args)
    sample = read_sample(args.input)
    grid = _parse_grid(args.grid, sample)
    restrict = None
    if args.restrict:
        try:
            restrict = [float(v) for v in args.restrict.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --restrict {args.restrict!r}") from exc
    res = permutation_test(sample, grid, args.method, n_perm=args.perms,
                           restrict_to=restrict, seed=seed,
                           config=_em_config(args))
    out = {"config": _resolved(args, seed), "s0": res.s0,
           "p_value": res.p_value, "K": res.n_perm, "seed": seed}
    _emit(_json_dump(out), args.output)
    return EXIT_OK


def cmd_bootstrap(args) -> int:
    seed = _resolve_seed(args)
    sample = read_sample(args.input)
    grid = _parse_grid(args.grid, sample)
    res = bootstrap_bands(sample, grid, args.method, n_boot=args.boot,
                          level=args.level, seed=seed, config=_em_config(args))
    config = _resolved(args, seed, n_failed=res.n_failed)
    if (args.format or "csv") == "json":
        out = {"config": config, "t": grid.times, "estimate": res.curves.values,
               "sd": res.sd, "lo": res.lo, "hi": res.hi}
        _emit(_json_dump(out), args.output)
    else:
        extras = {"sd": res.sd, "lo": res.lo, "hi": res.hi}
        _emit(_curves_csv(grid, res.curves.values, config, extras), args.output)
    return EXIT_OK


def _load_sim_config(path: str) -> dict:
    with open(path, "rb") as fh:
        raw = fh.read()
    if path.endswith(".json"):
        return json.loads(raw)
    try:
        import tomllib  # Python >= 3.11
    except ModuleNotFoundError:
        import tomli as tomllib
    try:
        return tomllib.loads(raw.decode("utf-8"))
    except Exception:
        # fall back to JSON for unlabeled files
        try:
            return json.loads(raw)
        except Exception as exc:
            raise ConfigError(f"cannot parse config file {path!r}: {exc}") from exc


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    cfg = _load_sim_config(args.input)
    mode = cfg.get("mode", "metrics")
    jobs = args.jobs or cfg.get("jobs", os.cpu_count() or 1)
    try:
        exp_id = int(cfg["experiment"])
        methods = tuple(cfg.get("methods", ["em_pava"]))
        spec = experiment(exp_id, n=int(cfg.get("n", 500)),
                          censoring=float(cfg.get("censoring", 0.0)),
                          n_reps=int(cfg.get("reps", 500)), seed=seed)
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"bad simulate config: {exc}") from exc
    for m in methods:
        if m not in METHODS:
            raise ConfigError(f"unknown method {m!r} in config")
    config_out = _resolved(args, seed, sim_config=cfg)

    buf = io.StringIO()
    buf.write(f"# config: {json.dumps(config_out, sort_keys=True, default=_jsonable)}\n")
    if mode == "power":
        h0 = experiment(exp_id, n=spec.n, censoring=spec.censoring,
                        n_reps=int(cfg.get("reps_h0", spec.n_reps)),
                        seed=seed, null=True)
        res = power_study(h0, spec, methods,
                          n_perm=int(cfg.get("perms", 1000)), jobs=jobs)
        buf.write("method,arm,level,rejection_rate\n")
        for m in methods:
            for arm in ("h0", "h1"):
                for lvl, rate in res[m][arm].items():
                    buf.write(f"{m},{arm},{lvl},{rate}\n")
    elif mode == "metrics":
        report = run_replications(
            spec, methods, eval_times=tuple(cfg.get("eval_times", ())),
            boot_reps=int(cfg.get("boot", 0)),
            level=float(cfg.get("level", 0.95)), jobs=jobs)
        buf.write("method,t,component,truth,bias,emp_sd,est_sd,coverage\n")
        for m in methods:
            mm = report.methods[m]
            for j, t in enumerate(report.grid.times):
                for k in (0, 1):
                    est_sd = mm.mean_est_sd[j, k] if mm.mean_est_sd is not None else math.nan
                    cov = mm.coverage[j, k] if mm.coverage is not None else math.nan
                    buf.write(f"{m},{t!r},{k + 1},{report.truth[j, k]!r},"
                              f"{mm.bias[j, k]!r},{mm.emp_sd[j, k]!r},"
                              f"{est_sd!r},{cov!r}\n")
        buf.write("method,component,iab,avg_variance,avg_coverage,n_failed\n")
        for m in methods:
            mm = report.methods[m]
            for k in (0, 1):
                ac = mm.avg_coverage[k] if mm.avg_coverage is not None else math.nan
                buf.write(f"{m},{k + 1},{mm.iab[k]!r},{mm.avg_variance[k]!r},"
                          f"{ac!r},{mm.n_failed}\n")
    else:
        raise ConfigError(f"unknown simulate mode {mode!r}")
    _emit(buf.getvalue(), args.output)
    return EXIT_OK


def _parse_family(spec: str):
    if spec in ("exp1", "exp2", "exp3"):
        design = experiment(int(spec[-1]))
        return list(design.cdfs)
    if spec.startswith("exponential:"):
        try:
            rates = [float(v) for v in spec.split(":", 1)[1].split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --family {spec!r}") from exc
        if len(rates) != 2 or any(r <= 0 for r in rates):
            raise ConfigError("exponential family needs two positive rates r1,r2")
        return [lambda t, r=r: 1.0 - np.exp(-r * np.maximum(t, 0.0))
                for r in rates]
    raise ConfigError(f"unknown --family {spec!r}")


def cmd_gof(args) -> int:
    seed = _resolve_seed(args)
    sample = read_sample(args.input)
    grid = _parse_grid(args.grid, sample)
    cdfs = _parse_family(args.family)
    rep = estimate(sample, grid, args.method, _em_config(args))
    delta = ks_gof_statistic(rep.curves, cdfs, sample.n)
    out = {"config": _resolved(args, seed), "delta": delta, "seed": seed}
    _emit(_json_dump(out), args.output)
    return EXIT_OK


_DISPATCH = {"estimate": cmd_estimate, "test": cmd_test,
             "bootstrap": cmd_bootstrap, "simulate": cmd_simulate,
             "gof": cmd_gof}


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return _DISPATCH[args.subcommand](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, NoEvents, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (EstimationError, IsomixError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ESTIMATION


if __name__ == "__main__":
    sys.exit(main())
