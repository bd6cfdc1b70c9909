"""Command line interface: ``fraglm {simulate,fit,benchmark,reconstruct}``.

Exit codes: 0 success, 2 invalid input, 3 numeric failure, 4 insufficient data.
"""

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import io
from .exceptions import ConfigurationError, FragLMError, InvalidArgumentError
from .nme import reconstruct_curve
from .simulation import (
    METHODS,
    FitOptions,
    ScenarioConfig,
    expected_missing_length,
    fit_method,
    generate,
    integrated_squared_error,
    run_monte_carlo,
)

log = logging.getLogger("fraglm")

FIT_KEYS = tuple(f.name for f in dataclasses.fields(FitOptions))
SCENARIO_KEYS = tuple(f.name for f in dataclasses.fields(ScenarioConfig))

# replications used by --fast, per scenario
FAST_REPS = {1: 200, 2: 50}
FULL_REPS = {1: 1000, 2: 100}
DEFAULT_SETTINGS = ((1.5, 0.2), (1.5, 0.4))
DEFAULT_NS = (50, 100, 200)


def _csv_list(text, cast=str):
    try:
        return [cast(v.strip()) for v in text.split(",") if v.strip()]
    except ValueError as err:
        raise InvalidArgumentError(f"cannot parse list {text!r}: {err}") from None


def _settings(text):
    out = []
    for item in _csv_list(text):
        try:
            a1, a2 = (float(v) for v in item.split(":"))
        except ValueError:
            raise InvalidArgumentError(f"settings look like 1.5:0.2,1.5:0.4; got {item!r}") from None
        out.append((a1, a2))
    return out


def _fit_options(args):
    """FitOptions from the config file, then overridden by explicit flags."""
    values = {}
    if getattr(args, "config", None):
        raw = io.load_config(args.config, FIT_KEYS + SCENARIO_KEYS)
        values = {k: v for k, v in raw.items() if k in FIT_KEYS}
    for key in FIT_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if isinstance(values.get("rho"), str) and values["rho"] != "auto":
        try:
            values["rho"] = float(values["rho"])
        except ValueError:
            raise ConfigurationError(f"rho must be a number or 'auto', got {values['rho']!r}") from None
    if values.get("rho_grid") is not None:
        grid = values["rho_grid"]
        values["rho_grid"] = tuple(_csv_list(grid, float) if isinstance(grid, str) else grid)
    try:
        options = FitOptions(**values)
        options.ridge()
    except TypeError as err:
        raise ConfigurationError(str(err)) from None
    return options


def _scenario_values(args):
    values = {}
    if getattr(args, "config", None):
        raw = io.load_config(args.config, FIT_KEYS + SCENARIO_KEYS)
        values = {k: v for k, v in raw.items() if k in SCENARIO_KEYS}
    return values


def _add_fit_flags(p):
    p.add_argument("--config", help="flat YAML file of option: value pairs")
    p.add_argument("--fve", dest="fve_threshold", type=float, help="FVE threshold (default 0.95)")
    p.add_argument("--n-components", type=int, help="fix m instead of using the FVE rule")
    p.add_argument("--rho", help="ridge parameter for NME, or 'auto' (GCV)")
    p.add_argument("--kernel", help="smoothing kernel for WME/IN")
    p.add_argument("--h-mu", type=float, help="mean bandwidth for WME/IN")
    p.add_argument("--h-c", type=float, help="covariance bandwidth for WME/IN")


def cmd_simulate(args):
    values = _scenario_values(args)
    for key in ("scenario", "n", "a1", "a2", "seed", "grid_points", "noise_sd_obs", "noise_sd_model"):
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    values["replications"] = max(1, args.replication + 1)
    config = ScenarioConfig(**values)
    data, truth = generate(config, args.replication)
    extra = dict(
        scenario=dataclasses.asdict(config),
        replication=args.replication,
        truth=dict(
            gamma=truth.gamma_true,
            gamma_coefficients=truth.gamma_coefficients,
            eigenvalues=truth.eigenvalues_true,
        ),
    )
    io.write_dataset(data, args.out, extra)
    log.info("wrote %d curves (%d incomplete) to %s", data.n, int((~data.complete).sum()), args.out)
    return 0


def _diagnostics(fit):
    diag = {}
    d = fit.diagnostics
    if "rho" in d:
        diag["rho"] = d["rho"]
        diag["warnings"] = list(d.get("warnings", []))
    if "noise" in d:
        noise = d["noise"]
        diag["noise"] = dict(
            sigma2=noise.sigma2,
            raw_sigma2=noise.raw_sigma2,
            interval=list(noise.interval),
            diag_estimate=noise.diag_estimate,
            offdiag_diagonal=noise.offdiag_diagonal,
        )
        b = d["bandwidths"]
        diag["bandwidths"] = dict(h_mu=b.h_mu, h_c=b.h_c, mode=b.mode.value)
        diag["kernel"] = d["smoothed"].kernel.value
    if "n_complete" in d:
        diag["n_complete"] = d["n_complete"]
    return diag


def cmd_fit(args):
    options = _fit_options(args)
    data = io.read_dataset(args.data)
    start = time.perf_counter()
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = fit_method(args.method, data, options)
    elapsed = time.perf_counter() - start
    est = fit.estimate
    result = dict(
        method=args.method,
        m=est.m,
        coefficients=est.coefficients,
        intercept=est.intercept,
        grid=dict(t_min=data.grid.t_min, t_max=data.grid.t_max, points=data.grid.points),
        gamma=est.gamma,
        eigenvalues=fit.system.eigenvalues,
        options=dataclasses.asdict(options),
        diagnostics=_diagnostics(fit),
        timings=dict(fit_seconds=elapsed),
    )
    truth = io.read_sidecar(args.data).get("truth", {})
    if "gamma" in truth and len(truth["gamma"]) == data.grid.size:
        result["ise"] = float(integrated_squared_error(est.gamma, np.asarray(truth["gamma"]), data.grid))
    Path(args.out).write_text(json.dumps(io.to_jsonable(result), indent=2))
    if args.dump_eigen:
        io.write_eigensystem(fit.system, args.dump_eigen)
    log.info("%s: m=%d, fit in %.3fs", args.method, est.m, elapsed)
    return 0


def cmd_benchmark(args):
    options = _fit_options(args)
    base = _scenario_values(args)
    scenario = args.scenario if args.scenario is not None else int(base.get("scenario", 1))
    if scenario not in (1, 2):
        raise InvalidArgumentError(f"scenario must be 1 or 2, got {scenario}")
    methods = _csv_list(args.methods.lower())
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise InvalidArgumentError(f"unknown methods {unknown}; choose from {', '.join(METHODS)}")
    reps = args.reps or (FAST_REPS if args.fast else FULL_REPS)[scenario]
    ns = _csv_list(args.n, int) if args.n else list(DEFAULT_NS)
    settings = _settings(args.settings) if args.settings else list(DEFAULT_SETTINGS)
    base.update(scenario=scenario, replications=reps)
    if args.seed is not None:
        base["seed"] = args.seed

    table = {}
    details = []
    for a1, a2 in settings:
        for n in ns:
            config = ScenarioConfig(**dict(base, n=n, a1=a1, a2=a2))
            for res in run_monte_carlo(config, methods, options, args.workers):
                table[(res.method, a1, a2, n)] = res
                details.append(
                    dict(
                        method=res.method,
                        a1=a1,
                        a2=a2,
                        n=n,
                        mise=res.mise,
                        excluded=res.excluded,
                        warnings=list(res.warnings),
                        wall_time=res.wall_time,
                        per_rep_ise=list(res.per_rep_ise),
                    )
                )
                log.info("%s n=%d (%.2g, %.2g): MISE %.4f", res.method, n, a1, a2, res.mise)

    out = Path(args.out)
    with out.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "a1", "a2", "missing_length"] + [f"n={n}" for n in ns] + ["excluded"])
        for method in methods:
            for a1, a2 in settings:
                cells = [table[(method, a1, a2, n)] for n in ns]
                writer.writerow(
                    [method, a1, a2, f"{expected_missing_length(a1, a2):.4f}"]
                    + [f"{c.mise:.4f}" for c in cells]
                    + [sum(c.excluded for c in cells)]
                )
    meta = dict(scenario=scenario, replications=reps, seed=base.get("seed", 0), options=dataclasses.asdict(options), cells=details)
    out.with_suffix(".json").write_text(json.dumps(io.to_jsonable(meta), indent=2))
    return 0


def cmd_reconstruct(args):
    options = _fit_options(args)
    data = io.read_dataset(args.data)
    curves = _csv_list(args.curves, int)
    bad = [c for c in curves if not 0 <= c < data.n]
    if bad:
        raise InvalidArgumentError(f"curve indices {bad} outside [0, {data.n - 1}]")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        fit = fit_method("nme", data, options)
    m = fit.estimate.m
    recon = reconstruct_curve(fit.system, fit.scores[curves], m)
    with Path(args.out).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["curve", "t", "observed", "reconstructed"])
        for row, i in enumerate(curves):
            for k, t in enumerate(data.grid.points):
                writer.writerow([i, repr(float(t)), io._fmt(data.values[i, k]), repr(float(recon[row, k]))])
    return 0


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser = argparse.ArgumentParser(prog="fraglm", description=__doc__.splitlines()[0], parents=[common])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="write one simulated dataset")
    p.add_argument("--scenario", type=int, choices=(1, 2))
    p.add_argument("--n", type=int)
    p.add_argument("--a1", type=float)
    p.add_argument("--a2", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--grid-points", type=int)
    p.add_argument("--noise-sd-obs", type=float)
    p.add_argument("--noise-sd-model", type=float)
    p.add_argument("--replication", type=int, default=0, help="replication index (sub-seed)")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common], help="fit one method to a dataset CSV")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--dump-eigen", help="also write the eigensystem to this CSV")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("benchmark", parents=[common], help="Monte Carlo MISE table")
    p.add_argument("--scenario", type=int, choices=(1, 2))
    p.add_argument("--methods", default="ori,nme,sub")
    p.add_argument("--reps", type=int)
    p.add_argument("--fast", action="store_true", help="200 (scenario 1) / 50 (scenario 2) reps")
    p.add_argument("--seed", type=int)
    p.add_argument("--n", help="comma separated sample sizes (default 50,100,200)")
    p.add_argument("--settings", help="comma separated a1:a2 pairs (default 1.5:0.2,1.5:0.4)")
    p.add_argument("--workers", type=int, help="worker processes (default FRAGLM_THREADS or all cores)")
    p.add_argument("--out", required=True)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("reconstruct", parents=[common], help="NME reconstructions of selected curves")
    p.add_argument("--data", required=True)
    p.add_argument("--curves", required=True, help="comma separated 0-based row indices")
    p.add_argument("--out", required=True)
    _add_fit_flags(p)
    p.set_defaults(func=cmd_reconstruct)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except FragLMError as err:
        print(f"fraglm: error: {err}", file=sys.stderr)
        return err.exit_code if err.exit_code in (2, 3, 4) else 3
    except (OSError, ValueError, TypeError) as err:
        print(f"fraglm: error: {err}", file=sys.stderr)
        return 2
    except (ArithmeticError, np.linalg.LinAlgError) as err:
        print(f"fraglm: numeric failure: {err}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
