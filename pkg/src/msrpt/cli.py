"""Command-line entry point: generate | simulate | verify | sweep | bounds | plot.

Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 a verified
bound was violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__, verify
from .analysis import bounds
from .analysis.audits import REPORT_FIELDS
from .core_model import InstanceError
from .distributions import DistributionError, parse_distribution, parse_kv
from .plotting import SchemaError, emit_plot_data
from .schedulers import PolicyError, PolicyKind, parse_policy
from .sim_engine import SimulationError, mean_flow, run, write_jobs_csv, write_trace_csv
from .sweep import ConfigError, ExperimentConfig, run_sweep, write_csv
from .workload_gen import lam_for_rho, load_instance, parse_split, rho_of_y, sample_instance, save_instance

log = logging.getLogger("msrpt")

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_VIOLATION = 0, 1, 2, 3
VALIDATION_ERRORS = (ConfigError, DistributionError, InstanceError, PolicyError, SchemaError,
                     bounds.BoundDomainError, ValueError, FileNotFoundError, KeyError)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [int(t) for t in text.split(",") if t.strip()]


# --- subcommands -----------------------------------------------------------------


def cmd_generate(args) -> int:
    dist = parse_distribution(args.dist)
    split = parse_split(args.split, args.np_frac, args.eta_cap)
    if (args.lam is None) == (args.rho is None):
        raise ConfigError("give exactly one of --lam or --rho")
    lam = args.lam if args.lam is not None else lam_for_rho(dist, args.rho, args.machines)
    inst = sample_instance(dist, split, lam, args.jobs, args.machines, args.seed, args.parallel_tasks)
    path = Path(args.output) if args.output else Path(args.out_dir) / "instance.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    save_instance(inst, path)
    print(path)
    return EXIT_OK


def cmd_simulate(args) -> int:
    inst = load_instance(args.instance)
    policy = parse_policy(args.policy)
    if policy.kind is PolicyKind.BRUTE_OPT:
        from .oracle import brute_force_optimal

        res = brute_force_optimal(inst)
        print(f"total_flow {res.total_flow!r}")
        return EXIT_OK
    trace = run(inst, policy, _floats(args.y_grid) if args.y_grid else (), check=not args.no_check, record=not args.no_trace)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jobs_csv(trace, out / "jobs.csv")
    if not args.no_trace:
        write_trace_csv(trace, out / "trace.csv")
    print(f"mean_flow {mean_flow(trace)!r}")
    return EXIT_OK


def cmd_verify(args) -> int:
    kw = dict(seed=args.seed, threads=args.threads)
    if args.instances is not None:
        kw["instances"] = args.instances
    if args.max_jobs is not None:
        kw["max_jobs"] = args.max_jobs
    if args.jobs is not None:
        kw["jobs"] = args.jobs
    if args.reps is not None:
        kw["reps"] = args.reps
    if args.rho is not None:
        kw["rhos"] = _floats(args.rho)
    if args.machine_counts is not None:
        kw["machine_counts"] = tuple(_ints(args.machine_counts))
    reports = verify.SUITES[args.suite](**kw)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"verify_{args.suite}.csv"
    write_csv(path, REPORT_FIELDS, [r.row() for r in reports])
    bad = [r for r in reports if r.satisfied is False]
    print(f"{args.suite}: {len(reports)} reports, {len(bad)} violations -> {path}")
    for r in bad[:10]:
        print(f"  VIOLATION {r.name} {r.inputs} observed={r.observed_value!r} bound={r.bound_value!r}")
    return EXIT_VIOLATION if bad else EXIT_OK


def cmd_sweep(args) -> int:
    if args.config_doc is None:
        raise ConfigError("sweep needs --config <experiment.json>")
    doc = dict(args.config_doc)
    # global flags fill in what the config leaves out
    doc.setdefault("seed", args.seed)
    doc.setdefault("threads", args.threads)
    doc.setdefault("out_dir", args.out_dir)
    cfg = ExperimentConfig.from_dict(doc)
    res = run_sweep(cfg)
    print(f"{len(res.rows)} rows, {res.n_failed} failed -> {res.paths['results'].parent}")
    return EXIT_RUNTIME if res.n_failed else EXIT_OK


def _bound_value(name: str, p: dict[str, str]):
    def num(k, default=None):
        if k not in p:
            if default is None:
                raise ConfigError(f"formula {name!r} needs parameter {k!r}")
            return default
        return float(p[k])

    def dist():
        if "dist" not in p:
            raise ConfigError(f"formula {name!r} needs parameter 'dist'")
        return parse_distribution(p["dist"].replace(";", ","))

    if name == "cr":
        return bounds.cr_upper_bound(num("alpha"), num("beta"))
    if name == "busy-period":
        return bounds.busy_period_mean(num("w"), num("rho"))
    if name == "mm1-srpt":
        return bounds.mm1_srpt_bounds(num("mu", 1.0), num("rho"))
    if name == "srpt-growth":
        return bounds.srpt_growth(dist(), num("rho"))
    if name == "exp-max":
        n = num("n")
        if n != int(n):
            raise bounds.BoundDomainError(f"n must be an integer (got {n!r})")
        return bounds.exp_max_expectation(int(n), num("mu", 1.0))
    if name == "psjf-workload":
        return bounds.psjf_workload_form(dist(), num("lam"), num("x"))
    if name == "eta-mgf":
        return bounds.eta_mgf_bound(num("n"), dist().mgf)
    if name == "rho-of-y":
        return rho_of_y(dist(), num("lam"), num("y"))
    if name == "srpt-mg1":
        return bounds.srpt_mg1_mean_response(dist(), num("lam"))
    raise ConfigError(f"unknown formula {name!r} (choose from {', '.join(FORMULAS)})")


FORMULAS = ["cr", "busy-period", "mm1-srpt", "srpt-growth", "exp-max", "psjf-workload", "eta-mgf", "rho-of-y", "srpt-mg1"]


def _split_params(text: str) -> dict[str, str]:
    # dist=uniform:a=1;b=2 keeps the nested spec's commas out of the way
    return parse_kv(text) if text else {}


def cmd_bounds(args) -> int:
    v = _bound_value(args.formula, _split_params(args.params))
    if isinstance(v, tuple):
        print(" ".join(repr(float(x)) for x in v))
    else:
        print(repr(float(v)))
    return EXIT_OK


def cmd_plot(args) -> int:
    paths = emit_plot_data(args.summary, args.out_dir, args.ratio)
    print(" ".join(str(p) for k, p in paths.items() if not k.endswith("_svg")))
    return EXIT_OK


# --- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    def globals_parser(suppress: bool) -> argparse.ArgumentParser:
        # subcommands repeat the global flags with suppressed defaults so
        # that "msrpt --seed 5 sweep" and "msrpt sweep --seed 5" agree
        d = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
        gp = argparse.ArgumentParser(add_help=False)
        gp.add_argument("--seed", type=int, default=d(0), help="base random seed")
        gp.add_argument("--threads", type=int, default=d(1), help="concurrent replications")
        gp.add_argument("--out-dir", default=d("out"), help="output directory")
        gp.add_argument("--config", default=d(None), help="JSON file; its keys override command-line flags")
        return gp

    common = globals_parser(True)

    ap = argparse.ArgumentParser(prog="msrpt", description=__doc__.splitlines()[0], parents=[globals_parser(False)])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="sample an M/GI/N instance to JSON")
    g.add_argument("--dist", default="exp:mu=1", help="size distribution, e.g. exp:mu=1, uniform:a=1,b=2, pareto:xmin=1,alpha=4")
    g.add_argument("--split", default="single", help="single | fixed:k=<int> | geom:q=<p>")
    g.add_argument("--np-frac", type=float, default=0.0, help="fraction of non-preemptive tasks")
    g.add_argument("--eta-cap", type=float, default=None, help="cap on non-preemptive task size")
    g.add_argument("--lam", "--lambda", dest="lam", type=float, default=None, help="arrival rate")
    g.add_argument("--rho", type=float, default=None, help="load per machine (alternative to --lam)")
    g.add_argument("--jobs", type=int, default=1000)
    g.add_argument("--machines", type=int, default=1)
    g.add_argument("--parallel-tasks", action="store_true", help="allow a job's tasks to run in parallel")
    g.add_argument("-o", "--output", "--out", dest="output", help="instance path (default <out-dir>/instance.json)")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", parents=[common], help="run a policy on an instance file")
    s.add_argument("--instance", required=True)
    s.add_argument("--policy", default="m-srpt", help="m-srpt | m-chi-srpt:<chi> | srpt1n | psjf1n | fcfs | brute")
    s.add_argument("--y-grid", default="", help="comma-separated y values for W_<=y columns")
    s.add_argument("--no-trace", action="store_true", help="only write per-job results")
    s.add_argument("--no-check", action="store_true", help="skip per-decision invariant checks")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", parents=[common], help="run a verification suite")
    v.add_argument("--suite", required=True, choices=sorted(verify.SUITES))
    v.add_argument("--instances", type=int, default=None, help="corpus size (lemma-workload, charging)")
    v.add_argument("--max-jobs", type=int, default=None, help="jobs per instance (corpus) or per sweep instance (cr-sweep)")
    v.add_argument("--jobs", type=int, default=None, help="jobs per simulation (busy, psjf, heavy-traffic)")
    v.add_argument("--reps", type=int, default=None, help="replications (psjf, heavy-traffic)")
    v.add_argument("--rho", default=None, help="comma-separated loads (busy, heavy-traffic)")
    v.add_argument("--machine-counts", default=None, help="comma-separated N values (cr-sweep)")
    v.set_defaults(func=cmd_verify)

    w = sub.add_parser("sweep", parents=[common], help="run an experiment config")
    w.set_defaults(func=cmd_sweep)

    b = sub.add_parser("bounds", parents=[common], help="evaluate one closed-form expression")
    b.add_argument("--formula", required=True, choices=FORMULAS)
    b.add_argument("--params", default="", help="k=v,... ; nested distribution specs use ';' (dist=uniform:a=1;b=2)")
    b.set_defaults(func=cmd_bounds)

    p = sub.add_parser("plot", parents=[common], help="plot-ready CSV and SVG files from a summary CSV")
    p.add_argument("--summary", required=True)
    p.add_argument("--ratio", default=None, help="ratio CSV (default: ratio.csv next to the summary)")
    p.set_defaults(func=cmd_plot)
    return ap


def _apply_config(args, parser) -> None:
    args.config_doc = None
    if not args.config:
        return
    try:
        doc = json.loads(Path(args.config).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {args.config} not found") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{args.config}: invalid JSON ({e})") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    args.config_doc = doc
    if args.command == "sweep":
        return
    for k, val in doc.items():
        dest = k.replace("-", "_")
        if not hasattr(args, dest) or dest in ("func", "command", "config"):
            raise ConfigError(f"config key {k!r} is not an option of '{args.command}'")
        setattr(args, dest, val)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        _apply_config(args, parser)
        return args.func(args)
    except SimulationError as e:
        print(f"error: simulation failed: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    except VALIDATION_ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001 - anything else is a runtime failure
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
