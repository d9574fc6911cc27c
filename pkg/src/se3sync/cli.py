"""Command line front end.

    se3sync check-params --preset fig2
    se3sync run --preset fig2 --out out/fig2
    se3sync run --preset fig2 --disable-jumps --out out/nojumps
    se3sync montecarlo --runs 50 --seed 1 --out out/mc
    se3sync oracle gradcheck

Without ``--config`` every command uses the fig2 parameters.

Exit codes: 0 success, 1 validation error, 2 certificate violation,
3 numerical divergence, 4 oracle failure, 5 run ended without converging.
"""

import argparse
import csv
import os
import sys
import warnings

import numpy as np

from . import oracles
from . import potential as pt
from .config import fig2_config, load_config
from .errors import CertificateViolation, NumericalDivergence, OracleFailure, Se3SyncError
from .hybridsim import CONSISTENCY_TOL, run
from .montecarlo import MC_H, MC_T_END, RunSummary, montecarlo

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CERTIFICATE = 2
EXIT_DIVERGED = 3
EXIT_ORACLE = 4
EXIT_NOT_CONVERGED = 5

FLOAT = "%.17g"


def fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return FLOAT % x


def base_config(args, **overrides):
    if args.config:
        cfg = load_config(args.config)
    else:
        cfg = fig2_config()
    if getattr(args, "disable_jumps", False):
        overrides["disable_jumps"] = True
    if getattr(args, "seed", None) is not None and args.command == "run":
        overrides.update(seed=args.seed, preset=None, rotations=None)
    for name in ("t_end", "h"):
        value = getattr(args, name, None)
        if value is not None:
            overrides[name] = value
    return cfg.with_(**overrides) if overrides else cfg


def _params(cfg):
    """Weight and synergy parameters with override warnings collected."""
    w = pt.validate_weight(cfg.A, cfg.b, cfg.d)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        p = pt.synth_params(
            w, cfg.theta_set, tuple(cfg.margins), gamma=cfg.gamma, delta=cfg.delta, u_c1=cfg.u_c1
        )
    return w, p, [str(c.message) for c in caught]


def vec(x):
    return "[" + ", ".join(f"{v:.6g}" for v in x) + "]"


def cmd_check_params(args, out=None):
    out = out or sys.stdout
    cfg = base_config(args)
    w, p, warned = _params(cfg)
    print(f"W eigenvalues: {vec(w.eigvals)}", file=out)
    print(f"case: {p.case}", file=out)
    print(f"Delta_W*: {p.delta_star:.6g}", file=out)
    print(f"u_c1: {vec(p.u_c1)}", file=out)
    print(f"u_c2: {vec(p.u_c2)}", file=out)
    print(f"theta_set: {vec(p.theta_set)}", file=out)
    print(f"gamma: {p.gamma:.6g} (bound {p.gamma_bound:.6g})", file=out)
    print(f"delta: {p.delta:.6g} (bound {p.delta_bound:.6g})", file=out)
    for msg in warned:
        print(f"warning: {msg}", file=out)
    gap = oracles.gap_check(w, p)
    print("undesired critical points:", file=out)
    for line in gap.lines:
        print(f"  {line}", file=out)
    failed = pt.check_params(p)
    if not gap.ok:
        failed.append("switching gap mu_U > delta fails at a critical point")
    for msg in failed:
        print(f"violated: {msg}", file=out)
    print("strict inequalities: " + ("FAIL" if failed else "ok"), file=out)
    return EXIT_INVALID if failed else EXIT_OK


def write_trace(trace, path):
    np.savetxt(path, trace.rows, fmt=FLOAT, delimiter=",", header=",".join(trace.columns), comments="")


def write_events(trace, path):
    with open(path, "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(["t", "j", "edge", "theta_before", "theta_after", "Vbar_before", "Vbar_after", "decrease"])
        for e in trace.events:
            for k, a, b in zip(e.edges, e.theta_before, e.theta_after):
                wr.writerow([fmt(e.t), e.j, k + 1, fmt(a), fmt(b), fmt(e.Vbar_before), fmt(e.Vbar_after), fmt(e.decrease)])


def final_errors(trace):
    last = trace.rows[-1]
    col = trace.columns

    def worst(prefix):
        idx = [i for i, c in enumerate(col) if c.split("_")[0] == prefix]
        return float(np.max(np.abs(last[idx])))

    xi = last[[i for i, c in enumerate(col) if c.split("_")[0] in ("omega", "v")]].reshape(-1, 6)
    return {
        "max_rotErr": worst("rotErr"),
        "max_posErr": worst("posErr"),
        "max_abs_theta": worst("theta"),
        "max_twist_norm": float(np.max(np.linalg.norm(xi, axis=1))),
    }


def summary_lines(trace):
    lines = [
        ("status", trace.status),
        ("converged", trace.converged),
        ("t_final", trace.final_state.t),
        ("jumps", trace.jumps),
        ("jump_times", " ".join(fmt(e.t) for e in trace.events) or "-"),
        ("jump_budget", trace.budget),
        ("Vbar0", trace.Vbar0),
        ("Vbar_final", float(trace.rows[-1][trace.columns.index("Vbar")])),
    ]
    lines += list(final_errors(trace).items())
    lines += [
        ("certificates", "ok" if trace.certificates_ok else "violated"),
        ("violations", len(trace.violations)),
        ("min_jump_slack", trace.jump_slack),
        ("max_flow_increase", trace.max_flow_increase),
        ("max_consistency", trace.max_consistency),
        ("consistency_within_tol", trace.max_consistency < CONSISTENCY_TOL),
        ("wall_time_s", trace.wall_time),
    ]
    text = [f"{k} = {fmt(v) if not isinstance(v, str) else v}" for k, v in lines]
    text += [f"violation t={fmt(t)} j={j}: {msg}" for t, j, msg in trace.violations]
    return text


def gnuplot_script(trace):
    """Static gnuplot script for trace.csv; columns are addressed by index."""
    cols = trace.columns
    M = sum(c.startswith("theta_") for c in cols)

    def series(prefix):
        idx = [i + 1 for i, c in enumerate(cols) if c.split("_")[0] == prefix]
        return ", \\\n     ".join(f"'trace.csv' using 1:{i} with lines title '{cols[i - 1]}'" for i in idx)

    panels = [
        ("rotation error |I - Rbar_k|_F", "rotErr"),
        ("translation error |pbar_k| [m]", "posErr"),
        ("switching variable theta_k [rad]", "theta"),
        ("angular velocity omega_i [rad/s]", "omega"),
        ("linear velocity v_i [m/s]", "v"),
    ]
    out = [
        "# run from the directory holding trace.csv:  gnuplot -p plot.gp",
        "set datafile separator ','",
        "set key autotitle columnhead outside right",
        "set xlabel 't [s]'",
        "set multiplot layout 3,2",
    ]
    for title, prefix in panels:
        out += [f"set title '{title}'", f"plot {series(prefix)}"]
    vb = cols.index("Vbar") + 1
    out += [f"set title 'Vbar (M = {M} edges)'", "set logscale y", f"plot 'trace.csv' using 1:{vb} with lines", "unset multiplot"]
    return "\n".join(out) + "\n"


def cmd_run(args, out=None):
    out = out or sys.stdout
    cfg = base_config(args)
    trace = run(cfg)
    os.makedirs(args.out, exist_ok=True)
    write_trace(trace, os.path.join(args.out, "trace.csv"))
    write_events(trace, os.path.join(args.out, "events.csv"))
    with open(os.path.join(args.out, "plot.gp"), "w") as f:
        f.write(gnuplot_script(trace))
    text = summary_lines(trace)
    with open(os.path.join(args.out, "summary.txt"), "w") as f:
        f.write("\n".join(text) + "\n")
    print("\n".join(text), file=out)
    if not trace.certificates_ok:
        return EXIT_CERTIFICATE
    return EXIT_OK if trace.converged else EXIT_NOT_CONVERGED


def cmd_montecarlo(args, out=None):
    out = out or sys.stdout
    # a config file keeps its own integrator settings
    overrides = {} if args.config else {"t_end": MC_T_END, "h": MC_H}
    if args.box is not None:
        overrides["box"] = args.box
    if args.identity_rotations:
        overrides["random_rotations"] = False
    cfg = base_config(args, **overrides)
    rows, agg = montecarlo(cfg, args.runs, seed=args.seed or 0, workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "runs.csv"), "w", newline="") as f:
        wr = csv.writer(f)
        wr.writerow(RunSummary._fields)
        for r in rows:
            wr.writerow([v if isinstance(v, str) else fmt(v) for v in r])
    text = [
        f"runs = {agg.runs}",
        f"converged = {agg.converged}",
        f"convergence_rate = {fmt(agg.rate)}",
        f"max_jumps = {agg.max_jumps}",
        f"all_within_budget = {fmt(agg.within_budget)}",
        f"min_jump_slack = {fmt(agg.min_jump_slack)}",
        f"max_flow_increase = {fmt(agg.max_flow_increase)}",
        f"violations = {agg.violations}",
    ]
    with open(os.path.join(args.out, "summary.txt"), "w") as f:
        f.write("\n".join(text) + "\n")
    print("\n".join(text + [f"wall_time_s = {agg.wall_time:.1f}"]), file=out)
    if agg.violations or not agg.within_budget:
        return EXIT_CERTIFICATE
    return EXIT_OK if agg.converged == agg.runs else EXIT_NOT_CONVERGED


def cmd_oracle(args, out=None):
    out = out or sys.stdout
    cfg = base_config(args)
    w, p, _ = _params(cfg)
    rng = np.random.default_rng(args.seed or 0)
    if args.which == "gradcheck":
        rep = oracles.gradcheck(w, p, rng, samples=args.samples or 500)
    elif args.which == "rank":
        rep = oracles.rank_check(rng, samples=args.samples or 50)
    elif args.which == "gap":
        rep = oracles.gap_check(w, p)
    else:
        rep = oracles.exp_check(w, p, rng, samples=args.samples or 200)
    print(rep.text(), file=out)
    rep.require()
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML experiment file")
    common.add_argument("--preset", choices=["fig2"], help="built-in experiment (default)")
    common.add_argument("--seed", type=int, help="RNG seed")

    parser = argparse.ArgumentParser(prog="se3sync", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("check-params", parents=[common], help="report synthesized synergy parameters")

    p_run = sub.add_parser("run", parents=[common], help="simulate one experiment")
    p_run.add_argument("--disable-jumps", action="store_true", help="flow only (diagnostic)")
    p_run.add_argument("--out", default="out", metavar="DIR")
    p_run.add_argument("--t-end", dest="t_end", type=float)
    p_run.add_argument("--h", type=float, help="RK4 step [s]")

    p_mc = sub.add_parser("montecarlo", parents=[common], help="random initializations")
    p_mc.add_argument("--runs", type=int, default=50)
    p_mc.add_argument("--out", default="out_mc", metavar="DIR")
    p_mc.add_argument("--t-end", dest="t_end", type=float)
    p_mc.add_argument("--h", type=float, help=f"RK4 step [s] (default {MC_H:g})")
    p_mc.add_argument("--box", type=float, help="half width of the position box [m]")
    p_mc.add_argument("--identity-rotations", action="store_true")
    p_mc.add_argument("--disable-jumps", action="store_true")
    p_mc.add_argument("--workers", type=int, help="worker processes (default: CPU count)")

    p_or = sub.add_parser("oracle", parents=[common], help="run a numerical oracle")
    p_or.add_argument("which", choices=["gradcheck", "rank", "gap", "exp"])
    p_or.add_argument("--samples", type=int)
    return parser


COMMANDS = {
    "check-params": cmd_check_params,
    "run": cmd_run,
    "montecarlo": cmd_montecarlo,
    "oracle": cmd_oracle,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except CertificateViolation as exc:
        print(f"certificate violation: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATE
    except NumericalDivergence as exc:
        print(f"numerical divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OracleFailure as exc:
        print(f"oracle failure: {exc}", file=sys.stderr)
        return EXIT_ORACLE
    except (Se3SyncError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
