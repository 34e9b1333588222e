"""Command line front end: config files, experiments, CSV output and run manifests.

Config files are line-oriented; keys may repeat, which is why they are not
read with configparser::

    [lambda]
    atom = 0.0, 1.0                # location, mass (one line per atom)
    beta_density = 1.0, 2.5, 2.0   # c, a, b of c z^(a-1) (1-z)^(b-1)

    [mu]
    atom = 0.4, 0.3
    beta_density = 0.5, 1.0, 3.0
    beta_side = -1                 # put the Beta part on (-1, 0)

    [nu]

    [theta]
    theta_a = 0.5
    theta_A = 0.5

    [selection]
    kappa = 3
    beta_l = 3, 0.75               # l, rate
    p = 3, 1, 1.0                  # l, i, p_i^(l); unset entries default to i/l

Every section is optional; a missing one means a zero measure, no
mutation or neutral selection.  Text after ``#`` is a comment.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
import time

import numpy as np

from . import __version__
from .model_config import ModelConfig, SelectionRepr, make_config, validate

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class ConfigError(ValueError):
    pass


# ---------------------------------------------------------------------------
# config files

_KEYS = {
    "lambda": {"atom", "beta_density"},
    "mu": {"atom", "beta_density", "beta_side"},
    "nu": {"atom", "beta_density", "beta_side"},
    "theta": {"theta_a", "theta_A"},
    "selection": {"kappa", "beta_l", "p"},
}
_ARITY = {"atom": 2, "beta_density": 3, "beta_side": 1, "theta_a": 1, "theta_A": 1,
          "kappa": 1, "beta_l": 2, "p": 3}


def _read_entries(text, path):
    """[(section, key, numbers, line)] after syntax checks."""
    out, sec, seen = [], None, set()
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            sec = line[1:-1].strip().lower()
            if sec not in _KEYS:
                raise ConfigError(f"{path}: line {no}: unknown section [{sec}]")
            if sec in seen:
                raise ConfigError(f"{path}: line {no}: section [{sec}] appears twice")
            seen.add(sec)
            continue
        if "=" not in line:
            raise ConfigError(f"{path}: line {no}: expected key = value")
        key, val = (t.strip() for t in line.split("=", 1))
        if sec is None:
            raise ConfigError(f"{path}: line {no}: key {key!r} outside a section")
        if key not in _KEYS[sec]:
            raise ConfigError(f"{path}: line {no}: unknown key {key!r} in [{sec}]")
        try:
            nums = [float(v) for v in val.split(",")]
        except ValueError:
            raise ConfigError(f"{path}: line {no}: {key} expects numbers, got {val!r}") from None
        if len(nums) != _ARITY[key]:
            raise ConfigError(f"{path}: line {no}: {key} expects {_ARITY[key]} value(s), got {len(nums)}")
        out.append((sec, key, nums, no))
    return out


def _single(entries, sec, key, path):
    hits = [e for e in entries if e[0] == sec and e[1] == key]
    if len(hits) > 1:
        raise ConfigError(f"{path}: line {hits[1][3]}: {key} given twice in [{sec}]")
    return hits[0] if hits else None


def parse_config(path) -> ModelConfig:
    """Read and validate a config file.  Syntax errors and every violated
    invariant are reported with their line numbers in a ConfigError."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    entries = _read_entries(text, path)
    where = {}   # (section, tag) -> line, used to place validation messages

    def measure(sec):
        atoms = []
        for _, key, nums, no in entries:
            if _ == sec and key == "atom":
                atoms.append(tuple(nums))
                where.setdefault((sec, "atom"), no)
        entry = {"atoms": atoms}
        b = _single(entries, sec, "beta_density", path)
        if b:
            entry["beta"] = tuple(b[2])
            where[(sec, "beta")] = b[3]
        side = _single(entries, sec, "beta_side", path)
        if side:
            entry["side"] = int(side[2][0])
            where[(sec, "beta")] = side[3]
        return entry

    meas = {sec: measure(sec) for sec in ("lambda", "mu", "nu")}
    theta = []
    for key in ("theta_a", "theta_A"):
        e = _single(entries, "theta", key, path)
        theta.append(e[2][0] if e else 0.0)
        if e:
            where[("theta", key)] = e[3]
    k = _single(entries, "selection", "kappa", path)
    kappa = int(k[2][0]) if k else 2
    beta, p = {}, {}
    for sec, key, nums, no in entries:
        if sec != "selection" or key == "kappa":
            continue
        l = int(nums[0])
        if key == "beta_l":
            if not 2 <= l <= kappa:
                raise ConfigError(f"{path}: line {no}: beta_l needs 2 <= l <= kappa = {kappa}")
            beta[l] = nums[1]
            where[("selection", f"beta_{l}")] = no
        else:
            i = int(nums[1])
            if not (2 <= l <= kappa and 0 <= i <= l):
                raise ConfigError(f"{path}: line {no}: p needs 2 <= l <= kappa and 0 <= i <= l")
            p[(l, i)] = nums[2]
            where[("selection", f"p_{i}^({l})")] = no
    cfg = make_config(meas["lambda"], meas["mu"], meas["nu"], theta,
                      SelectionRepr.make(kappa, beta, p))
    errs = validate(cfg)
    if errs:
        msgs = [f"line {_violation_line(e, where, k[3] if k else None)}: {e}" for e in errs]
        raise ConfigError(f"{path}: invalid config\n  " + "\n  ".join(msgs))
    return cfg


def _violation_line(msg, where, kappa_line):

    m = re.match(r"selection: p_0 must be 0 \(l=(\d+)\)", msg)
    if m:
        return where.get(("selection", f"p_0^({m[1]})"), "?")
    m = re.match(r"selection: p_l must be 1 \(l=(\d+)\)", msg)
    if m:
        return where.get(("selection", f"p_{m[1]}^({m[1]})"), "?")
    m = re.match(r"selection: (p_\d+\^\(\d+\)|beta_\d+)", msg)
    if m:
        return where.get(("selection", m[1]), "?")
    if msg.startswith("selection"):
        return kappa_line or "?"
    m = re.match(r"(theta_a|theta_A)", msg)
    if m:
        return where.get(("theta", m[1]), "?")
    m = re.match(r"(lambda|mu|nu)\b", msg)
    if m:
        tag = "beta" if "beta" in msg else "atom"
        return where.get((m[1], tag), where.get((m[1], "atom"), "?"))
    return "?"


# ---------------------------------------------------------------------------
# output helpers

def _grid(text, name):
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"--{name}: expected a comma list of numbers")
    if not vals:
        raise argparse.ArgumentTypeError(f"--{name}: empty grid")
    return vals


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def emit_plotdata(report, path):
    """Tidy CSV series,t,value: one empirical series per (metric, x) and one
    bound series per metric."""
    rows = getattr(report, "rows", None)
    if not rows:
        raise ValueError("empty report")
    series = {}
    for r in rows:
        series.setdefault((f"{r.metric}_empirical_x={r.x!r}", r.t), r.empirical)
        series.setdefault((f"{r.metric}_bound", r.t), r.bound)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("series,t,value\n")
        for (name, t), v in series.items():
            fh.write(f"{name},{t!r},{v!r}\n")
    return path


def _write_manifest(args, cfg_hash, seed, outputs, wall):
    flags = {k: v for k, v in vars(args).items() if k not in ("func",)}
    man = {
        "config_hash": cfg_hash,
        "subcommand": args.command,
        "flags": flags,
        "seed": seed,
        "version": __version__,
        "outputs": {os.path.basename(p): _sha256(p) for p in outputs},
        "wall_time_s": round(wall, 3),
    }
    path = os.path.join(args.out, "manifest.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(man, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return man


def _scheme(args):
    from ._engine import Scheme
    return Scheme(args.dt, args.eps_trunc)


# ---------------------------------------------------------------------------
# subcommands; each returns (list of written files, exit code)

def _cmd_simulate(args, cfg, seed):
    from .forward_sim import sample_law, write_endpoints
    xs = args.x_grid or [0.5]
    ts = sorted(set(args.t_grid or [1.0]))
    X = sample_law(cfg, xs, ts, args.traj, seed, _scheme(args))
    paths = []
    for k, x in enumerate(xs):
        for q, t in enumerate(ts):
            path = os.path.join(args.out, f"endpoints_x{k}_t{q}.csv")
            write_endpoints(X[:, k, q], path, cfg, t, seed, x)
            paths.append(path)
    return paths, EXIT_OK


def _cmd_siegmund(args, cfg, seed):
    from .siegmund_sim import AbsorptionStats, absorption_stats
    ys = args.x_grid or [0.5]
    ts = sorted(set(args.t_grid or [1.0]))
    path = os.path.join(args.out, "absorption.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("y0," + AbsorptionStats.CSV_HEADER + "\n")
        for y in ys:
            for t in ts:
                st = absorption_stats(cfg, y, t, args.a, args.traj, seed, _scheme(args))
                fh.write(f"{y!r}," + st.csv_row() + "\n")
    return [path], EXIT_OK


def _cmd_asg(args, cfg, seed):
    from .asg_dual import coeff_process, simulate_asg
    ts = sorted(set(args.t_grid or [1.0]))
    ev_path = os.path.join(args.out, "asg_events.csv")
    co_path = os.path.join(args.out, "asg_coeffs.csv")
    v0 = np.zeros(args.n + 1)
    v0[args.n] = 1.0
    with open(ev_path, "w", encoding="utf-8", newline="") as fe, \
            open(co_path, "w", encoding="utf-8", newline="") as fc:
        fe.write("graph,time,kind,args\n")
        fc.write("graph,t,dim,i,value\n")
        for g in range(args.traj):
            h = simulate_asg(cfg, args.n, ts[-1], seed, g)
            for e in h.events:
                fe.write(f"{g},{e.time!r},{e.kind},\"{e.args()}\"\n")
            for t, st in zip(ts, coeff_process(h, v0, ts, cfg, labeled=False)):
                for i, c in enumerate(st.coeffs):
                    fc.write(f"{g},{t!r},{st.dim},{i},{float(c)!r}\n")
    return [ev_path, co_path], EXIT_OK


def _cmd_duality(args, cfg, seed):
    ts = sorted(set(args.t if args.t is not None else (args.t_grid or [0.5, 1.0])))
    xs = args.x_grid or [0.25, 0.5, 0.75]
    path = os.path.join(args.out, "duality.csv")
    rows = []
    if args.dual == "bernstein":
        from .asg_dual import bernstein_duality_table
        v0 = np.zeros(args.n + 1)
        v0[args.n] = 1.0
        lhs, rhs, se = bernstein_duality_table(cfg, xs, v0, ts, args.traj, seed, _scheme(args))
        for q, t in enumerate(ts):
            for k, x in enumerate(xs):
                rows.append((x, args.n, t, float(lhs[q, k]), float(rhs[q, k]), float(se[q, k])))
        head = "x,n,t,lhs,rhs,gap,se"
    else:
        from .siegmund_sim import siegmund_duality_gap
        ys = args.y_grid or [0.5]
        for t in ts:
            for x in xs:
                for y in ys:
                    lhs, rhs, se = siegmund_duality_gap(cfg, x, y, t, args.traj, seed, _scheme(args))
                    rows.append((x, y, t, lhs, rhs, se))
        head = "x,y,t,lhs,rhs,gap,se"
    bad = 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(head + "\n")
        for a, b, t, l, r, s in rows:
            gap = abs(l - r)
            bad += gap > 3 * s
            fh.write(f"{a!r},{b!r},{t!r},{l!r},{r!r},{gap!r},{s!r}\n")
    return [path], EXIT_FAIL if bad else EXIT_OK


def _cmd_bounds(args, cfg, seed):
    from .analytics import stationarity_report
    xs = args.x_grid or [0.0, 0.25, 0.5, 0.75, 1.0]
    ts = args.t_grid or [2.0, 4.0, 8.0]
    rep = stationarity_report(cfg, xs, ts, args.traj, args.metric, seed, args.mode,
                              _scheme(args), eps=args.eps)
    path = os.path.join(args.out, "bounds.csv")
    rep.to_csv(path)
    plot = emit_plotdata(rep, os.path.join(args.out, "bounds_plot.csv"))
    return [path, plot], EXIT_OK if rep.passed else EXIT_FAIL


_CDFS = {
    "identity": (lambda x: x, lambda u: u, 1.0),
    "smoothstep": (lambda x: x * x * (3 - 2 * x), None, 1.5),
}


def _cmd_relduals(args, cfg, seed):
    from .analytics import relduals_gap
    F, ppf, fs = _CDFS[args.cdf]
    xs = args.x_grid or [0.25, 0.5, 0.75]
    ts = args.t_grid or [0.5, 1.0, 2.0]
    path = os.path.join(args.out, "relduals.csv")
    ok = True
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("n,x,t,lhs,rhs,gap,se,bound\n")
        for n in args.n_list:
            res = relduals_gap(cfg, F, n, [(x, t) for x in xs for t in ts], args.traj,
                               derive(seed, n), fs, ppf, _scheme(args))
            ok &= res.passed
            for x, t, l, r, s in res.rows:
                fh.write(f"{n},{x!r},{t!r},{l!r},{r!r},{abs(l - r)!r},{s!r},{res.bound!r}\n")
    return [path], EXIT_OK if ok else EXIT_FAIL


def derive(seed, *labels):
    from .rng import derive_seed
    return derive_seed(seed, *labels)


def _pairs(text, name):
    out = []
    for item in text.split(","):
        parts = item.strip().split(":")
        if len(parts) != 2:
            raise argparse.ArgumentTypeError(f"--{name}: expected a:b pairs")
        out.append((float(parts[0]), float(parts[1])))
    return out


def _cmd_recurrence(args, cfg, seed):
    from .analytics import recurrence_scan
    windows = args.windows or [(k * args.window, (k + 1) * args.window) for k in range(args.n_windows)]
    res = recurrence_scan(cfg, args.x0, args.targets, windows, args.traj, seed, _scheme(args))
    path = os.path.join(args.out, "recurrence.csv")
    res.to_csv(path)
    side = os.path.join(args.out, "recurrence_post_jump.csv")
    with open(side, "w", encoding="utf-8", newline="") as fh:
        fh.write("target,eta,post_jump_visits,n_traj,recurrence_predicate\n")
        for (c, e), v in zip(args.targets, res.post_jump_visits):
            fh.write(f"{c!r},{e!r},{v},{res.n_traj},{res.predicate}\n")
    return [path, side], EXIT_OK


def _cmd_levy(args, cfg, seed):
    from .analytics import levy_drift_check
    rep = levy_drift_check(cfg, args.b, args.lambda_grid, args.traj, seed, T=args.horizon,
                           eps_trunc=args.eps_trunc)
    path = os.path.join(args.out, "levy.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("quantity,key,value\n")
        fh.write(f"E_L1,,{rep.E_L1!r}\n")
        fh.write(f"mc_mean_L1,,{rep.mc_mean_L1!r}\n")
        fh.write(f"mc_se_L1,,{rep.mc_se_L1!r}\n")
        for lam, v in rep.psi.items():
            fh.write(f"psi,{lam!r},{v!r}\n")
        for q, v in rep.inf_quantiles.items():
            fh.write(f"inf_quantile,{q!r},{v!r}\n")
        for x, v in zip(rep.tail_x, rep.tail_prob):
            fh.write(f"inf_tail,{float(x)!r},{float(v)!r}\n")
    return [path], EXIT_OK


def _cmd_scan(args, cfg, seed):
    from .line_dual import sup_EL1_scan
    res = sup_EL1_scan(cfg, args.n_max, args.traj, seed)
    path = os.path.join(args.out, "scan_el1.csv")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("n,mean_L1,se,running_max\n")
        for n, m, s, r in res.rows:
            fh.write(f"{n},{m!r},{s!r},{r!r}\n")
        fh.write(f"# slope={res.slope!r} trend={res.trend} tail_condition={res.tail_condition}\n")
    return [path], EXIT_OK


# ---------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="wfdual", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, traj=1000):
        sp.add_argument("--config", required=True)
        sp.add_argument("--out", default="wfdual_out")
        sp.add_argument("--seed", type=int, default=None,
                        help="master seed (falls back to WFDUAL_SEED, then 0)")
        sp.add_argument("--traj", type=int, default=traj)
        sp.add_argument("--t-grid", type=lambda s: _grid(s, "t-grid"), default=None)
        sp.add_argument("--x-grid", type=lambda s: _grid(s, "x-grid"), default=None)
        sp.add_argument("--eps-trunc", type=float, default=1e-3)
        sp.add_argument("--dt", type=float, default=None)
        return sp

    common(sub.add_parser("simulate", help="forward endpoints on a t-grid")).set_defaults(func=_cmd_simulate)
    sp = common(sub.add_parser("siegmund", help="absorption masses of the Siegmund dual"))
    sp.add_argument("--a", type=float, default=0.1)
    sp.set_defaults(func=_cmd_siegmund)
    sp = common(sub.add_parser("asg", help="sample graphs and coefficient paths"), traj=10)
    sp.add_argument("--n", type=int, default=3)
    sp.set_defaults(func=_cmd_asg)
    sp = common(sub.add_parser("duality-check", help="both sides of a duality identity"))
    sp.add_argument("--t", type=lambda s: _grid(s, "t"), default=None)
    sp.add_argument("--dual", choices=("bernstein", "siegmund"), default="bernstein")
    sp.add_argument("--n", type=int, default=2)
    sp.add_argument("--y-grid", type=lambda s: _grid(s, "y-grid"), default=None)
    sp.set_defaults(func=_cmd_duality)
    sp = common(sub.add_parser("bounds", help="distance to stationarity against its bound"), traj=10000)
    sp.add_argument("--metric", default="w1", help="w1, wp:<p>, radon or lp")
    sp.add_argument("--mode", choices=("bernstein", "siegmund"), default="bernstein")
    sp.add_argument("--eps", type=float, default=0.1)
    sp.set_defaults(func=_cmd_bounds)
    sp = common(sub.add_parser("relduals", help="Siegmund CDF against Bernstein coefficients"))
    sp.add_argument("--n-list", type=lambda s: [int(v) for v in _grid(s, "n-list")], default=[16, 64])
    sp.add_argument("--cdf", choices=sorted(_CDFS), default="identity")
    sp.set_defaults(func=_cmd_relduals)
    sp = common(sub.add_parser("recurrence", help="visit frequencies of target intervals"))
    sp.add_argument("--x0", type=float, default=0.5)
    sp.add_argument("--targets", type=lambda s: _pairs(s, "targets"), default=[(0.5, 0.2)],
                    help="center:eta pairs")
    sp.add_argument("--windows", type=lambda s: _pairs(s, "windows"), default=None,
                    help="start:end pairs")
    sp.add_argument("--window", type=float, default=5.0)
    sp.add_argument("--n-windows", type=int, default=4)
    sp.set_defaults(func=_cmd_recurrence)
    sp = common(sub.add_parser("levy", help="the Levy process L^b"))
    sp.add_argument("--b", type=float, default=3.0)
    sp.add_argument("--lambda-grid", type=lambda s: _grid(s, "lambda-grid"), default=[-0.5, 0.5, 1.0])
    sp.add_argument("--horizon", type=float, default=20.0)
    sp.set_defaults(func=_cmd_levy)
    sp = common(sub.add_parser("scan-el1", help="E_n[L_1] over a geometric n-grid"), traj=400)
    sp.add_argument("--n-max", type=int, default=1024)
    sp.set_defaults(func=_cmd_scan)
    return p


def main(argv=None) -> int:
    from .forward_sim import config_hash
    from .rng import default_seed
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = parse_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"wfdual: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.traj < 1:
        print("wfdual: --traj must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    seed = default_seed(args.seed)
    args.seed = seed
    os.makedirs(args.out, exist_ok=True)
    t0 = time.perf_counter()
    try:
        outputs, code = args.func(args, cfg, seed)
    except (ValueError, OverflowError) as exc:
        print(f"wfdual: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _write_manifest(args, config_hash(cfg), seed, outputs, time.perf_counter() - t0)
    return code


if __name__ == "__main__":
    sys.exit(main())
