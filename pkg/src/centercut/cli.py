"""Command-line entry point.

Every subcommand writes its results under ``--out`` as CSV or JSON-lines
files carrying a schema-version header, and prints a short summary (or one
JSON record with ``--json``).  All randomness derives from ``--seed``.

Options may also come from an INI file given by ``--config``: keys in the
``[centercut]`` section apply to every subcommand, keys in a section named
after the subcommand override them, and command-line flags override both.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .centerpoint import depth_profile
from .cuts import FeasibleRegion
from .experiments import (DEFAULT_PROBLEM, PROBLEMS, SharpnessConfig, build_truncated_simplex,
                          centroid_depth, euclidean_grunbaum_check, make_oracle, problem,
                          sharpness_run, substream, write_rows)
from .manifold import make_manifold, unit_ball_volume
from .optimizer import OptimizerConfig, minimize
from .sampling import estimate_volume, sample_region

SCHEMA_VERSION = 1
GLOBAL_SECTION = "centercut"


class CLIError(Exception):
    """Invalid configuration detected after argument parsing."""


def positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return v


def nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text!r}")
    return v


def positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def positive_floats(text):
    """Comma-separated list of positive numbers."""
    parts = [p for p in str(text).replace(" ", "").split(",") if p]
    if not parts:
        raise argparse.ArgumentTypeError("expected at least one value")
    return [positive_float(p) for p in parts]


# name -> (argparse kwargs); subcommands pick from this table
FLAGS = {
    "manifold": dict(choices=["euclidean", "klein", "spd"], help="manifold kind"),
    "dim": dict(type=positive_int, help="dimension (matrix size for spd)"),
    "seed": dict(type=nonneg_int, default=0, help="master seed (default 0)"),
    "samples": dict(type=positive_int, help="sample count"),
    "eps": dict(type=positive_floats, help="comma-separated eps values"),
    "out": dict(default="out", help="output directory (default ./out)"),
    "delta": dict(type=positive_float, default=0.05, help="simplex enlargement (default 0.05)"),
    "problem": dict(choices=sorted(PROBLEMS), help="built-in objective"),
    "lipschitz": dict(type=positive_float, help="override the objective's Lipschitz constant"),
    "radius": dict(type=positive_float, default=1.0, help="geodesic ball radius (default 1)"),
    "volume_samples": dict(type=positive_int, default=100_000,
                           help="proposals per volume estimate (default 100000)"),
    "max_cuts": dict(type=positive_int, help="hard cap on cuts (default 3x the budget)"),
    "budget": dict(type=nonneg_int, default=16, help="centerpoint candidates (default 16)"),
    "shape": dict(choices=["triangle", "square"], default="triangle", help="planar test shape"),
    "grid": dict(type=positive_int, default=21, help="grid points per axis (default 21)"),
    "resume": dict(help="region JSON from an earlier optimize run to continue from"),
}

COMMANDS = {
    "sharpness": ("single-vertex halfspace mass of truncated hyperbolic simplices",
                  ["dim", "delta", "eps", "samples", "seed", "out"]),
    "grunbaum": ("centerpoint depth on a uniform planar shape",
                 ["shape", "samples", "budget", "seed", "out"]),
    "optimize": ("centerpoint cutting-plane minimization of a built-in objective",
                 ["manifold", "dim", "problem", "eps", "lipschitz", "samples", "volume_samples",
                  "max_cuts", "budget", "resume", "seed", "out"]),
    "volume": ("Monte Carlo volume of a geodesic ball",
               ["manifold", "dim", "radius", "samples", "seed", "out"]),
    "depth-profile": ("halfspace-depth values on a chart grid",
                      ["manifold", "delta", "eps", "samples", "grid", "seed", "out"]),
}

SAMPLE_DEFAULTS = {"sharpness": 10 ** 6, "grunbaum": 10 ** 5, "optimize": 4096,
                   "volume": 10 ** 5, "depth-profile": 20_000}


def _flag(name):
    return "--" + name.replace("_", "-")


def build_parser():
    lines = ["subcommands and their flags:"]
    for cmd, (_, flags) in COMMANDS.items():
        lines.append(f"  {cmd}: " + " ".join(_flag(f) for f in flags) + " --config --json")
    parser = argparse.ArgumentParser(
        prog="centercut",
        description="Centerpoint cutting planes on Hadamard manifolds.",
        epilog="\n".join(lines),
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for cmd, (text, flags) in COMMANDS.items():
        p = sub.add_parser(cmd, help=text, description=text)
        for f in flags:
            p.add_argument(_flag(f), dest=f, **FLAGS[f])
        p.add_argument("--config", help="INI file with option defaults")
        p.add_argument("--json", action="store_true", help="print a JSON record instead of text")
    return parser


def _read_config(path, command, parser):
    cp = configparser.ConfigParser()
    try:
        with open(path) as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        parser.error(f"cannot read config {path!r}: {exc}")
    allowed = set(COMMANDS[command][1])
    values = {}
    for section in (GLOBAL_SECTION, command):
        if not cp.has_section(section):
            continue
        for key, val in cp.items(section):
            dest = key.replace("-", "_")
            if dest not in FLAGS:
                parser.error(f"config {path!r}: unknown option {key!r} in [{section}]")
            if dest in allowed:
                values[dest] = val
            elif section == command:
                parser.error(f"config {path!r}: option {key!r} does not apply to {command}")
    for section in cp.sections():
        if section != GLOBAL_SECTION and section not in COMMANDS:
            parser.error(f"config {path!r}: unknown section [{section}]")
    return values


def parse_args(argv):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        values = _read_config(args.config, args.command, parser)
        if values:
            # string defaults go through each flag's type, so config values are validated too
            sub = parser._subparsers._group_actions[0].choices[args.command]
            sub.set_defaults(**values)
            args = parser.parse_args(argv)
    if getattr(args, "samples", None) is None:
        args.samples = SAMPLE_DEFAULTS[args.command]
    return args


def _out_dir(path):
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(f"cannot create output directory {str(out)!r}: {exc.strerror}")
    if not os.access(out, os.W_OK):
        raise CLIError(f"output directory {str(out)!r} is not writable")
    return out


def _eps_tag(eps):
    return repr(float(eps))


def run_sharpness(args):
    eps = tuple(args.eps) if args.eps else SharpnessConfig.eps_list
    cfg = SharpnessConfig(n=args.dim or 2, delta=args.delta, eps_list=eps, m=args.samples,
                          seed=args.seed)
    rows = sharpness_run(cfg)
    out = _out_dir(args.out)
    write_rows(out / "sharpness.csv", rows)
    return {"command": "sharpness", "files": ["sharpness.csv"], "rows": rows}


def run_grunbaum(args):
    depth = euclidean_grunbaum_check(args.samples, args.seed, args.shape, args.budget)
    row = {"shape": args.shape, "samples": args.samples, "seed": args.seed,
           "centerpoint_depth": depth}
    if args.shape == "triangle":
        row["centroid_depth"] = centroid_depth(args.samples, args.seed)
        row["centroid_exact"] = 4.0 / 9.0
    out = _out_dir(args.out)
    write_rows(out / "grunbaum.csv", [row])
    return {"command": "grunbaum", "files": ["grunbaum.csv"], "rows": [row]}


def run_optimize(args):
    if args.resume:
        try:
            with open(args.resume) as fh:
                M_res, region0 = FeasibleRegion.from_record(json.load(fh))
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise CLIError(f"cannot load region {args.resume!r}: {exc}")
        kind, n = M_res.kind, M_res.n
    else:
        kind, n, region0 = args.manifold, args.dim, None
    kind = kind or (args.problem.split("-")[0] if args.problem else "klein")
    label = args.problem or DEFAULT_PROBLEM[kind]
    if not label.startswith(kind):
        raise CLIError(f"problem {label!r} is not defined on the {kind} manifold")
    n = n or 2
    if args.resume and args.dim and args.dim != n:
        raise CLIError(f"--dim {args.dim} does not match the resumed region (n={n})")
    oracle, region, f_star = problem(label, n)
    M = oracle.manifold
    if region0 is not None:
        region = region0
    out = _out_dir(args.out)
    files = []
    rows = []
    for eps in args.eps or [0.05]:
        cfg = OptimizerConfig(samples=args.samples, volume_samples=args.volume_samples,
                              centerpoint_budget=args.budget, max_cuts=args.max_cuts,
                              lipschitz=args.lipschitz,
                              seed=substream(args.seed, f"optimize-{label}-{_eps_tag(eps)}"))
        tr = minimize(M, oracle, region, eps, cfg, keep_regions=True)
        tag = _eps_tag(eps)
        tr.write_jsonl(out / f"trace_eps{tag}.jsonl", M)
        tr.write_csv(out / f"summary_eps{tag}.csv", M)
        with open(out / f"region_eps{tag}.json", "w") as fh:
            fh.write(tr.regions[-1].dumps(M) + "\n")
        files += [f"trace_eps{tag}.jsonl", f"summary_eps{tag}.csv", f"region_eps{tag}.json"]
        rows.append({
            "eps": float(eps),
            "termination": tr.termination,
            "cuts_used": tr.cuts_used,
            "budget": tr.budget,
            "best_value": float(tr.best_value),
            "f_star": None if f_star is None else float(f_star),
            "best_point": M.flatten(tr.best_point).tolist(),
        })
    return {"command": "optimize", "problem": label, "manifold": kind, "n": n,
            "files": files, "rows": rows}


def run_volume(args):
    kind = args.manifold or "klein"
    n = args.dim or 2
    M = make_manifold(kind, n)
    region = FeasibleRegion(M.origin(), args.radius)
    value, se = estimate_volume(M, region, args.samples, substream(args.seed, "volume"))
    if kind == "klein":
        exact = float(M.ball_volume(args.radius))
    elif kind == "euclidean":
        exact = float(unit_ball_volume(n) * args.radius ** n)
    else:
        exact = math.nan
    row = {"manifold": kind, "n": n, "radius": float(args.radius), "samples": args.samples,
           "seed": args.seed, "volume": value, "stderr": se, "closed_form": exact}
    out = _out_dir(args.out)
    write_rows(out / "volume.csv", [row])
    return {"command": "volume", "files": ["volume.csv"], "rows": [row]}


def run_depth_profile(args):
    kind = args.manifold or "euclidean"
    if kind == "euclidean":
        from .experiments import euclidean_triangle
        M, region = euclidean_triangle()
    elif kind == "klein":
        eps = args.eps[0] if args.eps else 0.05
        if not eps < 1:
            raise CLIError(f"truncation eps must lie in (0, 1), got {eps}")
        M, region = build_truncated_simplex(SharpnessConfig(delta=args.delta, eps_list=(eps,)),
                                            eps)
    else:
        raise CLIError("depth-profile supports the euclidean and klein manifolds")
    samples = sample_region(M, region, args.samples, substream(args.seed, "depth-profile"))
    flat = M.flatten(samples.points)
    lo, hi = flat.min(axis=0), flat.max(axis=0)
    axes = [np.linspace(a, b, args.grid) for a, b in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, M.chart_dim)
    rows = depth_profile(M, samples, grid, path=_out_dir(args.out) / "depth_profile.csv")
    g = np.array([r[1] for r in rows])
    k = int(np.nanargmin(g))
    best = {"point": rows[k][0].tolist(), "g_value": float(g[k])}
    return {"command": "depth-profile", "manifold": kind, "files": ["depth_profile.csv"],
            "grid_points": len(rows), "deepest": best}


RUNNERS = {
    "sharpness": run_sharpness,
    "grunbaum": run_grunbaum,
    "optimize": run_optimize,
    "volume": run_volume,
    "depth-profile": run_depth_profile,
}


def _text_summary(result):
    lines = [f"{result['command']}: wrote {', '.join(result['files'])}"]
    for r in result.get("rows", []):
        lines.append("  " + "  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                                      for k, v in r.items() if not isinstance(v, list)))
    if "deepest" in result:
        d = result["deepest"]
        lines.append(f"  deepest grid point {d['point']} with heaviest halfspace {d['g_value']:.4f}")
    return "\n".join(lines)


def _clean(obj):
    """JSON-safe copy: NaN and infinities become null."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def main(argv=None):
    args = parse_args(sys.argv[1:] if argv is None else argv)
    try:
        result = RUNNERS[args.command](args)
    except (CLIError, ValueError, TypeError, RuntimeError, OSError) as exc:
        kind = type(exc).__name__
        if args.json:
            err = {"schema_version": SCHEMA_VERSION, "status": "error", "command": args.command,
                   "error": kind, "message": str(exc)}
            print(json.dumps(err, sort_keys=True), file=sys.stderr)
        else:
            print(f"centercut {args.command}: error ({kind}): {exc}", file=sys.stderr)
        return 1
    if args.json:
        rec = {"schema_version": SCHEMA_VERSION, "status": "ok", **result}
        print(json.dumps(_clean(rec), sort_keys=True))
    else:
        print(_text_summary(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
