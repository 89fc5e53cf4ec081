"""Command line front end.

Five subcommands cover the standard workflows:

  theta-table   estimate the percolation density curve, with file caching
  tree-curves   closed-form threshold and cost curves on binary trees
  grid-curves   limit threshold and normalized cost curves from a table
  simulate      Monte Carlo threshold/cost sweep on any built-in family
  compare       simulation against the limit predictions, by n or by m

Options resolve as CLI flag > config file > built-in default. The config
file is INI style with one section per subcommand, keys named like the
long flags (dashes or underscores both work):

    [simulate]
    family = grid
    m = 61
    trials = 800

Every output CSV starts with a single comment line recording the tool
version, the subcommand, and the fully resolved parameters, so a file is
reproducible from its own header. Stochastic commands draw and print a
seed when none is given.

Exit codes: 0 ok, 2 bad input (validation, missing file, bad flag),
3 well-posed but unsolvable or numerically failed run.
"""
from __future__ import annotations

import argparse
import configparser
import math
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GraphGenerationError, NoSolutionError
from .estimator import (
    CURVE_CSV_HEADER,
    mc_expected_fraction,
    sweep_n,
    write_curve_csv,
)
from .graphs import build_grid, build_random_regular, build_rgg, build_tree
from .gridlimit import (
    GridLimitSpec,
    grid_pmin,
    grid_tau_normalized,
)
from .binom import binom_tail
from .percolation import (
    ThetaTable,
    build_theta_table,
    theta_cache_filename,
)
from .trees import (
    TreeSpec,
    tree_expected_transmissions,
    tree_pmin,
    tree_pmin_bounds_kl,
    tree_pmin_lower_bound,
    tree_pmin_upper_bound,
)

_REQUIRED = object()

# per-subcommand option table: key -> (type, default); _REQUIRED must be
# supplied on the command line or in the config file
_SPECS = {
    "theta-table": {
        "m": (int, 501),
        "reps": (int, 20),
        "p_start": (float, 0.593),
        "p_step": (float, 0.005),
        "p_count": (int, 82),
        "seed": (int, None),
        "workers": (int, 1),
        "cache_dir": (str, "."),
        "out": (str, None),
    },
    "tree-curves": {
        "height": (int, _REQUIRED),
        "k": (int, _REQUIRED),
        "delta": (float, _REQUIRED),
        "n_start": (int, _REQUIRED),
        "n_stop": (int, _REQUIRED),
        "n_step": (int, 1),
        "arity": (int, 2),
        "tol": (float, 1e-6),
        "out": (str, "tree_curves.csv"),
    },
    "grid-curves": {
        "k": (int, _REQUIRED),
        "delta": (float, _REQUIRED),
        "n_start": (int, _REQUIRED),
        "n_stop": (int, _REQUIRED),
        "n_step": (int, 1),
        "theta_csv": (str, _REQUIRED),
        "p_floor": (float, 0.593),
        "tol": (float, 1e-4),
        "out": (str, "grid_curves.csv"),
    },
    "simulate": {
        "family": (str, _REQUIRED),
        "k": (int, _REQUIRED),
        "delta": (float, _REQUIRED),
        "n_start": (int, _REQUIRED),
        "n_stop": (int, _REQUIRED),
        "n_step": (int, 1),
        "trials": (int, 400),
        "tau_trials": (int, None),
        "tol": (float, 1e-4),
        "seed": (int, None),
        "graph_seed": (int, None),
        "workers": (int, 1),
        "m": (int, 31),
        "height": (int, 8),
        "arity": (int, 2),
        "rgg_vertices": (int, 500),
        "rgg_side": (float, 20.0),
        "rgg_radius": (float, 1.5),
        "reg_vertices": (int, 200),
        "reg_degree": (int, 4),
        "out": (str, "curve.csv"),
    },
    "compare": {
        "mode": (str, _REQUIRED),
        "theta_csv": (str, _REQUIRED),
        "k": (int, _REQUIRED),
        "n_start": (int, None),
        "n_stop": (int, None),
        "n_step": (int, 1),
        "delta": (float, None),
        "m": (int, 151),
        "m_list": (str, "31,61,121"),
        "n": (int, None),
        "p": (float, None),
        "trials": (int, 400),
        "tol": (float, 1e-4),
        "p_floor": (float, 0.593),
        "seed": (int, None),
        "workers": (int, 1),
        "out": (str, None),
    },
}

_CHOICES = {
    ("simulate", "family"): ("grid", "tree", "rgg", "regular"),
    ("compare", "mode"): ("n-sweep", "m-sweep"),
}


def _add_options(sub: argparse.ArgumentParser, cmd: str):
    sub.add_argument("--config", help="INI file with a [%s] section" % cmd)
    for key, (typ, _default) in _SPECS[cmd].items():
        flag = "--" + key.replace("_", "-")
        choices = _CHOICES.get((cmd, key))
        # defaults stay None here so the config layer can see what was set
        sub.add_argument(flag, type=typ, default=None, choices=choices)


def _resolve(args, cmd: str) -> dict:
    """Merge CLI flags over config values over built-in defaults."""
    section = {}
    if args.config:
        cp = configparser.ConfigParser()
        if not cp.read(args.config):
            raise ValueError(f"config file not readable: {args.config}")
        if cp.has_section(cmd):
            section = dict(cp.items(cmd))
    out = {}
    missing = []
    for key, (typ, default) in _SPECS[cmd].items():
        val = getattr(args, key)
        if val is None:
            raw = section.get(key, section.get(key.replace("_", "-")))
            if raw is not None:
                val = typ(raw)
                choices = _CHOICES.get((cmd, key))
                if choices and val not in choices:
                    raise ValueError(f"{cmd}: {key} must be one of {choices}")
        if val is None:
            if default is _REQUIRED:
                missing.append(key.replace("_", "-"))
                continue
            val = default
        out[key] = val
    if missing:
        raise ValueError(f"{cmd}: missing required option(s): " + ", ".join(missing))
    return out


def _ensure_seed(opts: dict) -> int:
    if opts.get("seed") is None:
        opts["seed"] = secrets.randbelow(2**31)
        print(f"seed not given, drew {opts['seed']}")
    return int(opts["seed"])


def _comment(cmd: str, opts: dict) -> str:
    body = " ".join(f"{k}={v}" for k, v in opts.items() if v is not None)
    return f"probfwd {__version__} | {cmd} | {body}"


def _write_rows(path, comment: str, header: str, rows):
    with open(path, "w") as fh:
        fh.write(f"# {comment}\n")
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(x) for x in row) + "\n")
    print(f"wrote {path}")


def _n_values(opts) -> list[int]:
    start, stop, step = opts["n_start"], opts["n_stop"], opts["n_step"]
    if step < 1:
        raise ValueError(f"n-step must be >= 1, got {step}")
    if stop < start:
        raise ValueError(f"n-stop must be >= n-start, got {start}..{stop}")
    return list(range(start, stop + 1, step))


def _theta_grid(opts) -> np.ndarray:
    # grid values are snapped to 3 decimals so cache names are stable;
    # start and step must sit on that resolution
    for key in ("p_start", "p_step"):
        if abs(opts[key] * 1000 - round(opts[key] * 1000)) > 1e-9:
            raise ValueError(f"{key} must be a multiple of 0.001, got {opts[key]}")
    if opts["p_step"] <= 0 or opts["p_count"] < 1:
        raise ValueError("need p-step > 0 and p-count >= 1")
    return np.round(opts["p_start"] + opts["p_step"] * np.arange(opts["p_count"]), 3)


def _cmd_theta_table(args) -> int:
    opts = _resolve(args, "theta-table")
    seed = _ensure_seed(opts)
    grid = _theta_grid(opts)
    cache = Path(opts["cache_dir"]) / theta_cache_filename(
        opts["m"], opts["reps"], seed, grid
    )
    comment = _comment("theta-table", opts)
    if cache.exists():
        table = ThetaTable.load_csv(cache)
        print(f"cache hit {cache}")
    else:
        table = build_theta_table(
            opts["m"], grid, opts["reps"], seed, workers=opts["workers"]
        )
        cache.parent.mkdir(parents=True, exist_ok=True)
        table.save_csv(cache, comment)
        print(f"wrote {cache}")
    if opts["out"]:
        table.save_csv(opts["out"], comment)
        print(f"wrote {opts['out']}")
    lo, hi = table.theta[0], table.theta[-1]
    print(f"{grid.size} rows, theta {lo:.4f} -> {hi:.4f} at m={table.m}")
    return 0


def _cmd_tree_curves(args) -> int:
    opts = _resolve(args, "tree-curves")
    rows = []
    for n in _n_values(opts):
        spec = TreeSpec(opts["height"], opts["k"], n, opts["delta"], opts["arity"])
        p_min = tree_pmin(spec, opts["tol"])
        tau = tree_expected_transmissions(spec, p_min)
        try:
            lower = tree_pmin_lower_bound(spec)
        except ValueError:
            lower = math.nan  # bound inapplicable at this delta/shape
        try:
            upper = tree_pmin_upper_bound(spec)
        except ValueError:
            upper = math.nan
        kl_lo, kl_hi = tree_pmin_bounds_kl(spec, opts["tol"])
        rows.append((n, p_min, tau, lower, upper, kl_lo, kl_hi))
    _write_rows(
        opts["out"],
        _comment("tree-curves", opts),
        "n,p_min,tau,p_lower,p_upper,p_lower_kl,p_upper_kl",
        rows,
    )
    return 0


def _cmd_grid_curves(args) -> int:
    opts = _resolve(args, "grid-curves")
    table = ThetaTable.load_csv(opts["theta_csv"])
    rows = []
    for n in _n_values(opts):
        spec = GridLimitSpec(opts["k"], n, opts["delta"], table, opts["p_floor"])
        gt = grid_tau_normalized(spec, opts["tol"])
        rows.append((n, gt.p_min, gt.tau, int(gt.clamped)))
    _write_rows(
        opts["out"],
        _comment("grid-curves", opts),
        "n,p_min_limit,tau_normalized,clamped",
        rows,
    )
    return 0


def _build_family(opts, graph_seed: int):
    fam = opts["family"]
    if fam == "grid":
        return build_grid(opts["m"])
    if fam == "tree":
        return build_tree(opts["arity"], opts["height"])
    if fam == "rgg":
        return build_rgg(
            opts["rgg_vertices"], opts["rgg_side"], opts["rgg_radius"], graph_seed
        )
    return build_random_regular(opts["reg_vertices"], opts["reg_degree"], graph_seed)


def _cmd_simulate(args) -> int:
    opts = _resolve(args, "simulate")
    seed = _ensure_seed(opts)
    graph_seed = opts["graph_seed"] if opts["graph_seed"] is not None else seed
    g = _build_family(opts, graph_seed)
    print(f"graph {g.kind}: {g.vertex_count} vertices, {g.edge_count} edges")
    points = sweep_n(
        g,
        opts["k"],
        opts["delta"],
        _n_values(opts),
        opts["trials"],
        seed,
        tol=opts["tol"],
        tau_trials=opts["tau_trials"],
        workers=opts["workers"],
    )
    write_curve_csv(points, opts["out"], _comment("simulate", opts))
    print(f"wrote {opts['out']}")
    return 0


def _compare_n_sweep(opts, table) -> int:
    for key in ("delta", "n_start", "n_stop"):
        if opts[key] is None:
            raise ValueError(f"compare n-sweep needs --{key.replace('_', '-')}")
    seed = _ensure_seed(opts)
    g = build_grid(opts["m"])
    points = sweep_n(
        g,
        opts["k"],
        opts["delta"],
        _n_values(opts),
        opts["trials"],
        seed,
        tol=opts["tol"],
        workers=opts["workers"],
    )
    rows = []
    for pt in points:
        spec = GridLimitSpec(opts["k"], pt.n, opts["delta"], table, opts["p_floor"])
        gt = grid_tau_normalized(spec, opts["tol"])
        rows.append(
            (
                pt.n,
                pt.p_min,
                pt.p_min_ci,
                gt.p_min,
                pt.p_min - gt.p_min,
                pt.tau,
                pt.tau_stderr,
                gt.tau,
                int(gt.clamped),
            )
        )
    out = opts["out"] or "compare_n.csv"
    _write_rows(
        out,
        _comment("compare", opts),
        "n,p_min_mc,p_min_ci,p_min_limit,gap,tau_mc,tau_stderr,tau_limit_normalized,clamped",
        rows,
    )
    return 0


def _compare_m_sweep(opts, table) -> int:
    if opts["n"] is None or opts["p"] is None:
        raise ValueError("compare m-sweep needs --n and --p")
    seed = _ensure_seed(opts)
    n, k, p = opts["n"], opts["k"], opts["p"]
    s = float(table.theta_plus_at(p))
    limit = binom_tail(n, s * s, k)
    rows = []
    for text in opts["m_list"].split(","):
        m = int(text)
        g = build_grid(m)
        est = mc_expected_fraction(
            g, k, n, p, opts["trials"], seed, workers=opts["workers"]
        )
        rows.append((m, est.mean, est.stderr, limit, est.mean - limit))
    out = opts["out"] or "compare_m.csv"
    _write_rows(
        out,
        _comment("compare", opts),
        "m,fraction_mc,fraction_stderr,fraction_limit,diff",
        rows,
    )
    return 0


def _cmd_compare(args) -> int:
    opts = _resolve(args, "compare")
    table = ThetaTable.load_csv(opts["theta_csv"])
    if opts["mode"] == "n-sweep":
        return _compare_n_sweep(opts, table)
    return _compare_m_sweep(opts, table)


_HANDLERS = {
    "theta-table": _cmd_theta_table,
    "tree-curves": _cmd_tree_curves,
    "grid-curves": _cmd_grid_curves,
    "simulate": _cmd_simulate,
    "compare": _cmd_compare,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="probfwd",
        description="probabilistic forwarding of coded packets: "
        "simulation and analysis",
    )
    parser.add_argument("--version", action="version", version=f"probfwd {__version__}")
    subs = parser.add_subparsers(dest="command", required=True)
    for cmd in _SPECS:
        sub = subs.add_parser(cmd)
        _add_options(sub, cmd)
        sub.set_defaults(func=_HANDLERS[cmd])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (NoSolutionError, GraphGenerationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (FloatingPointError, OverflowError, ZeroDivisionError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
