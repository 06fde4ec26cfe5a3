"""Command-line front end: ``cellhom <subcommand> --config run.json``.

Exit codes: 0 success, 2 invalid input, 3 solver failure. Failures print
``{"error": ..., "detail": ...}`` as JSON on stdout.
"""

from __future__ import annotations

import argparse
import copy
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cell import CellProblem, SolverOptions, solve_cell
from .effective import (
    EffectiveOperator,
    concavity_probe,
    convexity_probe,
    effective,
    ellipticity_probe,
    random_symmetric,
    random_unit,
)
from .errors import CellhomError, ConfigError, NotPeriodic, SolverError
from .exterior import Asymptote, ExteriorProblem, decay_fit, solve_exterior
from .fields import check_periodic, parse_field
from .grid import GridFunction, dump_grid_function, make_grid
from .liouville import SampledSolution, decompose, hessian_growth_ratio, verify_decomposition
from .measure import linear_effective, solve_invariant_measure
from .operators import LinearNondivergence, make_operator

SCHEMA_VERSION = 1
PERIODIC_TOL = 1e-9

TOP_KEYS = {"n", "m", "operator", "data", "A", "solver", "matrices", "exterior", "liouville"}
DATA_KEYS = {"f"}
EXTERIOR_DEFAULTS = {
    "mode": "radial",
    "rho_in": 1.0,
    "R": 64.0,
    "phi": 1.0,
    "points": 512,
    "n_theta": 64,
    "fit_r0": 2.0,
    "asymptote": "zero",
}
LIOUVILLE_DEFAULTS = {
    "A": None,
    "b": None,
    "c": 0.0,
    "periodic": "cell",
    "R_max": 1e4,
    "n_base": 1000,
    "check_A": None,
    "growth_p": None,
}


def _check_keys(block, allowed, where):
    if not isinstance(block, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = set(block) - set(allowed)
    if extra:
        raise ConfigError(f"unknown keys in {where}: {sorted(extra)}")


def _with_defaults(block, defaults, where):
    block = {} if block is None else block
    _check_keys(block, defaults, where)
    out = dict(defaults)
    out.update(block)
    return out


def resolve_config(raw: dict) -> dict:
    """Validate the raw JSON config and fill in defaults."""
    _check_keys(raw, TOP_KEYS, "config")
    cfg = copy.deepcopy(raw)
    cfg.setdefault("n", 2)
    cfg.setdefault("m", 64)
    if not isinstance(cfg["n"], int) or not isinstance(cfg["m"], int):
        raise ConfigError("'n' and 'm' must be integers")
    if "operator" not in cfg:
        raise ConfigError("config needs an 'operator' block")
    cfg["data"] = cfg.get("data") or {}
    _check_keys(cfg["data"], DATA_KEYS, "data")
    cfg["data"].setdefault("f", "0")
    cfg["solver"] = vars(SolverOptions.from_dict(cfg.get("solver")))
    n = cfg["n"]
    cfg.setdefault("A", np.zeros((n, n)).tolist())
    if "exterior" in cfg:
        cfg["exterior"] = _with_defaults(cfg["exterior"], EXTERIOR_DEFAULTS, "exterior")
    if "liouville" in cfg:
        cfg["liouville"] = _with_defaults(cfg["liouville"], LIOUVILLE_DEFAULTS, "liouville")
    return cfg


def _matrix(value, n, what):
    try:
        M = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{what} must be a numeric matrix") from exc
    if M.shape != (n, n):
        raise ConfigError(f"{what} must be {n}x{n} (row-major nested arrays)")
    return M


class Context:
    """Library objects built from a resolved config."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.grid = make_grid(cfg["n"], cfg["m"])
        self.op = make_operator(cfg["operator"], cfg["n"])
        self.f_expr = parse_field(cfg["data"]["f"], cfg["n"])
        if not check_periodic(self.f_expr, self.grid, PERIODIC_TOL):
            raise NotPeriodic(f"f = {cfg['data']['f']!r} is not 1-periodic")
        if isinstance(self.op, LinearNondivergence):
            for row in self.op.coefficients:
                for expr in row:
                    if not check_periodic(expr, self.grid, PERIODIC_TOL):
                        raise NotPeriodic(f"coefficient {expr.source!r} is not 1-periodic")
        self.f = GridFunction.from_callable(self.grid, self.f_expr)
        self.A = _matrix(cfg["A"], cfg["n"], "A")
        self.options = SolverOptions(**cfg["solver"])

    def problem(self, A=None):
        return CellProblem(self.grid, self.op, self.A if A is None else A, self.f, self.options)

    def effective_operator(self):
        return EffectiveOperator(self.op, self.f, self.grid, self.options)


def _threads():
    env = os.environ.get("CELLHOM_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError("CELLHOM_THREADS must be an integer") from exc
    return os.cpu_count() or 1


def cmd_cell_solve(ctx, args):
    sol = solve_cell(ctx.problem())
    if args.dump_v:
        dump_grid_function(sol.v, args.dump_v)
    out = sol.summary()
    out["f_mean"] = float(np.mean(ctx.f.values))
    return out


def cmd_effective_op(ctx, args):
    mats = ctx.cfg.get("matrices") or [ctx.cfg["A"]]
    eo = ctx.effective_operator()
    rows = []
    for M in mats:
        M = _matrix(M, ctx.grid.n, "matrices entry")
        rows.append({"A": M.tolist(), "beta": effective(eo, M)})
    return {"values": rows, "f_mean": eo.f_mean}


def cmd_props_check(ctx, args):
    if args.seed is None:
        raise ConfigError("props-check needs --seed")
    rng = np.random.default_rng(args.seed)
    n = ctx.grid.n
    eo = ctx.effective_operator()
    draws = []
    for _ in range(args.probes):
        if args.kind == "ellipticity":
            draws.append((random_symmetric(rng, n), random_unit(rng, n), float(rng.uniform(0.05, 1.0))))
        else:
            draws.append((random_symmetric(rng, n), random_symmetric(rng, n)))

    def run(draw):
        if args.kind == "ellipticity":
            M, e, t = draw
            rec = ellipticity_probe(eo, M, e, t)
            rec.update({"M": M.tolist(), "e": e.tolist(), "t": t})
        else:
            M, N = draw
            probe = concavity_probe if args.kind == "concavity" else convexity_probe
            rec = probe(eo, M, N)
            rec.update({"M": M.tolist(), "N": N.tolist()})
        return rec

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        records = list(pool.map(run, draws))
    return {"kind": args.kind, "probes": records, "all_pass": all(r["pass"] for r in records)}


def cmd_invariant_measure(ctx, args):
    if not isinstance(ctx.op, LinearNondivergence):
        raise ConfigError("invariant-measure needs a 'linear' operator")
    ms = solve_invariant_measure(ctx.grid, ctx.op)
    if args.dump_m:
        dump_grid_function(ms.m, args.dump_m)
    return {
        "moments": ms.moments(ctx.op).tolist(),
        "margin": ms.margin,
        "adjoint_residual": ms.adjoint_residual,
        "linear_effective": linear_effective(ctx.A, ctx.op, ctx.f, ms),
    }


def _exterior_problem(ctx):
    ext = ctx.cfg["exterior"]
    n = ctx.grid.n
    asym = ext["asymptote"]
    if asym == "zero":
        asymptote = Asymptote.zero(n)
    else:
        _check_keys(asym, {"A", "b", "corrector"}, "exterior.asymptote")
        A = _matrix(asym.get("A", ctx.cfg["A"]), n, "exterior.asymptote.A")
        b = np.asarray(asym.get("b", [0.0] * n), dtype=float)
        v = solve_cell(ctx.problem(A)).v if asym.get("corrector", False) else None
        asymptote = Asymptote(A, b, v)
    f = ctx.f_expr if not ctx.f_expr.is_constant else float(ctx.f_expr(*np.zeros(n)))
    phi = ext["phi"]
    phi = phi if isinstance(phi, (int, float)) else parse_field(phi, n)
    return ExteriorProblem(
        ctx.op, n, float(ext["rho_in"]), float(ext["R"]), phi, f, asymptote,
        int(ext["points"]), int(ext["n_theta"]),
    )


def cmd_exterior_solve(ctx, args):
    ext = ctx.cfg["exterior"] if "exterior" in ctx.cfg else None
    if ext is None:
        ctx.cfg["exterior"] = ext = dict(EXTERIOR_DEFAULTS)
    prob = _exterior_problem(ctx)
    sol = solve_exterior(prob, ext["mode"])
    out = {"mode": ext["mode"], "decay_hypothesis": prob.decay_hypothesis}
    if ext["mode"] == "annular":
        out["report"] = sol.report
        return out
    report = decay_fit(sol, float(ext["fit_r0"]))
    out.update({"decay": report.as_dict(), "predicted_exponent": prob.decay_exponent,
                "policy_iterations": sol.policy_iterations})
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["r", "U", "U-w", "|U-w-c*|"])
            for r, u, d in zip(sol.r, sol.U, sol.diff):
                writer.writerow([repr(float(r)), repr(float(u)), repr(float(d)), repr(abs(float(d) - report.c_star))])
    return out


def cmd_liouville_check(ctx, args):
    liou = ctx.cfg.get("liouville")
    if liou is None:
        raise ConfigError("liouville-check needs a 'liouville' block")
    n = ctx.grid.n
    A = _matrix(liou["A"] if liou["A"] is not None else ctx.cfg["A"], n, "liouville.A")
    b = np.zeros(n) if liou["b"] is None else np.asarray(liou["b"], dtype=float)
    if liou["periodic"] == "cell":
        periodic = solve_cell(ctx.problem(A)).v
    elif liou["periodic"] in (None, "none"):
        periodic = None
    else:
        periodic = parse_field(liou["periodic"], n)
    s = SampledSolution.from_parts(A, b, float(liou["c"]), periodic, float(liou["R_max"]))
    report = decompose(s, ctx.grid, n_base=int(liou["n_base"]))
    if liou["check_A"] is not None:
        report.A = _matrix(liou["check_A"], n, "liouville.check_A")
    verify_decomposition(report, ctx.effective_operator())
    if args.dump_v:
        dump_grid_function(report.v, args.dump_v)
    out = report.as_dict()
    if liou["growth_p"] is not None:
        ratios = hessian_growth_ratio(s, float(liou["growth_p"]))
        out["growth_ratios"] = {repr(k): v for k, v in ratios.items()}
    return out


COMMANDS = {
    "cell-solve": cmd_cell_solve,
    "effective-op": cmd_effective_op,
    "props-check": cmd_props_check,
    "invariant-measure": cmd_invariant_measure,
    "exterior-solve": cmd_exterior_solve,
    "liouville-check": cmd_liouville_check,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="cellhom", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", help="write the JSON summary here instead of stdout")
        if name in ("cell-solve", "liouville-check"):
            p.add_argument("--dump-v", help="write the corrector as a grid-function dump")
        if name == "invariant-measure":
            p.add_argument("--dump-m", help="write the measure as a grid-function dump")
        if name == "exterior-solve":
            p.add_argument("--csv", help="write the radius/value table as CSV")
        if name == "props-check":
            p.add_argument("--probes", type=int, default=20)
            p.add_argument("--seed", type=int, required=True)
            p.add_argument("--kind", choices=("ellipticity", "concavity", "convexity"), default="ellipticity")
    return parser


def _emit(payload, path=None):
    text = json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        cfg = resolve_config(raw)
        ctx = Context(cfg)
        result = COMMANDS[args.command](ctx, args)
    except (OSError, json.JSONDecodeError) as exc:
        _emit({"error": type(exc).__name__, "detail": str(exc)})
        return 2
    except SolverError as exc:
        _emit({"error": type(exc).__name__, "detail": str(exc)})
        return 3
    except CellhomError as exc:
        _emit({"error": type(exc).__name__, "detail": str(exc)})
        return 2
    _emit({"schema_version": SCHEMA_VERSION, "command": args.command, "config": cfg, "result": result}, args.out)
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
