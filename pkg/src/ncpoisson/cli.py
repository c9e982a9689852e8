"""Command-line front end: ``verify``, ``converge``, ``flow`` and ``dump``.

Exit status: 0 when every check passes, 1 when any check fails, 2 on usage
or configuration errors.
"""
from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import classical as cl
from . import foliation as fol
from .report import (
    CONVERGENCE_CHECKS,
    DENSITIES,
    H_PRESETS,
    SUITES,
    ConfigError,
    build_model,
    convergence_study,
    flow_demo,
    resolve_config,
    run_suite,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text: str) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    return [int(v) for v in vals]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration (CLI > --config file > defaults)")
    g.add_argument("--config", help="JSON or key=value configuration file")
    g.add_argument("--theta", type=float, help="torus rotation parameter")
    g.add_argument("--truncation", type=int, help="torus mode box |n|,|m| <= N")
    g.add_argument("--p", type=int, help="leaf dimension")
    g.add_argument("--q", type=int, help="base dimension (even)")
    g.add_argument("--grid", type=int, help="grid points per direction")
    g.add_argument("--refine-grid", type=int, help="finer grid for the witness refinement check (0 skips)")
    g.add_argument("--density", choices=DENSITIES, help="leafwise density preset")
    g.add_argument("--coefficients", help="JSON list of Fourier terms for the userfourier density")
    g.add_argument("--h", choices=H_PRESETS, help="Hamiltonian preset on the base")
    g.add_argument("--seed", type=int, help="RNG seed")
    g.add_argument("--tol", type=float, help="override every tolerance")
    g.add_argument("--samples", type=int, help="random cochains per algebra / classical sample points")
    g.add_argument("--triples", type=int, help="torus triples")
    g.add_argument("--x-modes", type=int, help="leafwise bandwidth of random kernels")
    g.add_argument("--y-modes", type=int, help="transverse bandwidth of random kernels")


CONFIG_KEYS = (
    "theta", "truncation", "p", "q", "grid", "refine_grid", "density", "coefficients",
    "h", "seed", "tol", "samples", "triples", "x_modes", "y_modes",
)


def _config(args):
    return resolve_config({k: getattr(args, k) for k in CONFIG_KEYS}, args.config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncpoisson", description="Numerical checks for noncommutative Poisson structures.")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run a verification suite")
    v.add_argument("suite", choices=SUITES + ("all",))
    v.add_argument("--out", help="write the JSON report here")
    v.add_argument("--quiet", action="store_true", help="print only the final summary line")
    _add_config_flags(v)

    c = sub.add_parser("converge", help="residual versus grid size")
    c.add_argument("check", choices=CONVERGENCE_CHECKS)
    c.add_argument("--grids", type=_ints, default=[8, 16, 32], help="comma-separated grid sizes")
    c.add_argument("--out", help="write the CSV table here")
    _add_config_flags(c)

    f = sub.add_parser("flow", help="integrate a classical Hamiltonian flow")
    f.add_argument("system", choices=sorted(cl.BUILTIN_SYSTEMS) + ["userpolynomial"])
    f.add_argument("--x0", type=_floats, required=True, help="comma-separated initial point")
    f.add_argument("--T", type=float, default=2 * math.pi, help="final time")
    f.add_argument("--dt", type=float, default=1e-2, help="time step")
    f.add_argument("--spec", help="JSON polynomial spec for userpolynomial")
    f.add_argument("--record-every", type=int, default=1)
    f.add_argument("--out", help="trajectory CSV")

    d = sub.add_parser("dump", help="write a kernel or the density fields as CSV")
    d.add_argument("what", choices=["kernel", "field"])
    d.add_argument("--out", required=True)
    _add_config_flags(d)
    return parser


def _verify(args) -> int:
    report = run_suite(args.suite, _config(args))
    lines = report.summary_lines()
    print("\n".join(lines[-1:] if args.quiet else lines))
    if args.out:
        report.write(args.out)
    return report.exit_code


def _converge(args) -> int:
    table = convergence_study(args.check, args.grids, _config(args))
    for n, r, o in zip(table.grids, table.residuals, table.orders):
        print(f"grid {n:4d}  residual {r:.3e}  order {'-' if o is None else f'{o:.2f}'}")
    print(f"monotone: {table.monotone}")
    if args.out:
        table.write_csv(args.out)
    return EXIT_OK if table.monotone else EXIT_FAIL


def _flow(args) -> int:
    if args.dt <= 0 or args.T <= 0 or args.record_every < 1:
        raise ConfigError("T, dt and record-every must be positive")
    summary = flow_demo(args.system, args.x0, args.T, args.dt, args.out, args.spec, args.record_every)
    print(json.dumps(summary, sort_keys=True, indent=2))
    return EXIT_OK


def _dump(args) -> int:
    cfg = _config(args)
    model = build_model(cfg)
    if args.what == "kernel":
        k = fol.random_kernel(model, np.random.default_rng(cfg.seed), cfg.x_modes, cfg.y_modes)
        fol.dump_kernel_csv(k, args.out)
    else:
        kappa = fol.mean_curvature_form(model)
        stack = np.concatenate([model.density[None], kappa])
        names = ("density",) + tuple(f"kappa{j + 1}" for j in range(model.q))
        fol.dump_field_csv(model, stack, args.out, names)
    print(f"wrote {args.out}")
    return EXIT_OK


COMMANDS = {"verify": _verify, "converge": _converge, "flow": _flow, "dump": _dump}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, cl.ClassicalError, fol.FoliationError, json.JSONDecodeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
