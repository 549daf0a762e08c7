"""Command-line front end: scenarios in, classifier/oracle/demo reports out.

Subcommands: ``classify`` (run a scenario's analyses), ``sweep`` (per-level
reports over a refinement family plus a CSV summary), ``recognize``
(projection-hypothesis checks and structure recovery), ``demo`` (gallery
examples: product, kernel, laplace, convolution), ``audit`` (classify with
oracle flags treated as fatal).  Exit codes: 0 ok, 2 validation error,
3 failed theorem-implication check, 4 flagged oracle result under
--strict-oracle.  The seed defaults to $CONDOP_SEED; --seed wins.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import examples_gallery as gallery
from .runner import (
    EXIT_OK,
    EXIT_ORACLE_FLAGGED,
    EXIT_VALIDATION,
    RunResult,
    run_scenario,
    run_sweep,
)
from .scenario import canonical_bytes

SEED_ENV_VAR = "CONDOP_SEED"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        return 0


def _common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int, default=None, help=f"override scenario seed (default ${SEED_ENV_VAR})")
    sub.add_argument("--out", metavar="DIR", default=None, help="directory for report files")
    sub.add_argument("--strict-oracle", action="store_true",
                     help="treat flagged oracle results as fatal (exit 4)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="condop",
                                     description="weighted conditional operator laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, text in (
        ("classify", "run a scenario's requested analyses"),
        ("audit", "classify with every oracle flag treated as fatal"),
        ("recognize", "projection hypotheses and structure recovery for a scenario"),
    ):
        s = sub.add_parser(name, help=text)
        s.add_argument("scenario", help="scenario JSON file")
        _common_flags(s)

    s = sub.add_parser("sweep", help="per-level reports over a dyadic refinement family")
    s.add_argument("scenario", help="scenario JSON file (dyadic space, symbolic u)")
    s.add_argument("--levels", nargs=2, type=int, metavar=("LO", "HI"), default=None)
    _common_flags(s)

    s = sub.add_parser("demo", help="gallery examples")
    s.add_argument("name", choices=["product", "kernel", "laplace", "convolution"])
    s.add_argument("--a", type=float, default=1.0, help="decay rate for the laplace demo")
    s.add_argument("--probes", default="0.5,1,2", help="comma-separated positive x probes")
    s.add_argument("--t-max", type=float, default=40.0)
    s.add_argument("--step", type=float, default=1e-3)
    _common_flags(s)
    return parser


def _emit(result: RunResult) -> int:
    sys.stdout.write(result.body_bytes.decode("utf-8") if result.body_bytes
                     else json.dumps(result.body, indent=2, sort_keys=True) + "\n")
    for path in result.files:
        sys.stderr.write(f"wrote {path}\n")
    return result.exit_code


def _demo(args) -> int:
    probes = tuple(float(x) for x in str(args.probes).split(",") if x)
    if args.name == "laplace":
        report = gallery.laplace_demo(args.a, probes, t_max=args.t_max, step=args.step)
        body = report.to_dict()
        print(f"Laplace transform of exp(-{args.a} t), truncated at T={args.t_max}, step h={args.step}")
        print(f"{'x':>8} {'computed':>20} {'exact 1/(x+a)':>20} {'abs error':>12}")
        for row in report.rows:
            print(f"{row.x:8.3f} {row.computed:20.12f} {row.exact:20.12f} {row.abs_error:12.3e}")
        print(f"two-path residual {report.two_path_residual:.3e}; "
              f"empirical budget constant C = {report.c_empirical:.3g}")
    elif args.name == "product":
        x = np.linspace(0.0, 1.0, 21)
        y = np.linspace(0.0, 1.0, 101)
        grid = gallery.product_grid(x, y)
        f = grid.sample(lambda xx, yy: xx * yy)
        ef = gallery.product_condexp(grid, f)
        along_x = grid.column_values(ef).real
        body = {"x": x.tolist(), "E(f)(x)": along_x.tolist(),
                "exact": (x / 2).tolist(),
                "max_error": float(np.max(np.abs(along_x - x / 2)))}
        print("E(x*y | first coordinate) on the unit square (exact: x/2)")
        print(f"max error over columns: {body['max_error']:.3e}")
    elif args.name == "kernel":
        y = np.linspace(0.0, 1.0, 201)
        spec = gallery.KernelSpec(lambda a, b: np.cos(a * b), t_max=1.0, step=0.005,
                                  x_probes=probes)
        out = gallery.kernel_as_condexp(spec, np.sin(np.pi * y))
        body = {"x": list(out.x), "values": [v.real for v in out.values],
                "two_path_residual": out.residual}
        print("integral operator with kernel cos(x y) applied to sin(pi t)")
        for xv, val in zip(out.x, out.values):
            print(f"  x={xv:6.3f}  (Tf)(x) = {val.real:.10f}")
        print(f"two-path residual {out.residual:.3e}")
    else:  # convolution
        w = [0.0] * 8
        w[0] = 1.0
        signal = np.arange(8, dtype=float)
        out = gallery.convolution_demo(w, signal)
        body = {"weights": w, "signal": signal.tolist(),
                "result": [v.real for v in out.values],
                "two_path_residual": out.residual}
        print("cyclic convolution on Z_8 with w = delta_0 (identity)")
        print("result:", np.round(out.values.real, 12).tolist())
        print(f"two-path residual {out.residual:.3e}")

    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"demo_{args.name}.json")
        with open(path, "wb") as fh:
            fh.write(canonical_bytes(body))
        sys.stderr.write(f"wrote {path}\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    default_seed = _default_seed()
    if args.command == "demo":
        return _demo(args)
    if args.command == "sweep":
        result = run_sweep(args.scenario, levels=tuple(args.levels) if args.levels else None,
                           seed=args.seed, out_dir=args.out,
                           strict_oracle=args.strict_oracle, default_seed=default_seed)
        return _emit(result)

    doc = None
    if args.command == "recognize":
        from .scenario import load_json
        try:
            doc = load_json(args.scenario)
        except Exception:
            doc = None
        if isinstance(doc, dict):
            doc = dict(doc)
            doc["analyses"] = ["recognize"]
    strict = args.strict_oracle or args.command == "audit"
    result = run_scenario(doc if doc is not None else args.scenario, seed=args.seed,
                          out_dir=args.out, strict_oracle=strict, default_seed=default_seed)
    return _emit(result)


if __name__ == "__main__":
    sys.exit(main())
