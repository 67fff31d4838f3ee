"""Command-line front end.

    pairsim <command> --params FILE [--set key=value ...] [--out PATH] ...

Every command writes CSV or JSON to ``--out`` (or stdout).  Commands with a
natural picture also write a PNG next to the output file, named after it.
Exit status: 0 on success, 2 for invalid input, 3 for a numerical failure.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import closed_form, ctmc, dynamics, fluctuations, fluid, schemas
from .errors import NumericalError, ValidationError
from .inputs import apply_overrides, counts_from_doc, fractions_from_doc, load_document, params_from_doc
from .model import check_fine_balance, classify_2x2, fine_balance_defect

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 2, 3
COMMANDS = ("simulate", "fluid", "pattern", "classify", "fine-balance", "sym2x2",
            "converge", "clt", "levelcurves")


def worker_count() -> int:
    """Thread count: CPU count, capped by ``PAIRSIM_THREADS``."""
    n = os.cpu_count() or 1
    cap = os.environ.get("PAIRSIM_THREADS")
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError as exc:
            raise ValidationError(f"PAIRSIM_THREADS={cap!r} is not an integer") from exc
    return n


def _int_list(text: str) -> list[int]:
    try:
        out = [int(float(v)) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad integer list {text!r}") from exc
    if not out or min(out) < 1:
        raise argparse.ArgumentTypeError("list entries must be positive")
    return out


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi, steps = text.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"grid must be lo:hi:steps, got {text!r}") from exc
    if steps < 2 or not hi > lo:
        raise argparse.ArgumentTypeError("grid needs hi > lo and at least 2 steps")
    return np.linspace(lo, hi, steps)


def _seed(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pairsim", description="Poisson encounter-mating model toolkit")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--params", help="JSON parameter file")
    parser.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                        help="override a top-level key of the parameter file (JSON value)")
    parser.add_argument("--out", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), help="output format where both exist")
    parser.add_argument("--figure", help="PNG path (default: output path with .png suffix)")
    parser.add_argument("--no-figure", action="store_true", help="do not write a figure")
    parser.add_argument("--seed", type=_seed, default=0)
    parser.add_argument("--replicates", type=int)
    parser.add_argument("--n", type=int, help="population size")
    parser.add_argument("--n-list", type=_int_list, default=[100, 1000, 10000])
    parser.add_argument("--eps", type=float, default=1e-8)
    parser.add_argument("--rtol", type=float, default=1e-10)
    parser.add_argument("--t-end", type=float)
    parser.add_argument("--dt", type=float, default=1e-3)
    parser.add_argument("--grid", type=_grid, default=np.linspace(0.0, 2.0, 41))
    parser.add_argument("--coords", choices=("q", "replicator"), default="q",
                        help="fluid: integrate in pair masses or in (A, B, Z) coordinates")
    return parser


# -- emission ----------------------------------------------------------------------------


def _dump_json(doc: dict, schema: str) -> str:
    schemas.validate(doc, schema)
    return json.dumps(doc, indent=2) + "\n"


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")
    return buf.getvalue()


class Outputs:
    def __init__(self, args):
        self.out = Path(args.out) if args.out else None
        if args.no_figure:
            self.figure = None
        elif args.figure:
            self.figure = Path(args.figure)
        elif self.out is not None:
            self.figure = self.out.with_suffix(".png")
        else:
            self.figure = None

    def write(self, text: str) -> None:
        if self.out is None:
            sys.stdout.write(text)
        else:
            self.out.parent.mkdir(parents=True, exist_ok=True)
            self.out.write_text(text)


# -- commands -------------------------------------------------------------------------------


def cmd_simulate(args, doc, outs: Outputs) -> None:
    params = params_from_doc(doc)
    pop = counts_from_doc(doc, args.n)
    reps = args.replicates or 1
    t_max = args.t_end if args.t_end is not None else math.inf
    if reps == 1:
        config = ctmc.SimConfig(seed=args.seed, t_max=t_max)
        traj = ctmc.simulate(params, pop, config)
        if args.format == "json":
            outs.write(_dump_json(traj.to_json(), "trajectory"))
        else:
            outs.write(traj.to_csv())
        if outs.figure and pop.n > 0:
            from .plotting import plot_trajectory
            t_end = float(traj.times[-1]) if len(traj.times) else 1.0
            sol = fluid.integrate_fluid(params, pop.fractions, t_end)
            ts = np.linspace(0, t_end, 200)
            plot_trajectory(traj.times, traj.states(), pop.n, ts, sol(ts), outs.figure)
        return
    config = ctmc.SimConfig(seed=args.seed, t_max=t_max, record_mode="pattern")
    with ThreadPoolExecutor(max_workers=worker_count()) as ex:
        trajs = list(ex.map(lambda r: ctmc.simulate(params, pop, config, r), range(reps)))
    pats = np.array([t.pattern for t in trajs], dtype=float)
    doc_out = {
        "n": pop.n,
        "replicates": reps,
        "seed": args.seed,
        "mean_pattern": pats.mean(axis=0).tolist(),
        "se_pattern": (pats.std(axis=0, ddof=1) / math.sqrt(reps)).tolist(),
        "patterns": pats.astype(int).tolist(),
    }
    outs.write(_dump_json(doc_out, "ensemble"))


def cmd_fluid(args, doc, outs: Outputs) -> None:
    params = params_from_doc(doc)
    fr = fractions_from_doc(doc)
    t_end = args.t_end if args.t_end is not None else 5.0
    k = params.k
    if args.coords == "replicator":
        sol = dynamics.integrate_replicator(params, fr, t_end, rtol=args.rtol)
        header = (["t"] + [f"A{i + 1}" for i in range(k)] + [f"B{j + 1}" for j in range(k)] + ["Z"]
                  + [f"Q{i + 1}{j + 1}" for i in range(k) for j in range(k)])
        rows = [[t, *a, *b, z, *q.ravel()] for t, a, b, z, q in zip(sol.times, sol.A, sol.B, sol.Z, sol.Q)]
        outs.write(_csv(header, rows))
        times, q = sol.times, sol.Q
    else:
        sol = fluid.integrate_fluid(params, fr, t_end, rtol=args.rtol)
        outs.write(sol.to_csv())
        times, q = sol.times, sol.q
    if outs.figure:
        from .plotting import plot_fluid
        plot_fluid(times, q, outs.figure)


def cmd_pattern(args, doc, outs: Outputs) -> None:
    params = params_from_doc(doc)
    fr = fractions_from_doc(doc)
    Q, bound = fluid.mating_pattern_limit(params, fr, eps=args.eps, rtol=args.rtol)
    outs.write(_dump_json({"pattern": Q.tolist(), "error_bound": bound, "eps": args.eps}, "pattern"))


def cmd_classify(args, doc, outs: Outputs) -> None:
    params = params_from_doc(doc)
    pi = params.pi
    cls = classify_2x2(params)
    d = float(pi[0, 0] + pi[1, 1] - pi[0, 1] - pi[1, 0])
    outs.write(_dump_json({"class": cls.value, "curvature": d}, "classify"))


def cmd_fine_balance(args, doc, outs: Outputs) -> None:
    params = params_from_doc(doc)
    dec = check_fine_balance(params)
    pattern = None
    if dec is not None and ({"x_frac", "x"} & doc.keys()):
        fr = fractions_from_doc(doc)
        pattern = np.outer(fr.x, fr.y).tolist()
    out = {
        "fine_balance": dec is not None,
        "defect": fine_balance_defect(params.pi),
        "alpha_bar": dec.alpha_bar.tolist() if dec is not None else None,
        "beta_bar": dec.beta_bar.tolist() if dec is not None else None,
        "pattern": pattern,
    }
    outs.write(_dump_json(out, "fine-balance"))


def cmd_sym2x2(args, doc, outs: Outputs) -> None:
    params = params_from_doc(doc)
    fr = fractions_from_doc(doc)
    report = closed_form.sym2x2_report(params, fr)
    if args.t_end is not None:
        sol = closed_form.sym2x2_solution(params, fr)
        report["t"] = args.t_end
        if report["case"] == "FineBalance":
            _, _, _, Q = closed_form.fine_balance_eval(closed_form.fine_balance_solution(params, fr), args.t_end)
            report["q12_t"] = float(Q[0, 1])
        else:
            report["q12_t"] = closed_form.q12_of_t(sol, args.t_end)
    outs.write(_dump_json(report, "sym2x2"))


def cmd_converge(args, doc, outs: Outputs) -> None:
    params = params_from_doc(doc)
    fr = fractions_from_doc(doc)
    t_end = args.t_end if args.t_end is not None else 3.0
    reps = args.replicates or 10
    sol = fluid.integrate_fluid(params, fr, t_end)
    config = ctmc.SimConfig(seed=args.seed, t_max=t_end)

    def run(r):
        trajs = ctmc.simulate_coupled(params, fr, args.n_list, config, replicate=r)
        return [ctmc.sup_norm_error(tr, sol, t_end) for tr in trajs]

    with ThreadPoolExecutor(max_workers=worker_count()) as ex:
        errors = np.array(list(ex.map(run, range(reps))))
    med = np.median(errors, axis=0)
    if args.format == "json":
        doc_out = {"t_end": t_end, "n_list": list(args.n_list), "seeds": list(range(reps)),
                   "errors": errors.tolist(), "median": med.tolist()}
        outs.write(_dump_json(doc_out, "converge"))
    else:
        rows = [[r, n, errors[r, c]] for r in range(reps) for c, n in enumerate(args.n_list)]
        outs.write(_csv(["replicate", "n", "sup_error"], rows))
    if outs.figure:
        from .plotting import plot_converge
        plot_converge(args.n_list, errors, outs.figure)


def cmd_clt(args, doc, outs: Outputs) -> None:
    params = params_from_doc(doc)
    fr = fractions_from_doc(doc)
    n = args.n or 10000
    t = args.t_end if args.t_end is not None else 1.0
    reps = args.replicates or 10000
    rep = fluctuations.empirical_fluctuations(params, fr, n, t, reps, args.seed, dt=args.dt,
                                              workers=worker_count())
    outs.write(_dump_json(rep.to_json(), "clt"))
    if outs.figure:
        from .plotting import plot_covariance
        plot_covariance(rep.cov_empirical, rep.cov_limit, outs.figure, n, t)


def cmd_levelcurves(args, doc, outs: Outputs) -> None:
    pi12 = float(doc.get("pi12", 0.5))
    x1 = float(doc.get("x1", 0.5))
    if not pi12 > 0 or not 0 < x1 < 1:
        raise ValidationError("levelcurves needs pi12 > 0 and 0 < x1 < 1")
    values = args.grid
    grid = closed_form.level_curve_grid(pi12, x1, values)
    rows = [[values[i], values[j], grid[i, j]] for i in range(len(values)) for j in range(len(values))]
    outs.write(_csv(["pi11", "pi22", "q12_inf"], rows))
    if outs.figure:
        from .plotting import plot_level_curves
        plot_level_curves(values, grid, outs.figure, pi12)


HANDLERS = {
    "simulate": cmd_simulate,
    "fluid": cmd_fluid,
    "pattern": cmd_pattern,
    "classify": cmd_classify,
    "fine-balance": cmd_fine_balance,
    "sym2x2": cmd_sym2x2,
    "converge": cmd_converge,
    "clt": cmd_clt,
    "levelcurves": cmd_levelcurves,
}


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        if args.replicates is not None and args.replicates < 1:
            raise ValidationError("--replicates must be positive")
        doc = apply_overrides(load_document(args.params), args.overrides)
        HANDLERS[args.command](args, doc, Outputs(args))
    except ValidationError as exc:
        print(f"pairsim: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"pairsim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except Exception as exc:  # schema or malformed-input errors from third-party code
        import jsonschema
        if isinstance(exc, (jsonschema.ValidationError, TypeError, KeyError, ValueError)):
            print(f"pairsim: invalid input: {exc}", file=sys.stderr)
            return EXIT_INVALID
        raise
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
