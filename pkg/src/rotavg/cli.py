"""Command-line interface.

Subcommands: ``solve`` a pose graph with a certificate, ``certify`` an
external candidate, ``cycle`` for closed-form optima and stationary costs,
``spectrum`` for closed-form versus numeric adjacency spectra, ``generate``
for synthetic problems, and ``bench`` for the cycle benchmark grid.

Output goes to stdout either as human-readable tables (``--format human``)
or as JSON records, one per line (``--format records``).  All randomness is
controlled by ``--seed``; timing fields are reported for information only
and are the one part of the output that varies between runs.  Exit status:
0 when the requested analysis completed (a negative certification verdict
is still a completed analysis), 2 when the solver failed to converge, 1 on
any input or module error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .certify import certify_solution
from .cycle import (
    adjacency_spectrum,
    closed_form_stationary,
    cycle_error,
    from_pose_graph,
    to_pose_graph,
)
from .errors import RotavgError
from .geom import angle_axis_of
from .graph import assemble_connection, fiedler_value
from .io import export_solution, load_g2o, parse_solution, write_g2o
from .solver import SolveOptions, primal_dual_solve
from .synth import NoiseSpec, make_cycle_problem, make_random_problem

BENCH_CYCLE_SIZES = (20, 50, 100, 200)
BENCH_CYCLE_SIGMAS = (0.2, 0.5)


def _emit(args, record: dict, human: str) -> None:
    if args.format == "records":
        print(json.dumps(record, sort_keys=True))
    else:
        print(human)


def _solve_options(args) -> SolveOptions:
    return SolveOptions(max_iterations=args.max_iter, epsilon=args.eps, sigma=args.sigma)


def _add_common(parser: argparse.ArgumentParser, eps_default: float = 1e-15) -> None:
    parser.add_argument("--eps", type=float, default=eps_default,
                        help="certificate tolerance (default %(default)g)")
    parser.add_argument("--max-iter", type=int, default=100, help="iteration budget")
    parser.add_argument("--sigma", type=float, default=-1e-3,
                        help="eigensolver shift target (negative)")
    parser.add_argument("--seed", type=int, default=0, help="random seed")
    parser.add_argument("--format", choices=("human", "records"), default="human")
    parser.add_argument("--out", type=str, default=None, help="output file path")


def _cmd_solve(args) -> int:
    graph = load_g2o_path(args.input)
    result = primal_dual_solve(graph, _solve_options(args))
    adjacency, _, _ = assemble_connection(graph)
    certificate = certify_solution(result.state.rotations, adjacency, epsilon=max(args.eps, 1e-12))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(export_solution(result.state.rotations, certificate, result.trace))
    record = {
        "n": graph.n_vertices,
        "m": graph.n_edges,
        "iterations": result.state.iteration,
        "cost": result.state.cost,
        "lambda_min": result.state.lambda_min,
        "certified": result.certified,
        "converged": result.converged,
        "kkt_residual": certificate.kkt_residual,
        "time_s": sum(r.wall_time_ns for r in result.trace) * 1e-9,
    }
    human = (
        f"n={record['n']} m={record['m']} iterations={record['iterations']}\n"
        f"cost      {record['cost']:.6f}\n"
        f"lambda_1  {record['lambda_min']:.3e}\n"
        f"kkt       {record['kkt_residual']:.3e}\n"
        f"certified {record['certified']}  converged {record['converged']}\n"
        f"time      {record['time_s']:.3f}s"
    )
    _emit(args, record, human)
    return 0 if result.converged else 2


def _cmd_certify(args) -> int:
    graph = load_g2o_path(args.graph)
    with open(args.solution, "r", encoding="utf-8") as handle:
        solution = parse_solution(handle)
    adjacency, _, _ = assemble_connection(graph)
    certificate = certify_solution(solution.rotations, adjacency, epsilon=args.eps)
    record = {
        "n": graph.n_vertices,
        "lambda_small": [float(v) for v in certificate.lambda_small],
        "gap_lower_bound": certificate.gap_lower_bound,
        "kkt_residual": certificate.kkt_residual,
        "certified": certificate.is_certified,
        "epsilon": certificate.epsilon,
    }
    human = (
        f"lambda_small {np.array2string(certificate.lambda_small, precision=3)}\n"
        f"gap bound    {certificate.gap_lower_bound:.3e}\n"
        f"kkt residual {certificate.kkt_residual:.3e}\n"
        f"certified    {certificate.is_certified} (eps={certificate.epsilon:g})"
    )
    _emit(args, record, human)
    return 0


def _cmd_cycle(args) -> int:
    problem = from_pose_graph(load_g2o_path(args.input))
    gamma = angle_axis_of(cycle_error(problem)).angle
    points = [closed_form_stationary(problem, k) for k in range(problem.n)]
    if args.format == "records":
        for point in points:
            print(json.dumps({
                "k": point.index,
                "residual_angle": gamma / problem.n - 2.0 * np.pi * point.index / problem.n,
                "cost": point.cost,
                "optimal": point.index == 0,
            }, sort_keys=True))
    else:
        print(f"cycle of {problem.n} vertices, error angle {gamma:.6f}")
        print(f"global optimum (k=0): cost {points[0].cost:.6f}")
        print(" k  cost")
        for point in points:
            print(f"{point.index:3d}  {point.cost:.6f}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(export_solution(points[0].rotations))
    return 0


def _cmd_spectrum(args) -> int:
    graph = load_g2o_path(args.input)
    problem = from_pose_graph(graph)
    closed = adjacency_spectrum(problem)
    adjacency, _, _ = assemble_connection(graph)
    numeric = np.sort(np.linalg.eigvalsh(adjacency.to_dense()))
    worst = float(np.max(np.abs(closed - numeric)))
    if args.format == "records":
        for c, m in zip(closed, numeric):
            print(json.dumps({"closed_form": float(c), "numeric": float(m)}, sort_keys=True))
        print(json.dumps({"max_abs_difference": worst}, sort_keys=True))
    else:
        print(" closed-form      numeric")
        for c, m in zip(closed, numeric):
            print(f"{c: .10f}  {m: .10f}")
        print(f"max |difference| = {worst:.3e}")
    return 0


def _cmd_generate(args) -> int:
    noise = NoiseSpec(sigma=args.noise, seed=args.seed)
    if args.kind == "cycle":
        problem, _ = make_cycle_problem(args.n, noise)
        graph = to_pose_graph(problem)
        record = {"kind": "cycle", "n": graph.n_vertices, "m": graph.n_edges,
                  "sigma": args.noise, "seed": args.seed}
    else:
        generated = make_random_problem(args.n, args.density, noise)
        graph = generated.graph
        record = {"kind": "random", "n": graph.n_vertices, "m": graph.n_edges,
                  "sigma": args.noise, "seed": args.seed, "density": args.density,
                  "fiedler_value": generated.fiedler_value,
                  "adjacency_gap": generated.adjacency_gap}
    text = write_g2o(graph)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    _emit(args, record, f"generated {record['kind']} graph: n={record['n']} m={record['m']}")
    return 0


def _cmd_bench(args) -> int:
    if args.grid != "cycles":
        raise RotavgError(f"unknown benchmark grid {args.grid!r}")
    options = SolveOptions(max_iterations=args.max_iter, epsilon=args.eps, sigma=args.sigma)
    rows = []
    for n in BENCH_CYCLE_SIZES:
        for sigma in BENCH_CYCLE_SIGMAS:
            for seed in range(args.seeds):
                problem, _ = make_cycle_problem(n, NoiseSpec(sigma=sigma, seed=args.seed + seed))
                graph = to_pose_graph(problem)
                started = time.perf_counter()
                result = primal_dual_solve(graph, options)
                elapsed = time.perf_counter() - started
                closed = closed_form_stationary(problem, 0).cost
                rows.append({
                    "n": n, "m": graph.n_edges, "sigma": sigma, "seed": args.seed + seed,
                    "iterations": result.state.iteration,
                    "lambda_min": result.state.lambda_min,
                    "cost": result.state.cost,
                    "closed_form_cost": closed,
                    "certified": result.certified,
                    "time_s": elapsed,
                })
    if args.format == "records":
        for row in rows:
            print(json.dumps(row, sort_keys=True))
    else:
        print("   n   sigma  |lambda_1|      f*            closed-form     t(s)")
        for n in BENCH_CYCLE_SIZES:
            for sigma in BENCH_CYCLE_SIGMAS:
                cell = [r for r in rows if r["n"] == n and r["sigma"] == sigma]
                lam = max(abs(r["lambda_min"]) for r in cell)
                dcost = max(abs(r["cost"] - r["closed_form_cost"]) for r in cell)
                tmean = sum(r["time_s"] for r in cell) / len(cell)
                fmean = sum(r["cost"] for r in cell) / len(cell)
                print(f"{n:4d}   {sigma:.1f}   {lam:9.2e}   {fmean:12.3f}   "
                      f"(max dev {dcost:.1e})   {tmean:.3f}")
    bad = [r for r in rows if not r["certified"]]
    return 0 if not bad else 2


def load_g2o_path(path: str):
    return load_g2o(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rotavg",
                                     description="Certifiable rotation averaging")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a pose graph with a certificate")
    p_solve.add_argument("input", help="g2o file")
    _add_common(p_solve)
    p_solve.set_defaults(func=_cmd_solve)

    p_cert = sub.add_parser("certify", help="certify an external solution file")
    p_cert.add_argument("--graph", required=True, help="g2o file")
    p_cert.add_argument("--solution", required=True, help="solution file")
    _add_common(p_cert, eps_default=1e-10)
    p_cert.set_defaults(func=_cmd_certify)

    p_cycle = sub.add_parser("cycle", help="closed-form optimum and stationary costs")
    p_cycle.add_argument("input", help="g2o file containing a simple cycle")
    _add_common(p_cycle)
    p_cycle.set_defaults(func=_cmd_cycle)

    p_spec = sub.add_parser("spectrum", help="closed-form vs numeric cycle spectrum")
    p_spec.add_argument("input", help="g2o file containing a simple cycle")
    _add_common(p_spec)
    p_spec.set_defaults(func=_cmd_spectrum)

    p_gen = sub.add_parser("generate", help="generate a synthetic problem")
    p_gen.add_argument("--kind", choices=("cycle", "random"), default="cycle")
    p_gen.add_argument("--n", type=int, required=True, help="vertex count")
    p_gen.add_argument("--noise", type=float, default=0.0, help="angle noise std (rad)")
    p_gen.add_argument("--density", type=float, default=0.3, help="edge density (random kind)")
    _add_common(p_gen)
    p_gen.set_defaults(func=_cmd_generate)

    p_bench = sub.add_parser("bench", help="run the cycle benchmark grid")
    p_bench.add_argument("--grid", default="cycles", help="benchmark grid name")
    p_bench.add_argument("--seeds", type=int, default=20, help="trials per cell")
    _add_common(p_bench, eps_default=1e-12)
    p_bench.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except RotavgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
