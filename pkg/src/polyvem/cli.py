"""Command-line interface: mesh generation, single solves, convergence
sweeps, and the adaptive-versus-uniform comparison.

Subcommands
-----------
mesh      generate a mesh file and print its quality report
solve     run one (mesh, order) solve to T and print `h E0h E1h`
converge  run a refinement ladder per order; emit CSV tables and an SVG plot
adaptive  compare uniform and indicator-driven refinement; emit CSV, SVG,
          and the final adaptively refined mesh

Problems are selected by catalog name or by the numeric shorthands 1, 2, 3
(variable-coefficient sine, convection-dominated, Gaussian bump), or by a
Python file that defines a module-level ``PROBLEM``.  Convergence levels of
a sweep are independent; set POLYVEM_THREADS to solve them in parallel.
"""

from __future__ import annotations

import argparse
import runpy
import sys
from pathlib import Path

from .analysis import (
    MESH_FAMILIES,
    compute_errors,
    record_to_csv,
    run_adaptive_study,
    run_convergence_sweep,
)
from .mesh import (
    compute_quality,
    generate_concave_mesh,
    generate_distorted_square_mesh,
    generate_voronoi_mesh,
    read_mesh,
    write_mesh,
)
from .problems import PROBLEM_NAMES, SobolevProblem, get_problem
from .svgplot import Curve, loglog_svg
from .system import TimeStepperConfig, assemble, run_time_loop, write_solution

_EXAMPLE_IDS = {"1": "variable", "2": "convection", "3": "gaussian"}


def _resolve_problem(spec: str) -> SobolevProblem:
    if spec in _EXAMPLE_IDS:
        return get_problem(_EXAMPLE_IDS[spec])
    if spec in PROBLEM_NAMES:
        return get_problem(spec)
    path = Path(spec)
    if path.suffix == ".py" and path.exists():
        namespace = runpy.run_path(str(path))
        problem = namespace.get("PROBLEM")
        if not isinstance(problem, SobolevProblem):
            raise ValueError(f"{spec}: file must define PROBLEM as a SobolevProblem")
        return problem
    raise ValueError(
        f"unknown problem {spec!r}; expected 1|2|3, one of {sorted(PROBLEM_NAMES)}, "
        "or a .py file defining PROBLEM"
    )


def _build_mesh(args):
    family = args.family
    if family == "distorted":
        return generate_distorted_square_mesh(args.n, args.distortion, seed=args.seed)
    if family == "voronoi":
        return generate_voronoi_mesh(args.seeds, lloyd_iterations=args.lloyd, seed=args.seed)
    if family == "concave":
        return generate_concave_mesh(args.n)
    raise ValueError(f"unknown mesh family {family!r}")


def _add_mesh_flags(parser):
    parser.add_argument("--n", type=int, default=8, help="grid resolution (distorted/concave)")
    parser.add_argument("--distortion", type=float, default=0.3, help="distortion amplitude")
    parser.add_argument("--seeds", type=int, default=64, help="seed count (voronoi)")
    parser.add_argument("--lloyd", type=int, default=3, help="Lloyd iterations (voronoi)")
    parser.add_argument("--seed", type=int, default=0, help="random seed")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_mesh(args) -> int:
    mesh = _build_mesh(args)
    out = Path(args.output or f"{args.family}.mesh")
    write_mesh(out, mesh)
    print(f"wrote {out}")
    print(compute_quality(mesh))
    return 0


def cmd_solve(args) -> int:
    problem = _resolve_problem(args.problem)
    mesh = read_mesh(args.mesh) if args.mesh else _build_mesh(args)
    system = assemble(mesh, args.k, problem)
    result = run_time_loop(system, TimeStepperConfig(tau=args.tau, t_end=args.t_end))
    if problem.u_exact is not None and problem.grad_u_exact is not None:
        pair = compute_errors(system, result.u, result.t)
        print(f"h {pair.h:.6e} E0h {pair.e0:.6e} E1h {pair.e1:.6e}")
    else:
        print(f"h {mesh.h:.6e} (no exact solution; errors not computed)")
    out = Path(args.output or f"{problem.name}-k{args.k}.sol")
    write_solution(out, system, result)
    print(f"wrote {out}")
    return 0


def _slope_guides(orders) -> tuple:
    guides = sorted({k for k in orders} | {k + 1 for k in orders})
    return tuple(guides)


def cmd_converge(args) -> int:
    problem = _resolve_problem(args.problem)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    stem = f"{problem.name}-{args.family}"

    if args.levels < 2:
        print(
            "warning: a single level yields no EOC and no plot",
            file=sys.stderr,
        )

    curves = []
    for i, k in enumerate(args.k):
        record = run_convergence_sweep(
            problem, args.family, k, levels=args.levels, tau=args.tau,
            t_end=args.t_end, seed=args.seed,
        )
        csv_path = outdir / f"{stem}-k{k}.csv"
        csv_path.write_text(record_to_csv(record), encoding="utf-8")
        print(f"wrote {csv_path}")
        if args.levels >= 2:
            h = tuple(record.h)
            curves.append(Curve(f"E0h k={k}", h, tuple(record.e0)))
            curves.append(Curve(f"E1h k={k}", h, tuple(record.e1), dashed=True))

    if curves and args.plot:
        svg_path = outdir / f"{stem}.svg"
        svg_path.write_text(
            loglog_svg(
                curves,
                title=f"{problem.name} on {args.family} meshes",
                xlabel="h",
                ylabel="error",
                slope_guides=_slope_guides(args.k),
            ),
            encoding="utf-8",
        )
        print(f"wrote {svg_path}")
    return 0


def cmd_adaptive(args) -> int:
    problem = _resolve_problem(args.problem)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    study = run_adaptive_study(
        problem, k=args.k, cycles=args.levels, start_n=args.start_n,
        theta=args.theta, tau=args.tau, t_end=args.t_end,
    )
    stem = f"{problem.name}-adaptive-k{args.k}"

    csv_path = outdir / f"{stem}.csv"
    lines = ["strategy,level,h,dofs,active_dofs,E0h,seconds"]
    for record in (study.uniform, study.adaptive):
        for i, pair in enumerate(record.pairs):
            lines.append(
                f"{record.family},{i},{pair.h:.6e},{pair.num_dofs},"
                f"{pair.num_active},{pair.e0:.6e},{pair.seconds:.3f}"
            )
    csv_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    print(f"wrote {csv_path}")

    svg_path = outdir / f"{stem}.svg"
    svg_path.write_text(
        loglog_svg(
            [
                Curve("uniform", tuple(study.uniform.active_dofs),
                      tuple(study.uniform.e0)),
                Curve("adaptive", tuple(study.adaptive.active_dofs),
                      tuple(study.adaptive.e0)),
            ],
            title=f"{problem.name}: E0h vs active dofs",
            xlabel="active dofs",
            ylabel="E0h",
        ),
        encoding="utf-8",
    )
    print(f"wrote {svg_path}")

    mesh_path = outdir / f"{stem}-final.mesh"
    write_mesh(mesh_path, study.final_mesh)
    print(f"wrote {mesh_path}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polyvem",
        description="Virtual element solver for a Sobolev equation on polygonal meshes.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_mesh = sub.add_parser("mesh", help="generate a mesh file")
    p_mesh.add_argument("family", choices=MESH_FAMILIES)
    _add_mesh_flags(p_mesh)
    p_mesh.add_argument("-o", "--output", help="output mesh file")
    p_mesh.set_defaults(func=cmd_mesh)

    p_solve = sub.add_parser("solve", help="run one solve and report errors")
    p_solve.add_argument("--problem", default="1", help="1|2|3, catalog name, or .py file")
    p_solve.add_argument("--family", choices=MESH_FAMILIES, default="distorted")
    _add_mesh_flags(p_solve)
    p_solve.add_argument("--mesh", help="mesh file (overrides family flags)")
    p_solve.add_argument("--k", type=int, default=1, choices=(1, 2, 3))
    p_solve.add_argument("--tau", type=float, default=1e-3)
    p_solve.add_argument("--t-end", type=float, default=1.0)
    p_solve.add_argument("-o", "--output", help="output solution file")
    p_solve.set_defaults(func=cmd_solve)

    p_conv = sub.add_parser("converge", help="run a convergence sweep")
    p_conv.add_argument("--problem", default="1")
    p_conv.add_argument("--family", choices=MESH_FAMILIES, default="voronoi")
    p_conv.add_argument("--k", type=int, nargs="+", default=[1, 2, 3], choices=(1, 2, 3))
    p_conv.add_argument("--levels", type=int, default=4)
    p_conv.add_argument("--tau", type=float, default=1e-3)
    p_conv.add_argument("--t-end", type=float, default=1.0)
    p_conv.add_argument("--seed", type=int, default=0)
    p_conv.add_argument("--outdir", default="results")
    p_conv.add_argument("--no-plot", dest="plot", action="store_false")
    p_conv.set_defaults(func=cmd_converge)

    p_adapt = sub.add_parser("adaptive", help="uniform vs adaptive refinement study")
    p_adapt.add_argument("--problem", default="3")
    p_adapt.add_argument("--k", type=int, default=1, choices=(1, 2, 3))
    p_adapt.add_argument("--levels", type=int, default=4, help="refinement cycles")
    p_adapt.add_argument("--start-n", type=int, default=8)
    p_adapt.add_argument("--theta", type=float, default=0.3)
    p_adapt.add_argument("--tau", type=float, default=1e-3)
    p_adapt.add_argument("--t-end", type=float, default=1.0)
    p_adapt.add_argument("--outdir", default="results")
    p_adapt.set_defaults(func=cmd_adaptive)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # surface one parsable line, nonzero exit
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
