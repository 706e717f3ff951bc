"""Command-line interface.

Subcommands: ``generate`` (synthetic instance to file), ``solve`` (one
framework, solution file plus report row), ``oracle`` (exhaustive
reference solve), ``verify`` (feasibility check, exit 0 iff feasible),
``presolve-report`` (reduced-cost-fixing statistics), ``export-mps``,
and ``bench`` (instances x frameworks table, aligned text and CSV).

Exit codes: 0 success/feasible, 1 infeasible or failed verification,
2 usage or file-format error, 3 numeric/backend failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from typing import Optional, Sequence

from . import fileio
from .bnb import Framework, SolveConfig, solve_framework
from .core import objective, verify_solution
from .formulation import big_m_base, build_natural, build_reformulated
from .heuristic import HeuristicConfig, fixing_heuristic
from .instgen import GenParams, generate
from .lp import BackendError, InstanceInfeasibleError, get_lp_backend, solve_lp
from .mps import write_mps
from .oracle import DEFAULT_PATTERN_CAP, brute_force
from .presolve import run_rcf_pipeline

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2
EXIT_NUMERIC = 3


@dataclass(frozen=True)
class BenchRow:
    """One benchmark table row per (instance, framework)."""

    instance: str
    framework: str
    objective: Optional[float]
    nodes: int
    time_total: float
    time_heuristic: float
    time_reduced: float
    nonzeros_before: Optional[int] = None
    nonzeros_after: Optional[int] = None
    bigm_before: Optional[float] = None
    bigm_after: Optional[float] = None

    @staticmethod
    def header() -> list[str]:
        return ["ID", "Framework", "Objective", "Nodes", "Non-zeros", "MaxBig-M",
                "HTime[s]", "RTime[s]", "Time[s]"]

    def cells(self) -> list[str]:
        def opt_pair(before, after, fmt):
            if before is None:
                return "-"
            return f"{fmt(before)}->{fmt(after)}"

        return [
            self.instance,
            self.framework,
            "infeasible" if self.objective is None else f"{self.objective:.6g}",
            str(self.nodes),
            opt_pair(self.nonzeros_before, self.nonzeros_after, lambda v: str(v)),
            opt_pair(self.bigm_before, self.bigm_after, lambda v: f"{v:.2f}"),
            f"{self.time_heuristic:.2f}",
            f"{self.time_reduced:.2f}",
            f"{self.time_total:.2f}",
        ]


def format_table(rows: Sequence[BenchRow]) -> str:
    table = [BenchRow.header()] + [r.cells() for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(table[0]))]
    out = []
    for k, line in enumerate(table):
        out.append("  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip())
        if k == 0:
            out.append("  ".join("-" * w for w in widths))
    return "\n".join(out)


def write_bench_csv(rows: Sequence[BenchRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["instance", "framework", "objective", "nodes",
                         "nonzeros_before", "nonzeros_after",
                         "max_bigm_before", "max_bigm_after",
                         "htime_s", "rtime_s", "time_s"])
        for r in rows:
            writer.writerow([
                r.instance, r.framework,
                "" if r.objective is None else repr(r.objective),
                r.nodes,
                "" if r.nonzeros_before is None else r.nonzeros_before,
                "" if r.nonzeros_after is None else r.nonzeros_after,
                "" if r.bigm_before is None else repr(r.bigm_before),
                "" if r.bigm_after is None else repr(r.bigm_after),
                repr(r.time_heuristic), repr(r.time_reduced), repr(r.time_total),
            ])


def _row_from_report(instance_name: str, report) -> BenchRow:
    rcf = report.rcf
    return BenchRow(
        instance=instance_name,
        framework=report.framework,
        objective=report.objective,
        nodes=report.node_count,
        time_total=report.time_total,
        time_heuristic=report.time_heuristic,
        time_reduced=report.time_reduced,
        nonzeros_before=None if rcf is None else rcf.nonzeros_before,
        nonzeros_after=None if rcf is None else rcf.nonzeros_after,
        bigm_before=None if rcf is None else rcf.bigm_before,
        bigm_after=None if rcf is None else rcf.bigm_after,
    )


def _infeasible_row(instance_name: str, framework: str) -> BenchRow:
    return BenchRow(instance=instance_name, framework=framework, objective=None,
                    nodes=0, time_total=0.0, time_heuristic=0.0, time_reduced=0.0)


def _solve_config(args: argparse.Namespace) -> SolveConfig:
    return SolveConfig(
        lp_backend=args.lp_backend,
        sub_mip=args.sub_mip,
        heuristic=HeuristicConfig(
            zero_threshold=args.threshold,
            sub_mip_node_limit=args.sub_mip_node_limit,
            sub_mip_time_limit=args.sub_mip_time_limit,
        ),
        node_limit=args.node_limit,
        time_limit=args.time_limit,
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lp-backend", choices=["auto", "reference", "highs"], default=None,
                   help="LP engine (default: SITEPOWER_LP_BACKEND or auto)")
    p.add_argument("--sub-mip", choices=["auto", "bnb", "highs"], default="auto",
                   help="engine for the heuristic's reduced integer solve")
    p.add_argument("--threshold", type=float, default=1e-4,
                   help="heuristic rounding threshold on fractional activations")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--time-limit", type=float, default=None)
    p.add_argument("--sub-mip-node-limit", type=int, default=None)
    p.add_argument("--sub-mip-time-limit", type=float, default=None)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sitepower",
        description="Site-and-power assignment: formulations, presolve, exact solves.")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="write a synthetic instance")
    gen.add_argument("--out", required=True)
    gen.add_argument("--name", default="instance")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--transmitters", type=int, default=30)
    gen.add_argument("--testpoints", type=int, default=500)
    gen.add_argument("--area-side", type=float, default=3000.0)
    gen.add_argument("--eta", type=float, default=3.0, help="pathloss exponent")
    gen.add_argument("--delta", type=float, default=0.178, help="SINR threshold")
    gen.add_argument("--alpha-fraction", type=float, default=0.95)
    gen.add_argument("--powers", type=float, nargs="+", default=[20.0, 40.0, 80.0])
    gen.add_argument("--costs", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    gen.add_argument("--mu", type=float, default=7.998e-14)
    gen.add_argument("--scale", type=float, default=1e-10)

    slv = sub.add_parser("solve", help="solve one instance with one framework")
    slv.add_argument("instance")
    slv.add_argument("--framework", required=True,
                     help="one of " + ", ".join(fw.label for fw in Framework))
    slv.add_argument("--out", default=None, help="solution file to write")
    _add_solver_flags(slv)

    orc = sub.add_parser("oracle", help="exhaustive reference solve (small instances)")
    orc.add_argument("instance")
    orc.add_argument("--cap", type=int, default=DEFAULT_PATTERN_CAP)
    orc.add_argument("--out", default=None, help="solution file to write")

    ver = sub.add_parser("verify", help="check a solution file against an instance")
    ver.add_argument("instance")
    ver.add_argument("solution")

    pre = sub.add_parser("presolve-report", help="reduced-cost fixing statistics")
    pre.add_argument("instance")
    pre.add_argument("--formulation", choices=["N", "R"], default="N")
    _add_solver_flags(pre)

    mps = sub.add_parser("export-mps", help="write the model in MPS format")
    mps.add_argument("instance")
    mps.add_argument("--out", required=True)
    mps.add_argument("--formulation", choices=["N", "R"], default="N")

    ben = sub.add_parser("bench", help="instances x frameworks benchmark table")
    ben.add_argument("instances", nargs="+")
    ben.add_argument("--frameworks", default="N,N+PBx,R,R+PBw,N+RCF,R+RCF,R+PBw+RCF",
                     help="comma-separated framework labels")
    ben.add_argument("--csv", default=None, help="also write machine-readable CSV")
    _add_solver_flags(ben)
    return parser


def _cmd_generate(args) -> int:
    params = GenParams(
        n_transmitters=args.transmitters,
        n_testpoints=args.testpoints,
        area_side=args.area_side,
        pathloss_exponent=args.eta,
        seed=args.seed,
        sinr_threshold=args.delta,
        coverage_fraction=args.alpha_fraction,
        power_values=tuple(args.powers),
        level_costs=tuple(args.costs),
        noise=args.mu,
        scale_factor=args.scale,
    )
    inst = generate(params)
    fileio.write_instance(inst, args.out, name=args.name)
    print(f"wrote {args.out}: |B|={inst.n_transmitters} |T|={inst.n_testpoints} "
          f"|L|={inst.n_levels} alpha={inst.coverage_target}")
    return EXIT_OK


def _cmd_solve(args) -> int:
    inst, name = fileio.read_instance(args.instance)
    framework = Framework.parse(args.framework)
    report, solution = solve_framework(inst, framework, _solve_config(args))
    row = _row_from_report(name, report)
    print(format_table([row]))
    if not report.proven:
        print("warning: limits hit before optimality was proven", file=sys.stderr)
    if args.out:
        fileio.write_solution(solution, report.objective, args.out, name=name)
    return EXIT_OK


def _cmd_oracle(args) -> int:
    inst, name = fileio.read_instance(args.instance)
    result = brute_force(inst, cap=args.cap)
    if not result.feasible:
        print(f"{name}: infeasible ({result.enumerated} patterns enumerated)")
        return EXIT_INFEASIBLE
    print(f"{name}: optimum {result.objective:.6g} "
          f"({result.optimal_count} optimal patterns / {result.enumerated} enumerated)")
    if args.out:
        fileio.write_solution(result.solution, result.objective, args.out, name=name)
    return EXIT_OK


def _cmd_verify(args) -> int:
    inst, _ = fileio.read_instance(args.instance)
    sol, _, recorded_obj = fileio.read_solution(args.solution)
    report = verify_solution(inst, sol)
    print(report.to_text())
    actual = objective(inst, sol)
    if abs(actual - recorded_obj) > 1e-6 * max(1.0, abs(actual)):
        print(f"recorded objective {recorded_obj:.9g} != recomputed {actual:.9g}")
        return EXIT_INFEASIBLE
    return EXIT_OK if report.feasible else EXIT_INFEASIBLE


def _cmd_presolve_report(args) -> int:
    inst, name = fileio.read_instance(args.instance)
    build = build_natural if args.formulation == "N" else build_reformulated
    base = big_m_base(inst)
    model = build(inst, base)
    backend = get_lp_backend(args.lp_backend, model)
    lp = solve_lp(backend, model, None)
    if lp.status == "infeasible":
        print(f"{name}: LP relaxation infeasible")
        return EXIT_INFEASIBLE
    if lp.status != "optimal":
        print(f"{name}: LP failed: {lp.status} {lp.diagnostics}", file=sys.stderr)
        return EXIT_NUMERIC
    cfg = _solve_config(args)
    from .bnb import _resolve_sub_mip  # shared engine choice

    outcome = fixing_heuristic(inst, model, cfg.heuristic, backend,
                               _resolve_sub_mip(cfg, model), lp_result=lp)
    if outcome is None:
        print(f"{name}: heuristic found no solution; no certified upper bound, "
              "reduced-cost fixing unavailable")
        return EXIT_OK
    if not outcome.upper_bound > lp.objective + 1e-9:
        print(f"{name}: no fixing gap (lb {lp.objective:.9g} = ub "
              f"{outcome.upper_bound:.9g}); nothing to fix")
        return EXIT_OK
    _reduced, rcf, _table = run_rcf_pipeline(
        inst, model, base, lp, outcome.upper_bound, build)
    print(f"{name}: formulation {args.formulation}, heuristic time {outcome.wall_time:.2f}s")
    print(rcf.to_text())
    return EXIT_OK


def _cmd_export_mps(args) -> int:
    inst, name = fileio.read_instance(args.instance)
    build = build_natural if args.formulation == "N" else build_reformulated
    model = build(inst, big_m_base(inst))
    write_mps(model, args.out, problem_name=name.upper()[:24] or "SITEPOWER")
    print(f"wrote {args.out}: {model.n_cols} columns, {model.n_rows} rows, {model.nnz} non-zeros")
    return EXIT_OK


def _cmd_bench(args) -> int:
    frameworks = [Framework.parse(tok) for tok in args.frameworks.split(",") if tok.strip()]
    cfg = _solve_config(args)
    rows: list[BenchRow] = []
    for path in args.instances:
        inst, name = fileio.read_instance(path)
        for fw in frameworks:
            try:
                report, _ = solve_framework(inst, fw, cfg)
                rows.append(_row_from_report(name, report))
            except InstanceInfeasibleError:
                rows.append(_infeasible_row(name, fw.label))
    print(format_table(rows))
    if args.csv:
        write_bench_csv(rows, args.csv)
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "generate": _cmd_generate,
        "solve": _cmd_solve,
        "oracle": _cmd_oracle,
        "verify": _cmd_verify,
        "presolve-report": _cmd_presolve_report,
        "export-mps": _cmd_export_mps,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except fileio.FileFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InstanceInfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
