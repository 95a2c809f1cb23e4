"""rctnet command line: design, simulate, verify, lp, imbalance.

Exit codes: 0 ok, 2 usage, 3 model or domain error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Optional

import numpy as np

from . import suites
from .designs import (
    BlockSpec,
    GramSchmidtWalk,
    GswConfig,
    IidDesign,
    PermutedBlock,
    RandomAllocation,
    imbalance_probability,
)
from .errors import OddBlock, OddPopulation, RctError, SingularModel, TooLarge
from .interference import GraphModel, check_well_defined, load_graph
from .io import InputError, read_covariates, read_outcomes, write_assignments
from .lp import parse_lp_format, to_lp_format
from .report import RunReport, Summary
from .rng import make_rng
from .simulation import simulate
from .verification import Verdict
from .worstcase import BRUTE_MAX_N, brute_force_worst_case, build_lp, grid_oracle, solve_lp

EXIT_OK, EXIT_USAGE, EXIT_DOMAIN, EXIT_VERIFY = 0, 2, 3, 4
DEFAULT_REPLICATES = 100_000
SCHEMES = ("iid", "allocation", "block", "gsw")


class UsageError(Exception):
    """Bad flag value; the message starts with the flag name."""


def _seed(args) -> int:
    if args.seed is None:
        args.seed = int(np.random.SeedSequence().entropy % 2**63)
    return args.seed


def _config(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k == "func":
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _emit(report: RunReport, path: Optional[Path]) -> None:
    text = report.to_json()
    if path is None:
        print(text)
    else:
        path.write_text(text + "\n")


def _blocks(path: Path) -> BlockSpec:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--blocks: cannot read {path}: {exc}") from exc
    if isinstance(doc, dict):
        doc = doc.get("blocks")
    if not isinstance(doc, list) or not all(isinstance(b, list) for b in doc):
        raise UsageError("--blocks: expected a JSON list of index lists")
    try:
        return BlockSpec(doc)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"--blocks: {exc}") from exc


def build_design(scheme: str, n: Optional[int], covariates: Optional[Path], phi: Optional[float], blocks: Optional[Path]):
    """Design object from CLI flags; raises UsageError on bad combinations."""
    if scheme == "gsw":
        if phi is None:
            raise UsageError("--phi: required for the gsw scheme")
        if not (0.0 < phi <= 1.0):
            raise UsageError(f"--phi: phi must be in (0,1], got {phi}")
        if covariates is not None:
            x = read_covariates(covariates)
            if n is not None and n != x.shape[0]:
                raise UsageError(f"--n: {n} does not match the {x.shape[0]} covariate rows")
        elif n is not None:
            x = np.zeros((n, 0))
        else:
            raise UsageError("--covariates: required for gsw unless --n is given")
        return GramSchmidtWalk(GswConfig(phi, x))
    if scheme == "block":
        if blocks is None:
            raise UsageError("--blocks: required for the block scheme")
        spec = _blocks(blocks)
        if n is not None and n != spec.n:
            raise UsageError(f"--n: {n} does not match the {spec.n} units in --blocks")
        return PermutedBlock(spec)
    if n is None:
        raise UsageError(f"--n: required for the {scheme} scheme")
    if n < 1:
        raise UsageError(f"--n: must be >= 1, got {n}")
    return IidDesign(n) if scheme == "iid" else RandomAllocation(n)


def cmd_design(args) -> int:
    if args.count < 1:
        raise UsageError(f"--count: must be >= 1, got {args.count}")
    design = build_design(args.scheme, args.n, args.covariates, args.phi, args.blocks)
    z = design.sample(make_rng(_seed(args)), args.count)
    text = write_assignments(z, args.out)
    if args.out is None:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.replicates < 2:
        raise UsageError(f"--replicates: must be >= 2, got {args.replicates}")
    if args.workers < 1:
        raise UsageError(f"--workers: must be >= 1, got {args.workers}")
    po = read_outcomes(args.outcomes)
    model = load_graph(args.graph)
    if model.n != po.n:
        raise UsageError(f"--graph: model has {model.n} units but --outcomes has {po.n}")
    n = args.n if args.n is not None else po.n
    if n != po.n:
        raise UsageError(f"--n: {n} does not match the {po.n} outcome rows")
    design = build_design(args.design_scheme, n, args.covariates, args.phi, args.blocks)
    state = check_well_defined(model)
    start = time.perf_counter()
    try:
        run = simulate(po, model, design, args.replicates, make_rng(_seed(args)), args.estimator, args.workers)
    except SingularModel as exc:
        print(f"error: {exc}; well-definedness: {state}", file=sys.stderr)
        return EXIT_DOMAIN
    report = RunReport(_config(args))
    report.summaries.append(
        Summary(
            f"tau_{args.estimator}",
            run.mean,
            run.variance,
            run.se,
            run.replicates,
            {"tau": run.tau, "bias": run.mean - run.tau, "bias_z": run.bias_z, "well_defined": str(state)},
        )
    )
    report.timing["seconds"] = time.perf_counter() - start
    _emit(report, args.report)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.n < 2:
        raise UsageError(f"--n: must be >= 2, got {args.n}")
    if args.d < 1:
        raise UsageError(f"--d: must be >= 1, got {args.d}")
    if not (0.0 < args.phi <= 1.0):
        raise UsageError(f"--phi: phi must be in (0,1], got {args.phi}")
    if args.replicates < 2:
        raise UsageError(f"--replicates: must be >= 2, got {args.replicates}")
    if args.suite in ("network", "all") and args.n > suites.NETWORK_MAX_N:
        raise UsageError(f"--n: the network suite enumerates graph realizations and needs n <= {suites.NETWORK_MAX_N}")
    rng = make_rng(_seed(args))
    report = RunReport(_config(args))
    start = time.perf_counter()
    names = ("spectral", "gswd", "network") if args.suite == "all" else (args.suite,)
    for name, stream in zip(names, rng.spawn(len(names))):
        if name == "spectral":
            v, s = suites.spectral_suite(args.n, args.d, args.phi, args.replicates, stream, args.workers)
        elif name == "gswd":
            v, s = suites.gswd_suite(args.n, args.d, args.phi, args.replicates, stream, args.workers)
        else:
            v, s = suites.network_suite(args.n, args.replicates, stream, args.workers)
        report.verdicts += v
        report.summaries += s
        report.timing[name] = time.perf_counter() - start
    _emit(report, args.report)
    for v in report.verdicts:
        if not v.passed:
            print(f"FAIL {v.name}: {v.statistic:.4g} > {v.threshold:.4g}", file=sys.stderr)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_lp(args) -> int:
    if args.graph is not None:
        model = load_graph(args.graph)
        if args.n is not None and args.n != model.n:
            raise UsageError(f"--n: {args.n} does not match the graph's {model.n} units")
    elif args.n is not None:
        if args.n < 1:
            raise UsageError(f"--n: must be >= 1, got {args.n}")
        model = GraphModel.deterministic(np.zeros((args.n, args.n)))
    else:
        raise UsageError("--graph: give a graph model or --n for the interference-free case")
    start = time.perf_counter()
    problem = build_lp(model, printed=args.printed_constraint)
    result = solve_lp(problem)
    report = RunReport(_config(args))
    report.summaries.append(
        Summary(
            "worst-case variance",
            result.value,
            0.0,
            0.0,
            0,
            {
                "design": result.design.probs.tolist(),
                "assignments": problem.w.tolist(),
                "duality_gap": result.solution.duality_gap,
                "iterations": result.solution.iterations,
            },
        )
    )
    viol = result.design.violations()
    report.verdicts.append(Verdict("design feasibility", max(viol.values()), 1e-9, json.dumps(viol)))
    if model.n <= BRUTE_MAX_N and not args.printed_constraint:
        brute = brute_force_worst_case(model, result.design)
        report.verdicts.append(
            Verdict("LP value equals brute-force worst case", abs(brute - result.value), 1e-6, f"brute force {brute:.12g}")
        )
    if model.n <= 2 and not args.printed_constraint:
        grid, _ = grid_oracle(model)
        report.verdicts.append(Verdict("LP value equals grid oracle", abs(grid - result.value), 1e-6, f"grid {grid:.12g}"))
    if args.export is not None:
        text = to_lp_format(problem.lp, f"worst-case design LP, n={model.n}")
        args.export.write_text(text)
        back = parse_lp_format(args.export.read_text())
        same = (
            back.var_names == problem.lp.var_names
            and np.array_equal(back.a_ub, problem.lp.a_ub)
            and np.array_equal(back.a_eq, problem.lp.a_eq)
        )
        report.verdicts.append(Verdict("LP export re-parses", 0.0 if same else 1.0, 0.0, str(args.export)))
    report.timing["seconds"] = time.perf_counter() - start
    _emit(report, args.report)
    return EXIT_OK if report.passed else EXIT_VERIFY


def cmd_imbalance(args) -> int:
    ns = list(range(args.n_min, args.n_max + 1, args.step))
    if not ns:
        raise UsageError("--n-min: empty range")
    lines = ["n," + ",".join(f"t={t:g}" for t in args.t)]
    for n in ns:
        try:
            lines.append(f"{n}," + ",".join(format(imbalance_probability(n, t), ".10g") for t in args.t))
        except ValueError as exc:
            raise UsageError(f"--t/--n-min: {exc}") from exc
    text = "\n".join(lines) + "\n"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.write_text(text)
    return EXIT_OK


def _design_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=None, help="number of units")
    p.add_argument("--covariates", type=Path, default=None, help="CSV with header, one row per unit (gsw)")
    p.add_argument("--phi", type=float, default=None, help="GSWD trade-off parameter in (0,1]")
    p.add_argument("--blocks", type=Path, default=None, help="JSON list of index blocks (block)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rctnet", description="Randomized trial designs under network interference")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", help="draw assignments")
    p.add_argument("--scheme", choices=SCHEMES, required=True)
    _design_flags(p)
    p.add_argument("--count", type=int, default=1, help="number of assignments")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="Monte Carlo of an estimator under a graph model")
    p.add_argument("--graph", type=Path, required=True)
    p.add_argument("--outcomes", type=Path, required=True, help="CSV with columns a,b")
    p.add_argument("--design-scheme", choices=SCHEMES, default="iid")
    _design_flags(p)
    p.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    p.add_argument("--estimator", choices=("ht", "net"), default="net")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report", type=Path, default=None, help="write the JSON report here instead of stdout")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("--suite", choices=suites.SUITES, default="all")
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--phi", type=float, default=0.5)
    p.add_argument("--replicates", type=int, default=DEFAULT_REPLICATES)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--report", type=Path, default=None)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("lp", help="worst-case optimal design by linear programming")
    p.add_argument("--graph", type=Path, default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--export", type=Path, default=None, help="write the LP in CPLEX LP format")
    p.add_argument("--printed-constraint", action="store_true",
                   help="use the W_ui W_uk W_uk triple product instead of W_ui W_uj W_uk")
    p.add_argument("--report", type=Path, default=None)
    p.set_defaults(func=cmd_lp)

    p = sub.add_parser("imbalance", help="CSV series of the imbalance probability under i.i.d. assignment")
    p.add_argument("--n-min", type=int, default=30)
    p.add_argument("--n-max", type=int, default=1000)
    p.add_argument("--step", type=int, default=10)
    p.add_argument("--t", type=float, action="append", default=None, help="imbalance threshold; repeatable")
    p.add_argument("--out", type=Path, default=None)
    p.set_defaults(func=cmd_imbalance)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "t", "missing") is None:
        args.t = [0.55, 0.6, 0.65]
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OddPopulation, OddBlock, SingularModel, TooLarge) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RctError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    raise SystemExit(main())
