"""Command-line front door.

Subcommands
-----------
solve       fit basis weights by constraint generation; writes a weights
            artifact and prints a run report.
evaluate    simulate policies and print the results table (text to stdout,
            CSV via --out); policies come from --policy specs and/or a
            --weights artifact (which adds the greedy row).
bound       recompute the greedy-loss upper bound for a weights artifact.
check       parse and validate a domain file against a small universe.
export-lp   run the solve and write the generated LP in LP-format text;
            optionally cross-check it with an external solver.
oracle      ground a small universe, solve it exactly, and report how the
            symbolic solve's bound compares against the true greedy gap.

Exit codes: 0 success, 2 usage errors (bad flags), 3 solver failures
(infeasible LP or non-terminating generation loop), 1 everything else
(unreadable files, validation failures, simulation errors).  Primary
outputs (files written via --out and weights artifacts) are byte-stable
for a fixed seed and configuration; reports on stdout may include wall
times.  FOALP_LOG sets the logging level (e.g. FOALP_LOG=debug).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import re
import subprocess
import sys
from fractions import Fraction

from foalp.backup import LinearValueFunction
from foalp.cases import evaluate as evaluate_case
from foalp.domainfile import ParseError, load_domain
from foalp.elevator import (
    ElevatorError,
    EpisodeConfig,
    GreedyPolicy,
    basis_set,
    build_model,
    parse_policy,
    results_table,
    run_trial,
    standard_entries,
)
from foalp.fomdp import FomdpError, validate
from foalp.groundmdp import (
    StateCapExceeded,
    ground,
    ground_alp,
    greedy_policy,
    policy_value,
    value_iteration,
)
from foalp.linprog import LpError, export
from foalp.linprog import LinearProgram
from foalp.logic import DEFAULT_BUDGET, LogicError
from foalp.semantics import GroundState, Universe
from foalp.solver import (
    LpInfeasible,
    NonTermination,
    SolverError,
    build_objective,
    error_bound,
    load_weights,
    save_weights,
    solve_foalp,
)

log = logging.getLogger("foalp")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_SOLVER = 3


class CliError(Exception):
    """Bad input that argparse cannot catch (reported as usage, exit 2)."""


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--domain",
        metavar="FILE",
        help="domain file (default: the packaged elevator model)",
    )
    p.add_argument(
        "--budget",
        type=int,
        default=DEFAULT_BUDGET,
        metavar="N",
        help="inference budget per elimination (default %(default)s)",
    )
    p.add_argument("--out", metavar="FILE", help="write the primary output here")


def _add_sim(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--floors",
        default="5,10,15",
        metavar="LIST",
        help="comma-separated floor counts (default %(default)s)",
    )
    p.add_argument("--trials", type=int, default=100, metavar="N")
    p.add_argument("--horizon", type=int, default=50, metavar="N")
    p.add_argument("--seed", type=int, default=0, metavar="N")
    p.add_argument(
        "--threads",
        type=int,
        default=1,
        metavar="N",
        help="parallelism cap; trials use per-trial RNG streams, so the "
        "results do not depend on it",
    )


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="foalp",
        description="First-order approximate linear programming for "
        "relational MDPs.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="fit basis weights")
    _add_common(p)
    p.add_argument("--basis", type=int, default=6, metavar="N")
    p.add_argument("--tol", type=float, default=1e-6, metavar="X")

    p = sub.add_parser("evaluate", help="simulate policies")
    _add_common(p)
    _add_sim(p)
    p.add_argument(
        "--weights",
        metavar="FILE",
        help="weights artifact from `solve`; adds the greedy row",
    )
    p.add_argument(
        "--policy",
        action="append",
        default=[],
        metavar="SPEC",
        help="policy spec (repeatable): heuristic:<letters from VAG>, "
        "myopic:<depth>, or greedy (requires --weights); default is the "
        "full standard lineup",
    )
    p.add_argument(
        "--trace",
        type=int,
        metavar="TRIAL",
        help="dump the step-by-step trace of one trial of the first "
        "policy on the first floor count, instead of the table",
    )

    p = sub.add_parser("bound", help="greedy-loss upper bound for weights")
    _add_common(p)
    p.add_argument("--weights", required=True, metavar="FILE")

    p = sub.add_parser("check", help="parse and validate a domain file")
    _add_common(p)
    p.add_argument("--floors", type=int, default=2, metavar="N")

    p = sub.add_parser("export-lp", help="solve and export the generated LP")
    _add_common(p)
    p.add_argument("--basis", type=int, default=1, metavar="N")
    p.add_argument("--tol", type=float, default=1e-6, metavar="X")
    p.add_argument(
        "--lp-external",
        metavar="CMD",
        help="external LP solver to cross-check the export; invoked as "
        "`CMD <file.lp>` and its stdout is scanned for the last number "
        "after 'obj'",
    )

    p = sub.add_parser("oracle", help="exact small-universe cross-check")
    _add_common(p)
    p.add_argument("--basis", type=int, default=1, metavar="N")
    p.add_argument("--tol", type=float, default=1e-6, metavar="X")
    p.add_argument("--floors", type=int, default=2, metavar="N")
    p.add_argument("--people", type=int, default=1, metavar="N")
    p.add_argument("--elevators", type=int, default=1, metavar="N")

    return ap


def _load_model(args):
    if args.domain:
        return load_domain(args.domain)
    return build_model()


def _parse_floors(text: str) -> list[int]:
    try:
        floors = [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise CliError("bad --floors list %r" % text) from None
    if not floors or any(f < 2 for f in floors):
        raise CliError("--floors needs comma-separated integers >= 2")
    return floors


def _check_tol(tol: float) -> Fraction:
    if tol <= 0:
        raise CliError("--tol must be positive")
    return Fraction(tol)


def _solution(model, args):
    basis = basis_set(model, args.basis)
    sol = solve_foalp(model, basis, _check_tol(args.tol), args.budget)
    return basis, sol


def cmd_solve(args) -> int:
    model = _load_model(args)
    basis, sol = _solution(model, args)
    st = sol.stats
    print("domain: %s" % model.name)
    print("basis (%d): %s" % (len(basis), ", ".join(b.name for b in basis)))
    print("objective: %.6f" % sol.objective)
    print("weights: %s" % ", ".join("%.6f" % float(w) for w in sol.weights))
    print(
        "constraints: %d generated out of a flattened space of %d"
        % (st.constraints, st.constraint_space)
    )
    print(
        "iterations: %d  fomax calls: %d  inferences: %d"
        % (st.iterations, st.fomax_calls, st.inferences)
    )
    print("decisive: %s" % st.decisive)
    print("wall time: %.1fs" % st.wall_time)
    if args.out:
        save_weights(args.out, model, basis, sol, args.tol)
        print("weights written to %s" % args.out)
    return EXIT_OK


def _value_from_artifact(model, path):
    names, weights = load_weights(path)
    if len(names) < 1 or names[0] != "const":
        raise CliError("weights artifact %r lacks the constant basis" % path)
    basis = basis_set(model, len(names) - 1)
    got = [b.name for b in basis]
    if got != list(names):
        raise CliError(
            "weights artifact %r names basis %r but the domain yields %r"
            % (path, list(names), got)
        )
    return basis, LinearValueFunction(basis, tuple(weights))


def cmd_evaluate(args) -> int:
    model = _load_model(args)
    floors = _parse_floors(args.floors)
    cfg = EpisodeConfig(
        floors=floors[0],
        trials=args.trials,
        horizon=args.horizon,
        seed=args.seed,
    )
    if args.threads < 1:
        raise CliError("--threads must be at least 1")

    value = None
    if args.weights:
        _basis, value = _value_from_artifact(model, args.weights)

    if args.policy:
        entries = []
        for spec in args.policy:
            p = parse_policy(model, spec, value)
            entries.append((p.name, p, None))
    else:
        entries = standard_entries(model, value)

    if args.trace is not None:
        name, policy, _ = entries[0]
        trace: list[str] = []
        ret = run_trial(model, policy, cfg, args.trace, trace=trace)
        print("policy %s, trial %d, floors %d" % (name, args.trace, cfg.floors))
        for line in trace:
            print(line)
        print("return: %r" % ret)
        return EXIT_OK

    table = results_table(model, entries, floors, cfg, workers=args.threads)
    print(table.to_text(), end="")
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(table.to_csv())
        print("CSV written to %s" % args.out)
    return EXIT_OK


def cmd_bound(args) -> int:
    model = _load_model(args)
    basis, value = _value_from_artifact(model, args.weights)
    b = error_bound(model, basis, value.weights, args.budget)
    print("bound: %.6f" % float(b))
    return EXIT_OK


def cmd_check(args) -> int:
    model = _load_model(args)
    floors = tuple("F%d" % (i + 1) for i in range(args.floors))
    uni = Universe(
        {"floor": floors, "elev": ("E1",), "person": ("P1",), "group": ("G1",)},
        chain_sort="floor",
    )
    problems = validate(model, uni)
    print("domain: %s" % model.name)
    print(
        "sorts: %s  fluents: %d  statics: %d  actions: %d  criteria: %d"
        % (
            ", ".join(model.sorts),
            len(model.fluents),
            len(model.statics),
            len(model.actions),
            len(model.criteria),
        )
    )
    if problems:
        for p in problems:
            print("violation: %s" % p)
        return EXIT_FAILURE
    print("validation: ok (universe of %d floors)" % args.floors)
    return EXIT_OK


_OBJ_RE = re.compile(r"obj[a-z]*\W*[=:]?\s*(-?\d+(?:\.\d+)?(?:e[+-]?\d+)?)", re.I)


def _external_objective(cmd: str, path: str) -> float:
    proc = subprocess.run(
        [cmd, path], capture_output=True, text=True, timeout=300
    )
    if proc.returncode != 0:
        raise CliError(
            "external solver failed (%d): %s"
            % (proc.returncode, proc.stderr.strip()[:200])
        )
    hits = _OBJ_RE.findall(proc.stdout)
    if not hits:
        raise CliError("could not find an objective in external solver output")
    return float(hits[-1])


def cmd_export_lp(args) -> int:
    model = _load_model(args)
    basis, sol = _solution(model, args)
    lp = LinearProgram(
        len(basis), build_objective(basis), list(sol.rows)
    )
    text = export(lp, name="%s basis=%d" % (model.name, args.basis))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print("LP written to %s (%d rows)" % (args.out, len(lp.rows)))
    else:
        print(text, end="")
    if args.lp_external:
        if not args.out:
            raise CliError("--lp-external needs --out to point at a file")
        ours = sol.objective
        theirs = _external_objective(args.lp_external, args.out)
        print("objective: ours %.6f external %.6f" % (ours, theirs))
        if not math.isclose(ours, theirs, rel_tol=1e-6, abs_tol=1e-6):
            print("MISMATCH beyond 1e-6")
            return EXIT_FAILURE
    return EXIT_OK


def _oracle_universe(args) -> Universe:
    floors = tuple("F%d" % (i + 1) for i in range(args.floors))
    elevs = tuple("E%d" % (i + 1) for i in range(args.elevators))
    people = tuple("P%d" % (i + 1) for i in range(args.people))
    groups = ("G1", "G2")
    return Universe(
        {"floor": floors, "elev": elevs, "person": people, "group": groups},
        chain_sort="floor",
    )


def _oracle_initial(uni: Universe) -> list[GroundState]:
    """Every placement of the people (waiting somewhere, with some
    distinct destination) with all elevators at the bottom floor."""

    floors = uni.chain()
    base = frozenset(("EAt", (e, floors[0])) for e in uni.objects("elev"))
    states = [base]
    for p in uni.objects("person"):
        nxt = []
        for s in states:
            for origin in floors:
                for dst in floors:
                    if dst == origin:
                        continue
                    nxt.append(
                        s | {("PAt", (p, origin)), ("Dst", (p, dst))}
                    )
        states = nxt
    return [GroundState(s) for s in states]


def cmd_oracle(args) -> int:
    model = _load_model(args)
    uni = _oracle_universe(args)
    g = ground(model, uni, _oracle_initial(uni))
    vstar = value_iteration(g)
    print(
        "universe: %d floors, %d elevators, %d people -> %d states, %d "
        "ground actions"
        % (
            args.floors,
            args.elevators,
            args.people,
            len(g.states),
            len(g.actions),
        )
    )
    print("V* range: [%.4f, %.4f]" % (min(vstar), max(vstar)))

    basis = basis_set(model, args.basis)
    columns = [
        [evaluate_case(b.bcase, uni, s) for s in g.states] for b in basis
    ]
    alp, _lp = ground_alp(g, columns)
    if not alp.ok:
        print("ground ALP: %s" % alp.status)
        return EXIT_FAILURE
    print(
        "ground ALP objective: %.4f  weights: %s"
        % (alp.objective, ", ".join("%.4f" % w for w in alp.weights))
    )

    _, sol = _solution(model, args)
    bound = float(error_bound(model, basis, sol.weights, args.budget))
    fitted = [
        sum(float(w) * float(c[si]) for w, c in zip(sol.weights, columns))
        for si in range(len(g.states))
    ]
    vg = policy_value(g, greedy_policy(g, fitted))
    gap = max(a - b for a, b in zip(vstar, vg))
    verdict = "OK" if bound >= gap - 1e-6 else "VIOLATED"
    print(
        "symbolic bound %.4f >= true greedy gap %.4f : %s"
        % (bound, gap, verdict)
    )
    return EXIT_OK if verdict == "OK" else EXIT_FAILURE


def main(argv=None) -> int:
    level = os.environ.get("FOALP_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    ap = build_parser()
    args = ap.parse_args(argv)
    handlers = {
        "solve": cmd_solve,
        "evaluate": cmd_evaluate,
        "bound": cmd_bound,
        "check": cmd_check,
        "export-lp": cmd_export_lp,
        "oracle": cmd_oracle,
    }
    try:
        return handlers[args.command](args)
    except CliError as e:
        ap.error(str(e))  # exits 2
        raise AssertionError("unreachable")
    except (LpInfeasible, NonTermination) as e:
        log.error("%s", e)
        print("solver failure: %s" % e, file=sys.stderr)
        return EXIT_SOLVER
    except (
        ElevatorError,
        FomdpError,
        LogicError,
        LpError,
        ParseError,
        SolverError,
        StateCapExceeded,
        OSError,
    ) as e:
        print("error: %s" % e, file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
