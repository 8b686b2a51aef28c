"""Weight fitting for first-order MDPs by linear programming.

The value function is a weighted sum of basis cases, and the LP says: make
the value function dominate its own one-step backup everywhere, for every
action, while minimizing total magnitude.  "Everywhere" is an infinite
family of constraints, so two symbolic tools stand in for enumeration:

* a factored symbolic maximization over summed case statements (variable
  elimination with first-order ordered resolution doing the consistency
  work), which finds the single most violated constraint of a family; and
* constraint generation, which alternates between asking each action's
  family for its worst violation at the current weights and re-solving the
  LP with the violations added, until nothing is violated.

Budget-limited resolution may fail to refute an inconsistent partition;
every such miss makes the maximization report a value at least as high as
the truth, which can only add unnecessary constraints — never lose a
needed one — so the LP stays sound while occasionally over-constrained.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from foalp.backup import BasisFunction, backed_up_value, reward_components
from foalp.cases import (
    AffineValue,
    CaseStatement,
    scale_values,
)
from foalp.fomdp import FomdpModel
from foalp.linprog import LinearProgram, _affine_float, solve
from foalp.logic import (
    DEFAULT_BUDGET,
    EQ,
    AxiomSet,
    Bottom,
    Clause,
    Top,
    atoms_of,
    background,
    decode_clause,
    eliminate_encoded,
    encode_clause,
    equality_axioms,
    freeze_free_vars,
    has_unit_conflict_encoded,
    pred_id,
    simplify,
    to_cnf,
    unique_names_units,
)


class SolverError(Exception):
    pass


class OrderingIncomplete(SolverError):
    pass


class EmptyBasisCase(SolverError):
    pass


class LpInfeasible(SolverError):
    pass


class NonTermination(SolverError):
    pass


MINUS_ONE = AffineValue.of(-1)

# Internal bound on weight magnitude while the constraint set is still too
# thin to pin the LP down.  Never part of the emitted constraint set; a
# solution resting on it is reported as a failure, not an answer.
WEIGHT_BOX = Fraction(10**6)


# ---------------------------------------------------------------------------
# Factored symbolic maximization


@dataclass(frozen=True)
class FomaxPartition:
    clauses: tuple[Clause, ...]
    value: AffineValue


@dataclass(frozen=True)
class FomaxResult:
    value: Fraction
    affine: AffineValue
    chosen: tuple[FomaxPartition, ...]
    decisive: bool
    inferences: int


@dataclass(frozen=True)
class _Part:
    enc: frozenset
    pids: frozenset
    key: str
    value: AffineValue


def _make_part(enc: Iterable[tuple], value: AffineValue) -> _Part:
    es = frozenset(enc)
    pids = frozenset(lit[1] for cl in es for lit in cl)
    return _Part(es, pids, repr(sorted(es, key=repr)), value)


def _net_of(c: CaseStatement) -> tuple[list[_Part], list[Clause]]:
    """Encode one case as a net of partitions, also handing back the
    decoded clause pool (the background theory needs the constants and
    relation names in play)."""

    net = []
    pool: list[Clause] = []
    for f, v in c.partitions:
        g = simplify(f)
        if isinstance(g, Bottom):
            continue
        clauses = to_cnf(freeze_free_vars(g))
        if any(cl.is_empty for cl in clauses):
            continue
        pool.extend(clauses)
        enc = [e for cl in clauses if (e := encode_clause(cl)) is not None]
        net.append(_make_part(enc, v))
    if not net:
        raise SolverError("case statement with no satisfiable partition")
    return net, pool


def _cross_nets(a: list[_Part], b: list[_Part]) -> list[_Part]:
    out = []
    for pa in a:
        for pb in b:
            enc = pa.enc | pb.enc
            if has_unit_conflict_encoded(enc):
                continue
            out.append(_make_part(enc, pa.value + pb.value))
    if not out:
        raise SolverError("cross-sum eliminated every partition")
    return out


def _dominance(net: list[_Part], weights: Sequence[Fraction]) -> list[_Part]:
    """Duplicate clause sets keep their best value; a partition strictly
    below another whose clauses it includes can never be the max."""

    by_enc: dict[frozenset, _Part] = {}
    for p in sorted(net, key=lambda p: (p.key, p.value.sort_key())):
        q = by_enc.get(p.enc)
        if q is None or p.value.evaluate(weights) > q.value.evaluate(weights):
            by_enc[p.enc] = p
    parts = sorted(by_enc.values(), key=lambda p: p.key)
    vals = [p.value.evaluate(weights) for p in parts]
    kept = []
    for i, p in enumerate(parts):
        dominated = any(
            j != i and parts[j].enc <= p.enc and vals[j] > vals[i]
            for j in range(len(parts))
        )
        if not dominated:
            kept.append(p)
    return kept


def default_ordering(cases: Iterable[CaseStatement]) -> list[str]:
    """Cheapest-first elimination order: relations sorted by how often they
    occur across the case formulas (equality is handled separately and
    always eliminated last)."""

    counts: dict[str, int] = {}
    for c in cases:
        for f, _v in c.partitions:
            for a in atoms_of(f):
                if a.pred != EQ:
                    counts[a.pred] = counts.get(a.pred, 0) + 1
    return sorted(counts, key=lambda p: (counts[p], p))


def fomax(
    cases: Sequence[CaseStatement],
    ordering: Sequence[str],
    weights: Sequence[Fraction],
    axioms: AxiomSet | None = None,
    budget: int = DEFAULT_BUDGET,
) -> FomaxResult:
    """Maximum achievable total of a sum of case statements, with the
    witnessing partition combination.

    Works like variable elimination: for each relation in order, the cases
    mentioning it are cross-summed, each merged partition is saturated on
    the relation by resolution (against the background axioms) and the
    relation's clauses dropped, refuted partitions are deleted, dominated
    ones pruned, and the reduced case re-enters the pool.  Once every
    relation is eliminated the per-case maxima combine freely.

    Partition selection compares values at the given weights; the returned
    affine keeps the symbolic form for constraint emission.  `decisive` is
    False when any saturation ran out of budget, meaning the value is an
    upper bound rather than exact.
    """

    if not cases:
        raise SolverError("nothing to maximize")
    built = [_net_of(c) for c in cases]
    nets = [net for net, _pool in built]
    pool = [cl for _net, p in built for cl in p]

    present = {lit.pred for cl in pool for lit in cl.literals if lit.pred != EQ}
    missing = present - set(ordering)
    if missing:
        raise OrderingIncomplete(
            "ordering lacks relations: %s" % ", ".join(sorted(missing))
        )

    bgc: list[Clause] = list(axioms.clauses) if axioms is not None else []
    if any(lit.pred == EQ for cl in (*pool, *bgc) for lit in cl.literals):
        bgc.extend(equality_axioms())
    bgc.extend(unique_names_units((*pool, *bgc)))
    bg = background(bgc, budget)

    # Every pid a relation name can stand for, work and background alike:
    # resolution against the background can introduce its literals into a
    # surviving partition, and a later round must still find them.
    names: dict[str, set[int]] = {}
    for cl in (*pool, *bgc):
        for lit in cl.literals:
            names.setdefault(lit.pred, set()).add(pred_id(lit.pred, len(lit.args)))

    decisive = True
    inferences = 0
    rounds = [r for r in ordering if r != EQ] + [EQ]
    for relation in rounds:
        for pid in sorted(names.get(relation, ())):
            group = [net for net in nets if any(pid in p.pids for p in net)]
            if not group:
                continue
            rest = [net for net in nets if not any(pid in p.pids for p in net)]
            tmp = group[0]
            for other in group[1:]:
                tmp = _cross_nets(tmp, other)
            reduced = []
            for p in tmp:
                survivors, exhausted, infs = eliminate_encoded(p.enc, pid, bg, budget)
                inferences += infs
                if exhausted:
                    decisive = False
                if survivors is None:
                    continue
                reduced.append(_make_part(survivors, p.value))
            if not reduced:
                raise SolverError(
                    "every partition refuted while eliminating %r" % relation
                )
            nets = rest + [_dominance(reduced, weights)]

    chosen = []
    total = AffineValue()
    for net in nets:
        best = min(net, key=lambda p: (-p.value.evaluate(weights), p.key))
        chosen.append(
            FomaxPartition(
                tuple(decode_clause(ec) for ec in sorted(best.enc, key=repr)),
                best.value,
            )
        )
        total = total + best.value
    return FomaxResult(
        value=total.evaluate(weights),
        affine=total,
        chosen=tuple(chosen),
        decisive=decisive,
        inferences=inferences,
    )


# ---------------------------------------------------------------------------
# Constraint families and the LP objective


@dataclass(frozen=True)
class ConstraintFamily:
    """One action's constraint schema: the summed cases say "backup minus
    value function", and every consistent joint partition of them is one
    linear inequality 0 >= (partition value)."""

    action: str
    cases: tuple[CaseStatement, ...]


def build_objective(basis: Sequence[BasisFunction]) -> AffineValue:
    """Each weight's objective coefficient is the mean of its basis case's
    partition values, weighting every partition of state space equally."""

    out = AffineValue()
    for b in basis:
        n = len(b.bcase.partitions)
        if n == 0:
            raise EmptyBasisCase("basis case %r has no partitions" % b.name)
        mean = sum((v.constant for _f, v in b.bcase.partitions), Fraction(0))
        out = out + AffineValue.weight(b.index, mean / n)
    return out


def build_families(
    model: FomdpModel,
    basis: Sequence[BasisFunction],
    weights: Sequence[Fraction],
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> list[ConstraintFamily]:
    """One family per action: the parameterless backup of the weighted
    basis, minus the value function itself.  The subtraction folds into
    the unaffected components (their backup is just the discounted
    original, so backup-minus-value scales them by gamma minus one); the
    affected block keeps its quantified case and the subtraction rides
    along as separate negated basis cases."""

    out = []
    for act in model.actions:
        comps = reward_components(model, act)
        affected = [b for b in basis if act.name in b.affected_by]
        for b in basis:
            if act.name in b.affected_by:
                comps.append(scale_values(b.bcase, AffineValue.weight(b.index, -1)))
            else:
                comps.append(
                    scale_values(
                        b.bcase,
                        AffineValue.weight(b.index, model.discount - 1),
                    )
                )
        if affected:
            comps.extend(
                backed_up_value(model, affected, act, weights, prune, budget)
            )
        out.append(ConstraintFamily(act.name, tuple(comps)))
    return out


# ---------------------------------------------------------------------------
# Constraint generation


@dataclass
class FocgStats:
    iterations: int = 0
    constraints: int = 0
    fomax_calls: int = 0
    inferences: int = 0
    objectives: tuple[float, ...] = ()
    decisive: bool = True
    wall_time: float = 0.0
    #: Size of the flattened cross-product space the families stand for:
    #: summed over families, the product of their cases' partition counts.
    #: Each combination is one constraint of the fully enumerated LP, so
    #: this is what generation avoids writing out.
    constraint_space: int = 0


def _box_rows(k: int) -> list[AffineValue]:
    rows = []
    for i in range(k):
        rows.append(AffineValue(-WEIGHT_BOX, ((i, Fraction(1)),)))
        rows.append(AffineValue(-WEIGHT_BOX, ((i, Fraction(-1)),)))
    return rows


def focg(
    objective: AffineValue,
    families: Sequence[ConstraintFamily],
    num_weights: int,
    tol: Fraction | float = Fraction(1, 10**6),
    axioms: AxiomSet | None = None,
    budget: int = DEFAULT_BUDGET,
    refresh: Callable[[tuple[Fraction, ...]], Sequence[ConstraintFamily]] | None = None,
    max_iterations: int = 1000,
) -> tuple[tuple[Fraction, ...], FocgStats, list[AffineValue]]:
    """Constraint generation: start at zero weights with no constraints;
    each round asks every family for its most violated partition at the
    current weights, adds all violations found, re-solves, and stops the
    first round nothing exceeds tol.

    `refresh` rebuilds the families after each re-solve so their
    quantified blocks are ordered for the weights actually in force.
    Returns the weights, run statistics, and the emitted constraint rows.
    """

    if tol <= 0:
        raise SolverError("tolerance must be positive")
    tol = Fraction(tol)
    started = time.monotonic()
    weights = tuple(Fraction(0) for _ in range(num_weights))
    rows: list[AffineValue] = []
    row_set: set[AffineValue] = set()
    stats = FocgStats()
    objectives: list[float] = []

    for iteration in range(1, max_iterations + 1):
        stats.iterations = iteration
        batch: list[tuple[str, FomaxResult]] = []
        for fam in families:
            res = fomax(
                fam.cases, default_ordering(fam.cases), weights, axioms, budget
            )
            stats.fomax_calls += 1
            stats.inferences += res.inferences
            stats.decisive = stats.decisive and res.decisive
            if res.value >= tol:
                batch.append((fam.action, res))

        if not batch:
            for i, w in enumerate(weights):
                if abs(w) >= WEIGHT_BOX - 1:
                    raise NonTermination(
                        "weight %d terminated against the internal box "
                        "(|w| = %s); the constraint set does not bound the "
                        "LP" % (i, w)
                    )
            stats.constraints = len(rows)
            stats.objectives = tuple(objectives)
            stats.constraint_space = sum(
                math.prod(len(c.partitions) for c in fam.cases)
                for fam in families
            )
            stats.wall_time = time.monotonic() - started
            return weights, stats, rows

        fresh = set()
        for action, res in batch:
            if res.affine in fresh:
                continue  # two families agreeing on a row this round is fine
            if res.affine in row_set:
                raise NonTermination(
                    "family %r regenerated an existing constraint "
                    "(violation %s at iteration %d): %s — numerical "
                    "tolerance fault"
                    % (action, float(res.value), iteration, res.affine)
                )
            fresh.add(res.affine)
            row_set.add(res.affine)
            rows.append(res.affine)

        lp = LinearProgram(num_weights, objective, rows + _box_rows(num_weights))
        sol = solve(lp)
        if sol.status == "infeasible":
            raise LpInfeasible(
                "constraint set infeasible at iteration %d — usually an "
                "unrefuted inconsistent partition over-constraining the "
                "program" % iteration
            )
        if sol.status != "optimal":
            raise NonTermination("LP returned %r inside the box" % sol.status)
        objectives.append(sol.objective)
        weights = tuple(Fraction(x) for x in sol.weights)
        if refresh is not None:
            families = refresh(weights)

    raise NonTermination(
        "no convergence after %d iterations; %d constraints, last "
        "objective %s"
        % (max_iterations, len(rows), objectives[-1] if objectives else "n/a")
    )


@dataclass(frozen=True)
class FoalpSolution:
    weights: tuple[Fraction, ...]
    objective: float
    stats: FocgStats
    rows: tuple[AffineValue, ...]


def _has_constant_basis(basis: Sequence[BasisFunction]) -> bool:
    for b in basis:
        if len(b.bcase.partitions) == 1 and isinstance(
            simplify(b.bcase.partitions[0][0]), Top
        ):
            return True
    return False


def solve_foalp(
    model: FomdpModel,
    basis: Sequence[BasisFunction],
    tol: Fraction | float = Fraction(1, 10**6),
    budget: int = DEFAULT_BUDGET,
    prune: bool = True,
    max_iterations: int = 1000,
) -> FoalpSolution:
    """End-to-end weight fit: objective from the basis, one constraint
    family per action, constraint generation until no violation remains."""

    if [b.index for b in basis] != list(range(len(basis))):
        raise SolverError("basis indices must be 0..k-1 in order")
    if not _has_constant_basis(basis):
        raise SolverError(
            "a constant basis function is required; it keeps every "
            "constraint family satisfiable from the first iteration"
        )
    objective = build_objective(basis)

    def refresh(w: tuple[Fraction, ...]) -> list[ConstraintFamily]:
        return build_families(model, basis, w, prune, budget)

    weights, stats, rows = focg(
        objective,
        refresh(tuple(Fraction(0) for _ in basis)),
        num_weights=len(basis),
        tol=tol,
        axioms=model.axioms,
        budget=budget,
        refresh=refresh,
        max_iterations=max_iterations,
    )
    return FoalpSolution(
        weights=weights,
        objective=_affine_float(objective, [float(w) for w in weights]),
        stats=stats,
        rows=tuple(rows),
    )


def error_bound(
    model: FomdpModel,
    basis: Sequence[BasisFunction],
    weights: Sequence[Fraction],
    budget: int = DEFAULT_BUDGET,
    prune: bool = True,
) -> Fraction:
    """Upper bound on how far the greedy policy's value can fall below
    optimal: gamma/(1-gamma) times the smallest over actions of the
    largest one-step loss of the fitted value function."""

    gamma = model.discount
    if gamma == 0:
        return Fraction(0)
    best: Fraction | None = None
    for act in model.actions:
        comps = reward_components(model, act)
        comps.extend(backed_up_value(model, basis, act, weights, prune, budget))
        cases = [scale_values(c, MINUS_ONE) for c in comps]
        for b in basis:
            cases.append(scale_values(b.bcase, AffineValue.weight(b.index)))
        res = fomax(cases, default_ordering(cases), weights, model.axioms, budget)
        if best is None or res.value < best:
            best = res.value
    assert best is not None
    return gamma / (1 - gamma) * best


# ---------------------------------------------------------------------------
# Weight artifacts


def save_weights(path: str, model: FomdpModel, basis: Sequence[BasisFunction],
                 solution: FoalpSolution, tol: Fraction | float) -> None:
    payload = {
        "domain": model.name,
        "basis": [b.name for b in basis],
        "weights": [str(w) for w in solution.weights],
        "objective": solution.objective,
        "tol": float(tol),
        "constraints": solution.stats.constraints,
        "iterations": solution.stats.iterations,
        "decisive": solution.stats.decisive,
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_weights(path: str) -> tuple[list[str], tuple[Fraction, ...]]:
    with open(path) as fh:
        payload = json.load(fh)
    return payload["basis"], tuple(Fraction(w) for w in payload["weights"])
