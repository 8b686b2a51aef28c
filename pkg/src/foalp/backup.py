"""Decision-theoretic regression and Bellman backups over linear value
functions.

A value function is a weighted sum of basis cases.  Backing it up through
a stochastic action means regressing each basis case through every
nature's choice, mixing by the choice probabilities, discounting, adding
the reward, and charging the action cost.  Because regression distributes
over the weighted sum, the backup is built per basis function and kept as
a structured list of cases; flattening to a single case is deferred to the
consumer (the constraint generator), which is what keeps the whole
approach from exploding combinatorially.

Action parameters stay free throughout; the parameterless backup closes
over them with a sorted existential so its ground value is the best
parameter binding's value.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from foalp.cases import (
    AffineValue,
    CaseStatement,
    case,
    cross_minus,
    cross_product,
    cross_sum,
    exists_max,
    flatten,
    prune_inconsistent,
    scale_values,
)
from foalp.fomdp import (
    ChoiceTerm,
    FomdpModel,
    StochasticAction,
    _action_literals,
    _atoms,
    regress_case,
)
from foalp.logic import DEFAULT_BUDGET, TRUE, free_vars
from foalp.semantics import GroundState, Universe
from foalp import cases as _cases


class BackupError(Exception):
    pass


@dataclass(frozen=True)
class BasisFunction:
    """One feature of the value function: an indicator-style case with
    constant values, plus the set of actions that can change its truth
    structure (derived syntactically from the successor-state axioms)."""

    index: int
    name: str
    bcase: CaseStatement
    affected_by: frozenset[str]


@dataclass(frozen=True)
class LinearValueFunction:
    basis: tuple[BasisFunction, ...]
    weights: tuple[Fraction, ...] | None = None

    def evaluate(self, uni: Universe, state: GroundState) -> Fraction:
        if self.weights is None:
            raise BackupError("value function has no weights yet")
        total = Fraction(0)
        for b, w in zip(self.basis, self.weights):
            total += w * _cases.evaluate(b.bcase, uni, state)
        return total


def affecting_actions(model: FomdpModel, c: CaseStatement) -> frozenset[str]:
    """Actions able to change the case's truth structure: some fluent in
    the case has an axiom body whose action-equality literals name one of
    the action's choices."""

    fluents = set()
    for f, _v in c.partitions:
        for atom in _atoms(f):
            if atom.pred in model.fluents:
                fluents.add(atom.pred)
    choices = set()
    for fname in fluents:
        for lit in _action_literals(model.ssas[fname].body):
            choices.add(lit.choice)
    out = set()
    for act in model.actions:
        if any(ch.name in choices for ch in act.choices):
            out.add(act.name)
    return frozenset(out)


def make_basis(
    model: FomdpModel, named_cases: Sequence[tuple[str, CaseStatement]]
) -> tuple[BasisFunction, ...]:
    out = []
    for i, (name, c) in enumerate(named_cases):
        for _f, v in c.partitions:
            if not v.is_constant:
                raise BackupError("basis case %r has symbolic values" % name)
        out.append(BasisFunction(i, name, c, affecting_actions(model, c)))
    return tuple(out)


_reward_flat: dict[int, tuple[FomdpModel, CaseStatement]] = {}


def reward_case(model: FomdpModel, act: StochasticAction) -> CaseStatement:
    """Additive reward flattened to one case, with the action's constant
    cost charged against every partition.  The flattening is cached per
    model; it is re-derived for every action of every solver iteration
    otherwise."""

    cached = _reward_flat.get(id(model))
    if cached is not None and cached[0] is model:
        r = cached[1]
    else:
        for _name, _amount, f in model.criteria:
            if free_vars(f):
                raise BackupError("reward criterion with free variables")
        r = flatten(model.reward_cases(), model.axioms)
        _reward_flat[id(model)] = (model, r)
    if act.cost == 0:
        return r
    return cross_minus(r, case((TRUE, act.cost)), model.axioms)


def reward_components(
    model: FomdpModel, act: StochasticAction
) -> list[CaseStatement]:
    """Factored counterpart of `reward_case`: the per-criterion indicator
    cases plus a constant case for the action's cost.  Same sum, but the
    symbolic maximizer joins factored components only where a shared
    relation forces it, which flattening here would destroy up front."""

    for _name, _amount, f in model.criteria:
        if free_vars(f):
            raise BackupError("reward criterion with free variables")
    out = list(model.reward_cases())
    if act.cost != 0:
        out.append(case((TRUE, -act.cost)))
    return out


def fodtr(
    model: FomdpModel,
    c: CaseStatement,
    act: StochasticAction,
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> CaseStatement:
    """Expected regressed value of a case through one stochastic action,
    discounted: probability-weighted cross-sum of the regressions through
    each nature's choice.  Reward is not part of this; it is added by the
    backup operators."""

    acc: CaseStatement | None = None
    for ch in act.choices:
        term = ChoiceTerm(ch.name, ch.params)
        regressed = regress_case(model, c, term)
        piece = cross_product(ch.prob, regressed, model.axioms, prune, budget)
        acc = (
            piece
            if acc is None
            else cross_sum(acc, piece, model.axioms, prune, budget)
        )
    assert acc is not None
    return scale_values(acc, AffineValue.of(model.discount))


def backup_param(
    model: FomdpModel,
    basis: Sequence[BasisFunction],
    act: StochasticAction,
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> list[CaseStatement]:
    """Parameterized backup: the structured case list whose flattened sum
    is the Q-value of act(x) under the weighted basis value function,
    with the action parameters x free.  Component order: reward-minus-
    cost, then one weighted regression per basis function."""

    out = [reward_case(model, act)]
    for b in basis:
        piece = fodtr(model, b.bcase, act, prune, budget)
        out.append(scale_values(piece, AffineValue.weight(b.index)))
    return out


_block_cache: dict[tuple, tuple[FomdpModel, CaseStatement]] = {}


def _affected_block(
    model: FomdpModel,
    affected: Sequence[BasisFunction],
    act: StochasticAction,
    prune: bool,
    budget: int,
) -> CaseStatement:
    """Flattened weight-symbolic sum of the affected basis functions'
    expected regressions.  Nothing here depends on the weight vector, so
    the result is cached across solver iterations — only the sorted
    quantification step needs redoing when weights move."""

    key = (
        id(model),
        act.name,
        tuple((b.index, b.bcase) for b in affected),
        prune,
        budget,
    )
    hit = _block_cache.get(key)
    if hit is not None and hit[0] is model:
        return hit[1]
    pieces = []
    for b in affected:
        piece = fodtr(model, b.bcase, act, prune, budget)
        pieces.append(scale_values(piece, AffineValue.weight(b.index)))
    block = flatten(pieces, model.axioms, prune, budget)
    _block_cache[key] = (model, block)
    return block


def backed_up_value(
    model: FomdpModel,
    basis: Sequence[BasisFunction],
    act: StochasticAction,
    weights: Sequence[Fraction],
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> list[CaseStatement]:
    """The discounted future-value components of the parameterless backup,
    without the reward: one discounted weight-scaled case per unaffected
    basis function, plus a single existentially quantified block (sorted at
    the given weight vector) covering every basis function the action
    affects."""

    affected = [b for b in basis if act.name in b.affected_by]
    unaffected = [b for b in basis if act.name not in b.affected_by]

    out = []
    for b in unaffected:
        piece = scale_values(b.bcase, AffineValue.weight(b.index, model.discount))
        out.append(piece)
    if affected:
        block = _affected_block(model, affected, act, prune, budget)
        quantified = exists_max(block, act.params, weights)
        if prune:
            quantified = prune_inconsistent(quantified, model.axioms, budget)
        out.append(quantified)
    return out


def backup_action(
    model: FomdpModel,
    basis: Sequence[BasisFunction],
    act: StochasticAction,
    weights: Sequence[Fraction],
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> list[CaseStatement]:
    """Parameterless backup: like backup_param, but the action parameters
    are existentially quantified into the block of basis functions the
    action actually affects, sorted at the given weight vector; unaffected
    basis functions keep their original structure, discounted and weight-
    scaled, with no quantification."""

    out = [reward_case(model, act)]
    out.extend(backed_up_value(model, basis, act, weights, prune, budget))
    return out
