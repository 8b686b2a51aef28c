"""Relational MDP models in the situation calculus.

A model bundles fluents, stochastic actions decomposed into nature's
choices, one successor-state axiom per fluent, choice probability cases,
an additive reward, action costs and preconditions, background axioms,
and a discount factor.

The regression operator rewrites a formula about the post-action
situation into an equivalent formula about the pre-action situation by
unfolding successor-state axioms and resolving action-equality literals
against a concrete nature's choice.  It is the single inference step the
whole solver is built on, so its soundness property (regressed formula
holds now iff the original holds after stepping) is tested exhaustively
on small universes.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from foalp.cases import AffineValue, CaseStatement, NoCoveringPartition, case
from foalp.logic import (
    FALSE,
    SIT_NEXT,
    SIT_NOW,
    ActionEq,
    And,
    Atom,
    AxiomSet,
    Const,
    Eq,
    Exists,
    Forall,
    Formula,
    Implies,
    Not,
    Or,
    Term,
    Var,
    conj,
    disj,
    exists,
    forall,
    implies,
    neg,
    simplify,
    substitute,
)
from foalp.semantics import GroundState, Universe, eval_formula


class FomdpError(Exception):
    pass


class UnknownFluent(FomdpError):
    pass


class PreconditionViolated(FomdpError):
    pass


@dataclass(frozen=True)
class ChoiceTerm:
    """A ground-able deterministic action term: nature's choice name plus
    argument terms."""

    name: str
    args: tuple[Term, ...] = ()

    def __repr__(self) -> str:
        return "%s(%s)" % (self.name, ", ".join(repr(a) for a in self.args))


@dataclass(frozen=True)
class NatureChoice:
    name: str
    params: tuple[Var, ...]
    prob: CaseStatement


@dataclass(frozen=True)
class StochasticAction:
    name: str
    params: tuple[Var, ...]
    choices: tuple[NatureChoice, ...]
    cost: Fraction
    precondition: Formula


@dataclass(frozen=True)
class Ssa:
    """Successor-state axiom: fluent(params) holds after an action iff the
    body holds before it; the body's action-equality literals refer to the
    reserved action variable."""

    fluent: str
    params: tuple[Var, ...]
    body: Formula


@dataclass
class FomdpModel:
    name: str
    sorts: tuple[str, ...]
    chain_sort: str | None
    constants: tuple[Const, ...]
    fluents: dict[str, tuple[str, ...]]
    statics: dict[str, tuple[str, ...]]
    actions: tuple[StochasticAction, ...]
    ssas: dict[str, Ssa]
    criteria: tuple[tuple[str, Fraction, Formula], ...]
    axioms: AxiomSet
    discount: Fraction

    def action(self, name: str) -> StochasticAction:
        for a in self.actions:
            if a.name == name:
                return a
        raise FomdpError("unknown action %r" % name)

    def choice_owner(self, choice_name: str) -> StochasticAction:
        for a in self.actions:
            for ch in a.choices:
                if ch.name == choice_name:
                    return a
        raise FomdpError("unknown choice %r" % choice_name)

    def reward_cases(self) -> tuple[CaseStatement, ...]:
        """One indicator case per additive criterion, scaled by its
        reward contribution."""

        out = []
        for _name, amount, f in self.criteria:
            out.append(case((f, AffineValue.of(amount)), (neg(f), 0)))
        return tuple(out)

    def reward_value(self, uni: Universe, state: GroundState) -> Fraction:
        total = Fraction(0)
        for _name, amount, f in self.criteria:
            if eval_formula(f, uni, state):
                total += amount
        return total


# ---------------------------------------------------------------------------
# Regression


def to_next(model: FomdpModel, f: Formula) -> Formula:
    """Re-mark every fluent atom of a current-state formula as post-action,
    leaving static atoms alone.  This is how a value-function partition is
    read when regressing it through a choice."""

    def rec(g: Formula) -> Formula:
        if isinstance(g, Atom):
            if g.pred in model.fluents and g.sit != SIT_NEXT:
                return Atom(g.pred, g.args, SIT_NEXT)
            return g
        if isinstance(g, Not):
            return Not(rec(g.body))
        if isinstance(g, And):
            return And(tuple(rec(x) for x in g.items))
        if isinstance(g, Or):
            return Or(tuple(rec(x) for x in g.items))
        if isinstance(g, Implies):
            return Implies(rec(g.lhs), rec(g.rhs))
        if isinstance(g, Exists):
            return Exists(g.vars, rec(g.body))
        if isinstance(g, Forall):
            return Forall(g.vars, rec(g.body))
        return g

    return rec(f)


def _reduce_action_eq(lit: ActionEq, ch: ChoiceTerm) -> Formula:
    """a = n(y) under a := ch.  Distinct choice names are distinct actions
    by unique names; matching names equate parameters pointwise."""

    if lit.choice != ch.name:
        return FALSE
    if len(lit.args) != len(ch.args):
        raise FomdpError(
            "choice %s used with %d and %d parameters"
            % (ch.name, len(lit.args), len(ch.args))
        )
    return conj(*[Eq(x, y) for x, y in zip(lit.args, ch.args)])


def regress(model: FomdpModel, f: Formula, ch: ChoiceTerm) -> Formula:
    """One-step regression through a deterministic choice.  Post-action
    fluent atoms unfold to their axiom bodies; action-equality literals
    collapse against the choice; connectives and quantifiers commute.

    Fluent atoms of the input must be post-action marked (see to_next);
    a current-situation fluent atom in the input is a caller bug, not a
    fixed point, and is rejected."""

    for atom in _atoms(f):
        if atom.pred in model.fluents and atom.sit == SIT_NOW:
            raise FomdpError(
                "fluent %s is current-situation marked; apply to_next before"
                " regressing" % atom.pred
            )

    def rec(g: Formula) -> Formula:
        if isinstance(g, Atom):
            if g.sit == SIT_NEXT:
                ssa = model.ssas.get(g.pred)
                if ssa is None:
                    raise UnknownFluent("no successor-state axiom for %r" % (g.pred,))
                env = dict(zip(ssa.params, g.args))
                return rec(substitute(ssa.body, env))
            return g
        if isinstance(g, ActionEq):
            return _reduce_action_eq(g, ch)
        if isinstance(g, Not):
            return neg(rec(g.body))
        if isinstance(g, And):
            return conj(*[rec(x) for x in g.items])
        if isinstance(g, Or):
            return disj(*[rec(x) for x in g.items])
        if isinstance(g, Implies):
            return implies(rec(g.lhs), rec(g.rhs))
        if isinstance(g, Exists):
            return exists(g.vars, rec(g.body))
        if isinstance(g, Forall):
            return forall(g.vars, rec(g.body))
        return g

    return simplify(rec(f))


def regress_case(model: FomdpModel, c: CaseStatement, ch: ChoiceTerm) -> CaseStatement:
    """Regress every partition formula; values are untouched."""

    return CaseStatement(
        tuple((regress(model, to_next(model, f), ch), v) for f, v in c.partitions)
    )


# ---------------------------------------------------------------------------
# Ground transition semantics


def ground_choice_args(ch: ChoiceTerm) -> tuple[str, ...]:
    out = []
    for t in ch.args:
        if not isinstance(t, Const):
            raise FomdpError("choice argument %r is not ground" % (t,))
        out.append(t.name)
    return tuple(out)


def precondition_holds(
    model: FomdpModel, uni: Universe, state: GroundState, action_name: str,
    args: tuple[str, ...],
) -> bool:
    act = model.action(action_name)
    env = {p: v for p, v in zip(act.params, args)}
    return eval_formula(act.precondition, uni, state, env)


def ground_step(
    model: FomdpModel, uni: Universe, state: GroundState, ch: ChoiceTerm
) -> GroundState:
    """Deterministic successor: every ground fluent atom takes the truth
    value of its axiom body, statics carry over."""

    act = model.choice_owner(ch.name)
    argvals = ground_choice_args(ch)
    if not precondition_holds(model, uni, state, act.name, argvals):
        raise PreconditionViolated(
            "%s(%s) is not executable here" % (act.name, ", ".join(argvals))
        )
    action = (ch.name, argvals)
    atoms: set[tuple[str, tuple[str, ...]]] = set()
    for pred, args in state.atoms:
        if pred in model.statics:
            atoms.add((pred, args))
    for fname, sorts in sorted(model.fluents.items()):
        ssa = model.ssas[fname]
        domains = [uni.objects(s) for s in sorts]
        for combo in product(*domains):
            env = {p: v for p, v in zip(ssa.params, combo)}
            if eval_formula(ssa.body, uni, state, env, action):
                atoms.add((fname, combo))
    return GroundState(frozenset(atoms))


def choice_distribution(
    model: FomdpModel,
    uni: Universe,
    state: GroundState,
    action_name: str,
    args: tuple[str, ...],
) -> tuple[tuple[ChoiceTerm, Fraction], ...]:
    """Nature's distribution over deterministic outcomes of one ground
    stochastic action."""

    act = model.action(action_name)
    arg_terms = tuple(Const(v) for v in args)
    out = []
    for ch in act.choices:
        env = {p: v for p, v in zip(ch.params, args)}
        p = _eval_prob(ch.prob, uni, state, env)
        if p != 0:
            out.append((ChoiceTerm(ch.name, arg_terms), p))
    return tuple(out)


def _eval_prob(
    c: CaseStatement, uni: Universe, state: GroundState, env: dict[Var, str]
) -> Fraction:
    for f, v in c.partitions:
        bound = substitute(f, {k: Const(val) for k, val in env.items()})
        if eval_formula(bound, uni, state):
            return v.evaluate()
    raise NoCoveringPartition("probability case does not cover the state")


# ---------------------------------------------------------------------------
# Model validation


def _enumerate_states(
    model: FomdpModel, uni: Universe, statics: frozenset | None = None
):
    """Every truth assignment over the ground fluent atoms, paired with
    either the given static atoms or every static assignment too.  Only
    usable on deliberately tiny universes."""

    fluent_atoms = _ground_atoms(model.fluents, uni)
    static_atoms = () if statics is not None else _ground_atoms(model.statics, uni)
    if len(fluent_atoms) + len(static_atoms) > 16:
        raise FomdpError(
            "universe too large to enumerate (%d atoms)"
            % (len(fluent_atoms) + len(static_atoms))
        )
    for smask in range(2 ** len(static_atoms)) if statics is None else (0,):
        base = (
            set(statics)
            if statics is not None
            else {a for i, a in enumerate(static_atoms) if smask >> i & 1}
        )
        for fmask in range(2 ** len(fluent_atoms)):
            atoms = set(base)
            atoms.update(a for i, a in enumerate(fluent_atoms) if fmask >> i & 1)
            yield GroundState(frozenset(atoms))


def _ground_atoms(
    preds: dict[str, tuple[str, ...]], uni: Universe
) -> tuple[tuple[str, tuple[str, ...]], ...]:
    out = []
    for pred, sorts in sorted(preds.items()):
        for combo in product(*[uni.objects(s) for s in sorts]):
            out.append((pred, combo))
    return tuple(out)


def validate(model: FomdpModel, uni: Universe) -> list[str]:
    """Structural and semantic checks on small universes; returns human-
    readable violation reports, empty when clean."""

    problems: list[str] = []

    for fname in model.fluents:
        if fname not in model.ssas:
            problems.append("fluent %s has no successor-state axiom" % fname)
    for fname in model.ssas:
        if fname not in model.fluents:
            problems.append("successor-state axiom for undeclared fluent %s" % fname)

    choice_names = set()
    for act in model.actions:
        for ch in act.choices:
            if ch.name in choice_names:
                problems.append("choice name %s reused" % ch.name)
            choice_names.add(ch.name)
            for _f, v in ch.prob.partitions:
                if not v.is_constant:
                    problems.append("probability of %s is not numeric" % ch.name)
                elif not 0 <= v.constant <= 1:
                    problems.append(
                        "probability %s of %s outside [0, 1]" % (v, ch.name)
                    )

    for ssa in model.ssas.values():
        for lit in _action_literals(ssa.body):
            if lit.choice not in choice_names:
                problems.append(
                    "axiom for %s mentions unknown choice %s" % (ssa.fluent, lit.choice)
                )

    if not 0 <= model.discount < 1:
        problems.append("discount %s outside [0, 1)" % model.discount)

    try:
        states = list(_enumerate_states(model, uni))
    except FomdpError as e:
        problems.append(str(e))
        return problems

    sat_seen = {a.name: False for a in model.actions}
    for state in states:
        for act in model.actions:
            domains = [uni.objects(p.sort) for p in act.params]
            for combo in product(*domains):
                total = Fraction(0)
                for ch in act.choices:
                    env = {p: v for p, v in zip(ch.params, combo)}
                    try:
                        total += _eval_prob(ch.prob, uni, state, env)
                    except NoCoveringPartition:
                        problems.append(
                            "choice %s probability case misses a state" % ch.name
                        )
                        total = Fraction(1)
                        break
                if total != 1:
                    problems.append(
                        "choices of %s(%s) sum to %s in state %s"
                        % (act.name, ", ".join(combo), total, sorted(state.atoms))
                    )
                    break
                if precondition_holds(model, uni, state, act.name, combo):
                    sat_seen[act.name] = True
            else:
                continue
            break
    for name, seen in sorted(sat_seen.items()):
        if not seen:
            problems.append("precondition of %s is never satisfiable" % name)
    return problems


def _action_literals(f: Formula) -> list[ActionEq]:
    return [g for g in _walk(f) if isinstance(g, ActionEq)]


def _atoms(f: Formula) -> list[Atom]:
    return [g for g in _walk(f) if isinstance(g, Atom)]


def _walk(f: Formula):
    stack = [f]
    while stack:
        g = stack.pop()
        yield g
        if isinstance(g, Not):
            stack.append(g.body)
        elif isinstance(g, (And, Or)):
            stack.extend(g.items)
        elif isinstance(g, Implies):
            stack.append(g.lhs)
            stack.append(g.rhs)
        elif isinstance(g, (Exists, Forall)):
            stack.append(g.body)
