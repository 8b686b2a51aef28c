"""Finite-structure semantics: ground evaluation and a satisfiability oracle.

Two distinct uses, two distinct universes:

* State evaluation (`eval_formula`) interprets formulas over the declared
  objects only.  The floor chain is finite, so the floor-above/floor-below
  functions are partial: an atom containing a non-denoting term is false.
  This is the real semantics of a concrete instance and is what regression
  soundness and the simulator are measured against.

* Consistency checks (`ground_satisfiable`) ask whether a formula has a
  model of the background order theory, which axiomatizes an unbounded
  chain.  Callers pass a universe extended with virtual floors past both
  ends (`Universe.extended`) so that chain-function terms up to the checked
  depth always denote; predicates over virtual floors stay unconstrained.

The satisfiability oracle expands quantifiers over the finite universe,
evaluates the interpreted vocabulary (chain order, equality, chain
functions), and hands the residual propositional structure to a small
DPLL solver via Tseitin transformation.
"""

from __future__ import annotations

from dataclasses import dataclass

from foalp.logic import (
    ORDER_ABOVE,
    ORDER_BELOW,
    PRED_FN,
    SIT_NEXT,
    SUCC_FN,
    ActionEq,
    And,
    Atom,
    Bottom,
    Const,
    Eq,
    Exists,
    Fn,
    Forall,
    Formula,
    Implies,
    LogicError,
    Not,
    Or,
    Term,
    Top,
    Var,
    constants_of,
    exists,
    simplify,
)

GroundAtom = tuple[str, tuple[str, ...]]


@dataclass
class Universe:
    """Finite sorted domain.  The chain sort's object tuple is ordered
    bottom to top and carries the interpretation of the order vocabulary."""

    sorts: dict[str, tuple[str, ...]]
    chain_sort: str = "floor"

    def __post_init__(self) -> None:
        self._index: dict[str, int] = {
            name: i for i, name in enumerate(self.sorts.get(self.chain_sort, ()))
        }

    def objects(self, sort: str | None) -> tuple[str, ...]:
        if sort is None:
            seen: dict[str, None] = {}
            for s in sorted(self.sorts):
                for o in self.sorts[s]:
                    seen.setdefault(o)
            return tuple(seen)
        if sort not in self.sorts:
            raise LogicError("unknown sort %r" % sort)
        return self.sorts[sort]

    def chain(self) -> tuple[str, ...]:
        return self.sorts.get(self.chain_sort, ())

    def chain_up(self, obj: str) -> str | None:
        i = self._index.get(obj)
        ch = self.chain()
        if i is None or i + 1 >= len(ch):
            return None
        return ch[i + 1]

    def chain_down(self, obj: str) -> str | None:
        i = self._index.get(obj)
        if i is None or i == 0:
            return None
        return self.chain()[i - 1]

    def is_above(self, a: str, b: str) -> bool:
        ia = self._index.get(a)
        ib = self._index.get(b)
        if ia is None or ib is None:
            return False
        return ia > ib

    def extended(self, margin: int) -> "Universe":
        """Universe with `margin` virtual floors appended past each end of
        the chain, so chain functions of bounded depth always denote."""

        ch = self.chain()
        lo = tuple("_below%d" % (margin - i) for i in range(margin))
        hi = tuple("_above%d" % (i + 1) for i in range(margin))
        sorts = dict(self.sorts)
        sorts[self.chain_sort] = lo + ch + hi
        return Universe(sorts, self.chain_sort)


@dataclass(frozen=True)
class GroundState:
    """A concrete situation: the set of true ground atoms, fluent and
    static alike."""

    atoms: frozenset[GroundAtom]

    def holds(self, pred: str, args: tuple[str, ...]) -> bool:
        return (pred, args) in self.atoms


def chain_fn_depth(f: Formula) -> int:
    """Deepest nesting of chain functions anywhere in the formula."""

    def term_d(t: Term) -> int:
        if isinstance(t, Fn):
            inner = max((term_d(a) for a in t.args), default=0)
            return inner + (1 if t.sym in (SUCC_FN, PRED_FN) else 0)
        return 0

    best = 0
    stack: list[Formula] = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, (Atom, ActionEq)):
            for t in g.args:
                best = max(best, term_d(t))
        elif isinstance(g, Eq):
            best = max(best, term_d(g.left), term_d(g.right))
        elif isinstance(g, Not):
            stack.append(g.body)
        elif isinstance(g, (And, Or)):
            stack.extend(g.items)
        elif isinstance(g, Implies):
            stack.append(g.lhs)
            stack.append(g.rhs)
        elif isinstance(g, (Exists, Forall)):
            stack.append(g.body)
    return best


def eval_term(t: Term, uni: Universe, env: dict[Var, str]) -> str | None:
    """Denotation of a term, or None when a chain function walks off the
    declared chain."""

    if isinstance(t, Var):
        if t not in env:
            raise LogicError("unbound variable %r" % (t.name,))
        return env[t]
    if isinstance(t, Const):
        return t.name
    if t.sym == SUCC_FN:
        v = eval_term(t.args[0], uni, env)
        return None if v is None else uni.chain_up(v)
    if t.sym == PRED_FN:
        v = eval_term(t.args[0], uni, env)
        return None if v is None else uni.chain_down(v)
    raise LogicError("uninterpreted function %r in ground evaluation" % (t.sym,))


def eval_formula(
    f: Formula,
    uni: Universe,
    state: GroundState,
    env: dict[Var, str] | None = None,
    action: tuple[str, tuple[str, ...]] | None = None,
) -> bool:
    """Truth of a state formula in a concrete situation.  Quantifiers range
    over the declared objects of their sort.  Atoms marked as post-action
    are rejected; regress them away first."""

    if env is None:
        env = {}
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    if isinstance(f, Atom):
        if f.sit == SIT_NEXT:
            raise LogicError("post-action atom %r in state evaluation" % (f.pred,))
        vals = []
        for t in f.args:
            v = eval_term(t, uni, env)
            if v is None:
                return False
            vals.append(v)
        if f.pred == ORDER_ABOVE:
            return uni.is_above(vals[0], vals[1])
        if f.pred == ORDER_BELOW:
            return uni.is_above(vals[1], vals[0])
        return state.holds(f.pred, tuple(vals))
    if isinstance(f, Eq):
        a = eval_term(f.left, uni, env)
        b = eval_term(f.right, uni, env)
        if a is None or b is None:
            return False
        return a == b
    if isinstance(f, ActionEq):
        if action is None:
            raise LogicError("action-equality atom outside a transition context")
        name, act_args = action
        if f.choice != name or len(f.args) != len(act_args):
            return False
        for t, v in zip(f.args, act_args):
            tv = eval_term(t, uni, env)
            if tv is None or tv != v:
                return False
        return True
    if isinstance(f, Not):
        return not eval_formula(f.body, uni, state, env, action)
    if isinstance(f, And):
        return all(eval_formula(g, uni, state, env, action) for g in f.items)
    if isinstance(f, Or):
        return any(eval_formula(g, uni, state, env, action) for g in f.items)
    if isinstance(f, Implies):
        return (not eval_formula(f.lhs, uni, state, env, action)) or eval_formula(
            f.rhs, uni, state, env, action
        )
    if isinstance(f, Exists):
        return _eval_quant(f.vars, f.body, uni, state, env, action, True)
    if isinstance(f, Forall):
        return _eval_quant(f.vars, f.body, uni, state, env, action, False)
    raise LogicError("cannot evaluate %r" % (f,))


def _eval_quant(
    vs: tuple[Var, ...],
    body: Formula,
    uni: Universe,
    state: GroundState,
    env: dict[Var, str],
    action: tuple[str, tuple[str, ...]] | None,
    existential: bool,
) -> bool:
    def rec(i: int, env: dict[Var, str]) -> bool:
        if i == len(vs):
            return eval_formula(body, uni, state, env, action)
        for o in uni.objects(vs[i].sort):
            env2 = dict(env)
            env2[vs[i]] = o
            if rec(i + 1, env2) == existential:
                return existential
        return not existential

    return rec(0, env)


# ---------------------------------------------------------------------------
# Satisfiability oracle: quantifier expansion + Tseitin + DPLL


def _replace_consts(f: Formula, mapping: dict[Const, Var]) -> Formula:
    """Swap placeholder constants for fresh variables.  The replacements
    are chosen not to collide with any variable in the formula, so no
    capture analysis is needed."""

    def on_term(t: Term) -> Term:
        if isinstance(t, Const):
            return mapping.get(t, t)
        if isinstance(t, Fn):
            return Fn(t.sym, tuple(on_term(a) for a in t.args), t.sort)
        return t

    if isinstance(f, Atom):
        return Atom(f.pred, tuple(on_term(t) for t in f.args), f.sit)
    if isinstance(f, Eq):
        return Eq(on_term(f.left), on_term(f.right))
    if isinstance(f, ActionEq):
        return ActionEq(f.choice, tuple(on_term(t) for t in f.args))
    if isinstance(f, Not):
        return Not(_replace_consts(f.body, mapping))
    if isinstance(f, And):
        return And(tuple(_replace_consts(g, mapping) for g in f.items))
    if isinstance(f, Or):
        return Or(tuple(_replace_consts(g, mapping) for g in f.items))
    if isinstance(f, Implies):
        return Implies(
            _replace_consts(f.lhs, mapping), _replace_consts(f.rhs, mapping)
        )
    if isinstance(f, Exists):
        return Exists(f.vars, _replace_consts(f.body, mapping))
    if isinstance(f, Forall):
        return Forall(f.vars, _replace_consts(f.body, mapping))
    return f


def _expand(
    f: Formula, uni: Universe, env: dict[Var, str], props: dict[GroundAtom, int]
):
    """Ground a formula to a propositional tree over atom keys.  Interpreted
    vocabulary is evaluated away; each residual ground atom becomes a
    numbered proposition."""

    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    if isinstance(f, Atom):
        if f.sit == SIT_NEXT:
            raise LogicError("post-action atom in satisfiability check")
        vals = []
        for t in f.args:
            v = eval_term(t, uni, env)
            if v is None:
                return False
            vals.append(v)
        if f.pred == ORDER_ABOVE:
            return uni.is_above(vals[0], vals[1])
        if f.pred == ORDER_BELOW:
            return uni.is_above(vals[1], vals[0])
        key = (f.pred, tuple(vals))
        if key not in props:
            props[key] = len(props) + 1
        return ("v", props[key])
    if isinstance(f, Eq):
        a = eval_term(f.left, uni, env)
        b = eval_term(f.right, uni, env)
        return a is not None and a == b
    if isinstance(f, ActionEq):
        raise LogicError("action-equality atom in satisfiability check")
    if isinstance(f, Not):
        x = _expand(f.body, uni, env, props)
        if isinstance(x, bool):
            return not x
        return ("n", x)
    if isinstance(f, (And, Or)):
        conj = isinstance(f, And)
        parts = []
        for g in f.items:
            x = _expand(g, uni, env, props)
            if isinstance(x, bool):
                if x != conj:
                    return x
                continue
            parts.append(x)
        if not parts:
            return conj
        if len(parts) == 1:
            return parts[0]
        return ("&" if conj else "|", tuple(parts))
    if isinstance(f, Implies):
        return _expand(Or((Not(f.lhs), f.rhs)), uni, env, props)
    if isinstance(f, (Exists, Forall)):
        conj = isinstance(f, Forall)
        domains = [uni.objects(v.sort) for v in f.vars]

        def rec(i: int, env2: dict[Var, str]):
            if i == len(f.vars):
                return _expand(f.body, uni, env2, props)
            items = []
            for o in domains[i]:
                env3 = dict(env2)
                env3[f.vars[i]] = o
                x = rec(i + 1, env3)
                if isinstance(x, bool):
                    if x != conj:
                        return x
                    continue
                items.append(x)
            if not items:
                return conj
            if len(items) == 1:
                return items[0]
            return ("&" if conj else "|", tuple(items))

        return rec(0, env)
    raise LogicError("cannot ground %r" % (f,))


def _tseitin(tree, nvars: int) -> tuple[list[tuple[int, ...]], int]:
    """CNF encoding of a propositional tree; returns clauses and the final
    variable count.  The root is asserted."""

    clauses: list[tuple[int, ...]] = []
    counter = [nvars]

    def lit(node) -> int:
        if node[0] == "v":
            return node[1]
        if node[0] == "n":
            return -lit(node[1])
        counter[0] += 1
        g = counter[0]
        subs = [lit(x) for x in node[1]]
        if node[0] == "&":
            for s in subs:
                clauses.append((-g, s))
            clauses.append(tuple([g] + [-s for s in subs]))
        else:
            for s in subs:
                clauses.append((g, -s))
            clauses.append(tuple([-g] + subs))
        return g

    clauses.append((lit(tree),))
    return clauses, counter[0]


def _dpll(clauses: list[tuple[int, ...]], nvars: int) -> bool:
    assign: dict[int, bool] = {}

    def value(l: int) -> bool | None:
        v = assign.get(abs(l))
        if v is None:
            return None
        return v if l > 0 else not v

    def solve() -> bool:
        while True:
            unit = 0
            progress = False
            for cl in clauses:
                unassigned = 0
                last = 0
                sat = False
                for l in cl:
                    v = value(l)
                    if v is True:
                        sat = True
                        break
                    if v is None:
                        unassigned += 1
                        last = l
                if sat:
                    continue
                if unassigned == 0:
                    return False
                if unassigned == 1:
                    unit = last
                    assign[abs(unit)] = unit > 0
                    progress = True
            if not progress:
                break
        for v in range(1, nvars + 1):
            if v not in assign:
                saved = dict(assign)
                assign[v] = False
                if solve():
                    return True
                assign.clear()
                assign.update(saved)
                assign[v] = True
                if solve():
                    return True
                assign.clear()
                assign.update(saved)
                return False
        return True

    return solve()


def ground_satisfiable(f: Formula, uni: Universe) -> bool:
    """Whether the formula has a model over the given finite universe.
    Placeholder constants (non-unique) are read existentially.  For
    consistency checks against the order theory, pass an extended universe
    so chain terms of the checked depth denote."""

    f = simplify(f)
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    frozen = sorted(
        (c for c in constants_of(f) if not c.unique), key=lambda c: c.name
    )
    if frozen:
        fresh = {
            c: Var("_u%d_%s" % (i, c.name.lstrip("_")), c.sort)
            for i, c in enumerate(frozen)
        }
        f = exists(tuple(fresh.values()), _replace_consts(f, fresh))
    props: dict[GroundAtom, int] = {}
    tree = _expand(f, uni, {}, props)
    if isinstance(tree, bool):
        return tree
    clauses, total = _tseitin(tree, len(props))
    return _dpll(clauses, total)
