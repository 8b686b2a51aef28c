"""First-order logic substrate for relational MDP solving.

Terms, formulas with situation markers, clausal conversion, and a bounded
resolution prover used to decide (one-sidedly) whether case partitions are
inconsistent.  The prover eliminates one relation at a time under an
inference budget; running out of budget yields Unknown, never a wrong
Inconsistent, so downstream pruning errs on the side of keeping partitions.

The unification/resolution inner loop lives in foalp._kernel (pure Python)
and foalp._ckernel (the same source compiled with Cython); the fastest
available backend is selected at import time, overridable with the
FOALP_KERNEL environment variable ("c", "py", or "auto").
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator, Mapping, Sequence

from foalp import _kernel as _pykernel

_BACKEND_CHOICE = os.environ.get("FOALP_KERNEL", "auto").lower()
if _BACKEND_CHOICE == "py":
    kernel = _pykernel
    KERNEL_BACKEND = "python"
else:
    try:
        from foalp import _ckernel as kernel  # type: ignore[no-redef]

        KERNEL_BACKEND = "c"
    except ImportError:
        if _BACKEND_CHOICE == "c":
            raise
        kernel = _pykernel
        KERNEL_BACKEND = "python"

DEFAULT_BUDGET = 5000
DEFAULT_DEPTH_LIMIT = 32
MAX_CLAUSES = 20000
EQ = "="

ORDER_ABOVE = "above"
ORDER_BELOW = "below"
SUCC_FN = "fa"
PRED_FN = "fb"


class LogicError(Exception):
    """Raised for malformed formulas or conversion limit violations."""


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    name: str
    sort: str | None = None

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    """A named constant.  Distinct unique-named constants denote distinct
    objects; constants frozen from free variables set unique=False because
    they may corefer with anything."""

    name: str
    sort: str | None = None
    unique: bool = True

    def __repr__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Fn:
    """A function application, e.g. fa(f) for the floor above f."""

    sym: str
    args: tuple["Term", ...]
    sort: str | None = None

    def __repr__(self) -> str:
        return "%s(%s)" % (self.sym, ", ".join(repr(a) for a in self.args))


Term = Var | Const | Fn


def term_vars(t: Term) -> Iterator[Var]:
    if isinstance(t, Var):
        yield t
    elif isinstance(t, Fn):
        for a in t.args:
            yield from term_vars(a)


def subst_term(t: Term, env: Mapping[Var, Term]) -> Term:
    if isinstance(t, Var):
        return env.get(t, t)
    if isinstance(t, Fn):
        return Fn(t.sym, tuple(subst_term(a, env) for a in t.args), t.sort)
    return t


def term_depth(t: Term) -> int:
    if isinstance(t, Fn):
        return 1 + max((term_depth(a) for a in t.args), default=0)
    return 0


# ---------------------------------------------------------------------------
# Formulas

SIT_STATIC = "static"
SIT_NOW = "now"
SIT_NEXT = "next"


class Formula:
    """Base class; all formula nodes are immutable dataclasses."""

    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    def __repr__(self) -> str:
        return "true"


@dataclass(frozen=True)
class Bottom(Formula):
    def __repr__(self) -> str:
        return "false"


TRUE = Top()
FALSE = Bottom()


@dataclass(frozen=True)
class Atom(Formula):
    """A relational atom.  sit marks whether a fluent is read in the current
    situation, the successor situation, or is situation independent."""

    pred: str
    args: tuple[Term, ...] = ()
    sit: str = SIT_STATIC

    def __repr__(self) -> str:
        prime = "'" if self.sit == SIT_NEXT else ""
        if not self.args:
            return "%s%s" % (self.pred, prime)
        return "%s%s(%s)" % (self.pred, prime, ", ".join(repr(a) for a in self.args))


@dataclass(frozen=True)
class Eq(Formula):
    left: Term
    right: Term

    def __repr__(self) -> str:
        return "%r = %r" % (self.left, self.right)


@dataclass(frozen=True)
class ActionEq(Formula):
    """Equality between the implicit action variable and a named outcome
    term, e.g. a = upS(e).  Only legal inside effect axiom bodies; regression
    reduces it away before any other operation sees it."""

    choice: str
    args: tuple[Term, ...] = ()

    def __repr__(self) -> str:
        return "a = %s(%s)" % (self.choice, ", ".join(repr(a) for a in self.args))


@dataclass(frozen=True)
class Not(Formula):
    body: Formula

    def __repr__(self) -> str:
        return "!(%r)" % (self.body,)


@dataclass(frozen=True)
class And(Formula):
    items: tuple[Formula, ...]

    def __repr__(self) -> str:
        return "(%s)" % " & ".join(repr(i) for i in self.items)


@dataclass(frozen=True)
class Or(Formula):
    items: tuple[Formula, ...]

    def __repr__(self) -> str:
        return "(%s)" % " | ".join(repr(i) for i in self.items)


@dataclass(frozen=True)
class Implies(Formula):
    lhs: Formula
    rhs: Formula

    def __repr__(self) -> str:
        return "(%r -> %r)" % (self.lhs, self.rhs)


@dataclass(frozen=True)
class Exists(Formula):
    vars: tuple[Var, ...]
    body: Formula

    def __repr__(self) -> str:
        vs = ", ".join(v.name if v.sort is None else "%s:%s" % (v.name, v.sort) for v in self.vars)
        return "(exists %s . %r)" % (vs, self.body)


@dataclass(frozen=True)
class Forall(Formula):
    vars: tuple[Var, ...]
    body: Formula

    def __repr__(self) -> str:
        vs = ", ".join(v.name if v.sort is None else "%s:%s" % (v.name, v.sort) for v in self.vars)
        return "(forall %s . %r)" % (vs, self.body)


# Smart constructors.  These fold truth constants and flatten nesting so that
# regression through effect axioms leaves no true/false debris behind.


def conj(*items: Formula) -> Formula:
    flat: list[Formula] = []
    for f in items:
        if isinstance(f, Bottom):
            return FALSE
        if isinstance(f, Top):
            continue
        if isinstance(f, And):
            for g in f.items:
                if isinstance(g, Bottom):
                    return FALSE
                if not isinstance(g, Top) and g not in flat:
                    flat.append(g)
        elif f not in flat:
            flat.append(f)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(*items: Formula) -> Formula:
    flat: list[Formula] = []
    for f in items:
        if isinstance(f, Top):
            return TRUE
        if isinstance(f, Bottom):
            continue
        if isinstance(f, Or):
            for g in f.items:
                if isinstance(g, Top):
                    return TRUE
                if not isinstance(g, Bottom) and g not in flat:
                    flat.append(g)
        elif f not in flat:
            flat.append(f)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def neg(f: Formula) -> Formula:
    if isinstance(f, Top):
        return FALSE
    if isinstance(f, Bottom):
        return TRUE
    if isinstance(f, Not):
        return f.body
    return Not(f)


def exists(vars: Sequence[Var], body: Formula) -> Formula:
    if isinstance(body, (Top, Bottom)):
        return body
    fv = free_vars(body)
    kept = tuple(v for v in vars if v in fv)
    if not kept:
        return body
    if isinstance(body, Exists):
        return Exists(kept + body.vars, body.body)
    return Exists(kept, body)


def forall(vars: Sequence[Var], body: Formula) -> Formula:
    if isinstance(body, (Top, Bottom)):
        return body
    fv = free_vars(body)
    kept = tuple(v for v in vars if v in fv)
    if not kept:
        return body
    if isinstance(body, Forall):
        return Forall(kept + body.vars, body.body)
    return Forall(kept, body)


def implies(lhs: Formula, rhs: Formula) -> Formula:
    return Implies(lhs, rhs)


def free_vars(f: Formula) -> frozenset[Var]:
    if isinstance(f, Atom):
        return frozenset(v for t in f.args for v in term_vars(t))
    if isinstance(f, Eq):
        return frozenset(term_vars(f.left)) | frozenset(term_vars(f.right))
    if isinstance(f, ActionEq):
        return frozenset(v for t in f.args for v in term_vars(t))
    if isinstance(f, Not):
        return free_vars(f.body)
    if isinstance(f, (And, Or)):
        out: frozenset[Var] = frozenset()
        for g in f.items:
            out |= free_vars(g)
        return out
    if isinstance(f, Implies):
        return free_vars(f.lhs) | free_vars(f.rhs)
    if isinstance(f, (Exists, Forall)):
        return free_vars(f.body) - frozenset(f.vars)
    return frozenset()


def atoms_of(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from atoms_of(f.body)
    elif isinstance(f, (And, Or)):
        for g in f.items:
            yield from atoms_of(g)
    elif isinstance(f, Implies):
        yield from atoms_of(f.lhs)
        yield from atoms_of(f.rhs)
    elif isinstance(f, (Exists, Forall)):
        yield from atoms_of(f.body)


def constants_of(f: Formula) -> frozenset[Const]:
    out: set[Const] = set()

    def from_term(t: Term) -> None:
        if isinstance(t, Const):
            out.add(t)
        elif isinstance(t, Fn):
            for a in t.args:
                from_term(a)

    def walk(g: Formula) -> None:
        if isinstance(g, Atom):
            for t in g.args:
                from_term(t)
        elif isinstance(g, Eq):
            from_term(g.left)
            from_term(g.right)
        elif isinstance(g, ActionEq):
            for t in g.args:
                from_term(t)
        elif isinstance(g, Not):
            walk(g.body)
        elif isinstance(g, (And, Or)):
            for h in g.items:
                walk(h)
        elif isinstance(g, Implies):
            walk(g.lhs)
            walk(g.rhs)
        elif isinstance(g, (Exists, Forall)):
            walk(g.body)

    walk(f)
    return frozenset(out)


def substitute(f: Formula, env: Mapping[Var, Term]) -> Formula:
    """Capture-avoiding substitution of terms for free variables."""

    if not env:
        return f
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(subst_term(t, env) for t in f.args), f.sit)
    if isinstance(f, Eq):
        return Eq(subst_term(f.left, env), subst_term(f.right, env))
    if isinstance(f, ActionEq):
        return ActionEq(f.choice, tuple(subst_term(t, env) for t in f.args))
    if isinstance(f, Not):
        return Not(substitute(f.body, env))
    if isinstance(f, And):
        return And(tuple(substitute(g, env) for g in f.items))
    if isinstance(f, Or):
        return Or(tuple(substitute(g, env) for g in f.items))
    if isinstance(f, Implies):
        return Implies(substitute(f.lhs, env), substitute(f.rhs, env))
    if isinstance(f, (Exists, Forall)):
        inner = {v: t for v, t in env.items() if v not in f.vars}
        if not inner:
            return f
        clash = {v for t in inner.values() for v in term_vars(t)}
        bound = list(f.vars)
        renames: dict[Var, Term] = {}
        taken = {v.name for v in clash} | {v.name for v in free_vars(f.body)}
        for i, v in enumerate(bound):
            if v in clash:
                fresh = v.name
                while fresh in taken:
                    fresh += "_"
                taken.add(fresh)
                nv = Var(fresh, v.sort)
                renames[v] = nv
                bound[i] = nv
        body = substitute(f.body, renames) if renames else f.body
        body = substitute(body, inner)
        cls = Exists if isinstance(f, Exists) else Forall
        return cls(tuple(bound), body)
    return f


def simplify(f: Formula) -> Formula:
    """Fold truth constants and decidable equalities, bottom up."""

    if isinstance(f, Eq):
        if f.left == f.right:
            return TRUE
        if (
            isinstance(f.left, Const)
            and isinstance(f.right, Const)
            and f.left.unique
            and f.right.unique
            and f.left.name != f.right.name
        ):
            return FALSE
        return f
    if isinstance(f, Not):
        return neg(simplify(f.body))
    if isinstance(f, And):
        return conj(*(simplify(g) for g in f.items))
    if isinstance(f, Or):
        return disj(*(simplify(g) for g in f.items))
    if isinstance(f, Implies):
        lhs = simplify(f.lhs)
        rhs = simplify(f.rhs)
        if isinstance(lhs, Top):
            return rhs
        if isinstance(lhs, Bottom):
            return TRUE
        if isinstance(rhs, Top):
            return TRUE
        if isinstance(rhs, Bottom):
            return neg(lhs)
        return Implies(lhs, rhs)
    if isinstance(f, Exists):
        return exists(f.vars, simplify(f.body))
    if isinstance(f, Forall):
        return forall(f.vars, simplify(f.body))
    return f


def quantifier_depth(f: Formula) -> int:
    if isinstance(f, (Exists, Forall)):
        return 1 + quantifier_depth(f.body)
    if isinstance(f, Not):
        return quantifier_depth(f.body)
    if isinstance(f, (And, Or)):
        return max((quantifier_depth(g) for g in f.items), default=0)
    if isinstance(f, Implies):
        return max(quantifier_depth(f.lhs), quantifier_depth(f.rhs))
    return 0


def formula_fingerprint(f: Formula) -> str:
    return hashlib.sha1(repr(f).encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Normal form used by golden/structural comparisons

_NORM_SIT = {SIT_STATIC: 0, SIT_NOW: 1, SIT_NEXT: 2}


def normalize(f: Formula) -> Formula:
    """A display-insensitive normal form: negation normal form, flattened and
    sorted commutative operands, merged adjacent quantifiers, and canonical
    bound-variable names.  Two renderings of the same case partition (one
    written with a negated existential, one with a universal) normalize to
    the same value."""

    def nnf(g: Formula, sign: bool) -> Formula:
        if isinstance(g, Not):
            return nnf(g.body, not sign)
        if isinstance(g, Implies):
            return nnf(Or((Not(g.lhs), g.rhs)), sign)
        if isinstance(g, And):
            parts = tuple(nnf(h, sign) for h in g.items)
            return conj(*parts) if sign else disj(*parts)
        if isinstance(g, Or):
            parts = tuple(nnf(h, sign) for h in g.items)
            return disj(*parts) if sign else conj(*parts)
        if isinstance(g, Exists):
            body = nnf(g.body, sign)
            return exists(g.vars, body) if sign else forall(g.vars, body)
        if isinstance(g, Forall):
            body = nnf(g.body, sign)
            return forall(g.vars, body) if sign else exists(g.vars, body)
        g = simplify(g)
        if isinstance(g, (Top, Bottom)):
            return g if sign else neg(g)
        return g if sign else Not(g)

    def sort_ops(g: Formula) -> Formula:
        if isinstance(g, And):
            return conj(*sorted((sort_ops(h) for h in g.items), key=repr))
        if isinstance(g, Or):
            return disj(*sorted((sort_ops(h) for h in g.items), key=repr))
        if isinstance(g, Not):
            return neg(sort_ops(g.body))
        if isinstance(g, Exists):
            return exists(g.vars, sort_ops(g.body))
        if isinstance(g, Forall):
            return forall(g.vars, sort_ops(g.body))
        return g

    def canon_vars(g: Formula, counter: list[int]) -> Formula:
        if isinstance(g, (Exists, Forall)):
            env: dict[Var, Term] = {}
            fresh: list[Var] = []
            for v in g.vars:
                nv = Var("q%d" % counter[0], v.sort)
                counter[0] += 1
                env[v] = nv
                fresh.append(nv)
            cls = Exists if isinstance(g, Exists) else Forall
            return cls(tuple(fresh), canon_vars(substitute(g.body, env), counter))
        if isinstance(g, Not):
            return Not(canon_vars(g.body, counter))
        if isinstance(g, And):
            return And(tuple(canon_vars(h, counter) for h in g.items))
        if isinstance(g, Or):
            return Or(tuple(canon_vars(h, counter) for h in g.items))
        return g

    out = nnf(simplify(f), True)
    # Sorting can change which variable is met first, so iterate the
    # sort/rename pass until it reaches a fixed point (two rounds suffice in
    # practice; cap defensively).
    for _ in range(4):
        prev = out
        out = canon_vars(sort_ops(out), [0])
        if out == prev:
            break
    return out


# ---------------------------------------------------------------------------
# Clauses


@dataclass(frozen=True)
class Literal:
    positive: bool
    pred: str
    args: tuple[Term, ...] = ()

    def __repr__(self) -> str:
        s = "" if self.positive else "!"
        if self.pred == EQ:
            op = "=" if self.positive else "!="
            return "%r %s %r" % (self.args[0], op, self.args[1])
        if not self.args:
            return "%s%s" % (s, self.pred)
        return "%s%s(%s)" % (s, self.pred, ", ".join(repr(a) for a in self.args))


@dataclass(frozen=True)
class Clause:
    literals: frozenset[Literal]

    def __repr__(self) -> str:
        if not self.literals:
            return "<empty>"
        return " | ".join(sorted(repr(l) for l in self.literals))

    @property
    def is_empty(self) -> bool:
        return not self.literals


EMPTY_CLAUSE = Clause(frozenset())


class SymbolTable:
    """Interns predicate and function symbols to small integers for the
    kernel.  A single process-wide table keeps encodings stable across calls
    so verdicts can be memoized on encoded clause sets."""

    def __init__(self) -> None:
        self._by_key: dict[tuple[str, int], int] = {}
        self._names: list[str] = ["?"]

    def intern(self, name: str, arity: int) -> int:
        key = (name, arity)
        sid = self._by_key.get(key)
        if sid is None:
            sid = len(self._names)
            self._by_key[key] = sid
            self._names.append(name)
        return sid

    def name(self, sid: int) -> str:
        return self._names[sid]


SYMBOLS = SymbolTable()

# Equality is interned first so its id is stable, and both kernel backends
# are told about it — canon treats equality literals specially.
_pykernel.set_eq_pid(SYMBOLS.intern("p:" + EQ, 2))
if kernel is not _pykernel:
    kernel.set_eq_pid(SYMBOLS.intern("p:" + EQ, 2))


def _encode_term(t: Term, varmap: dict[Var, int]) -> int | tuple:
    if isinstance(t, Var):
        if t not in varmap:
            varmap[t] = -(len(varmap) + 1)
        return varmap[t]
    if isinstance(t, Const):
        # Separate namespaces: "k:" unique constants, "c:" frozen ones that
        # may corefer, "f:" functions, "p:" predicates.
        prefix = "k:" if t.unique else "c:"
        return (SYMBOLS.intern(prefix + t.name, 0),)
    return (SYMBOLS.intern("f:" + t.sym, len(t.args)),) + tuple(
        _encode_term(a, varmap) for a in t.args
    )


def encode_clause(clause: Clause) -> tuple | None:
    """Canonical encoded form, or None when the clause is trivially true
    (a tautology, or carrying a reflexive equation) and can be dropped."""

    varmap: dict[Var, int] = {}
    lits = []
    for lit in sorted(clause.literals, key=repr):
        pid = SYMBOLS.intern("p:" + lit.pred, len(lit.args))
        args = tuple(_encode_term(t, varmap) for t in lit.args)
        lits.append((1 if lit.positive else 0, pid, args))
    return kernel.canon(tuple(lits))


def _decode_term(t: int | tuple) -> Term:
    if isinstance(t, int):
        return Var("v%d" % (-t))
    name = SYMBOLS.name(t[0])
    if name.startswith("c:"):
        return Const(name[2:], unique=False)
    if name.startswith("k:"):
        return Const(name[2:])
    return Fn(name[2:], tuple(_decode_term(a) for a in t[1:]))


def decode_clause(ec: tuple) -> Clause:
    lits = []
    for sign, pid, args in ec:
        pred = SYMBOLS.name(pid)[2:]
        lits.append(Literal(bool(sign), pred, tuple(_decode_term(a) for a in args)))
    return Clause(frozenset(lits))


def pred_id(name: str, arity: int) -> int:
    return SYMBOLS.intern("p:" + name, arity)


def unify(a: Term | Atom, b: Term | Atom) -> dict[Var, Term] | None:
    """Most general unifier of two terms or two atoms, or None.

    Unification is syntactic with an occurs check; distinct unique-named
    constants never unify, and a neighbor function application never unifies
    with a constant (no arithmetic evaluation happens here).
    """

    if isinstance(a, Atom) != isinstance(b, Atom):
        return None
    if isinstance(a, Atom) and isinstance(b, Atom):
        if a.pred != b.pred or len(a.args) != len(b.args) or a.sit != b.sit:
            return None
        pairs = list(zip(a.args, b.args))
    else:
        pairs = [(a, b)]

    varmap: dict[Var, int] = {}
    enc_pairs = [(_encode_term(s, varmap), _encode_term(t, varmap)) for s, t in pairs]
    subst: dict = {}
    for es, et in enc_pairs:
        if not kernel.unify_terms(es, et, subst):
            return None
    back = {vid: v for v, vid in varmap.items()}
    out: dict[Var, Term] = {}
    for v, vid in varmap.items():
        t = kernel.resolve_term(vid, subst)
        if t == vid:
            continue
        out[v] = _decode_bound_term(t, back)
    return out


def _decode_bound_term(t: int | tuple, back: Mapping[int, Var]) -> Term:
    if isinstance(t, int):
        return back.get(t, Var("v%d" % (-t)))
    name = SYMBOLS.name(t[0])
    if name.startswith("c:"):
        return Const(name[2:], unique=False)
    if name.startswith("k:"):
        return Const(name[2:])
    return Fn(name[2:], tuple(_decode_bound_term(a, back) for a in t[1:]))


def clause_from_literals(lits: Iterable[Literal]) -> Clause | None:
    """Build a clause, dropping duplicate literals; None for tautologies."""

    s = frozenset(lits)
    for lit in s:
        if Literal(not lit.positive, lit.pred, lit.args) in s:
            return None
    return Clause(s)


# ---------------------------------------------------------------------------
# Clausal conversion


def _eliminate_implications(f: Formula) -> Formula:
    if isinstance(f, Implies):
        return Or((Not(_eliminate_implications(f.lhs)), _eliminate_implications(f.rhs)))
    if isinstance(f, Not):
        return Not(_eliminate_implications(f.body))
    if isinstance(f, And):
        return And(tuple(_eliminate_implications(g) for g in f.items))
    if isinstance(f, Or):
        return Or(tuple(_eliminate_implications(g) for g in f.items))
    if isinstance(f, Exists):
        return Exists(f.vars, _eliminate_implications(f.body))
    if isinstance(f, Forall):
        return Forall(f.vars, _eliminate_implications(f.body))
    return f


def _nnf(f: Formula, sign: bool) -> Formula:
    if isinstance(f, Not):
        return _nnf(f.body, not sign)
    if isinstance(f, And):
        items = tuple(_nnf(g, sign) for g in f.items)
        return conj(*items) if sign else disj(*items)
    if isinstance(f, Or):
        items = tuple(_nnf(g, sign) for g in f.items)
        return disj(*items) if sign else conj(*items)
    if isinstance(f, Exists):
        body = _nnf(f.body, sign)
        return exists(f.vars, body) if sign else forall(f.vars, body)
    if isinstance(f, Forall):
        body = _nnf(f.body, sign)
        return forall(f.vars, body) if sign else exists(f.vars, body)
    if isinstance(f, (Top, Bottom)):
        return f if sign else neg(f)
    return f if sign else Not(f)


def to_cnf(f: Formula, depth_limit: int = DEFAULT_DEPTH_LIMIT) -> tuple[Clause, ...]:
    """Convert a situation-free formula to a set of clauses.

    Free variables are read as universally quantified; callers wanting
    "unknown but fixed" semantics must freeze them to constants first.
    Existentials are Skolemized with symbols namespaced by a content hash of
    the input so that clause sets from different formulas never share
    witnesses.

    Args:
        f: formula containing no next-situation atoms and no action
            equalities.
        depth_limit: maximum quantifier nesting accepted.

    Returns:
        Deduplicated clauses in a fixed canonical order, so every caller
        sees the same sequence regardless of hash seed (empty for a valid
        formula; containing the empty clause for an unsatisfiable one).
    """

    f = simplify(f)
    if quantifier_depth(f) > depth_limit:
        raise LogicError("quantifier nesting exceeds depth limit %d" % depth_limit)
    for atom in atoms_of(f):
        if atom.sit == SIT_NEXT:
            raise LogicError("next-situation atom %r has no clausal form" % (atom,))
    if _contains_action_eq(f):
        raise LogicError("action equality must be reduced away before clausal conversion")
    if isinstance(f, Top):
        return frozenset()
    if isinstance(f, Bottom):
        return frozenset([EMPTY_CLAUSE])

    tag = formula_fingerprint(f)
    f = _nnf(_eliminate_implications(f), True)

    counter = [0]

    def fresh_var(v: Var) -> Var:
        counter[0] += 1
        return Var("v%d" % counter[0], v.sort)

    skcount = [0]

    def skolemize(g: Formula, univ: tuple[Var, ...], env: dict[Var, Term]) -> Formula:
        if isinstance(g, Exists):
            env = dict(env)
            for v in g.vars:
                skcount[0] += 1
                env[v] = Fn("sk%s_%d" % (tag, skcount[0]), univ, v.sort)
            return skolemize(g.body, univ, env)
        if isinstance(g, Forall):
            env = dict(env)
            fresh = tuple(fresh_var(v) for v in g.vars)
            for v, nv in zip(g.vars, fresh):
                env[v] = nv
            return skolemize(g.body, univ + fresh, env)
        if isinstance(g, And):
            return conj(*(skolemize(h, univ, env) for h in g.items))
        if isinstance(g, Or):
            return disj(*(skolemize(h, univ, env) for h in g.items))
        if isinstance(g, Not):
            return neg(skolemize(g.body, univ, env))
        return substitute(g, env)

    matrix = skolemize(f, (), {})

    def distribute(g: Formula) -> list[list[Literal]]:
        if isinstance(g, And):
            out: list[list[Literal]] = []
            for h in g.items:
                out.extend(distribute(h))
                if len(out) > MAX_CLAUSES:
                    raise LogicError("clausal form exceeds %d clauses" % MAX_CLAUSES)
            return out
        if isinstance(g, Or):
            parts = [distribute(h) for h in g.items]
            out = [[]]
            for p in parts:
                out = [a + b for a in out for b in p]
                if len(out) > MAX_CLAUSES:
                    raise LogicError("clausal form exceeds %d clauses" % MAX_CLAUSES)
            return out
        return [[_as_literal(g)]]

    clauses: set[Clause] = set()
    for lits in distribute(matrix):
        c = clause_from_literals(lits)
        if c is not None:
            clauses.add(c)
    return tuple(sorted(clauses, key=repr))


def _as_literal(g: Formula) -> Literal:
    positive = True
    if isinstance(g, Not):
        positive = False
        g = g.body
    if isinstance(g, Atom):
        return Literal(positive, g.pred, g.args)
    if isinstance(g, Eq):
        return Literal(positive, EQ, (g.left, g.right))
    raise LogicError("not a literal after NNF: %r" % (g,))


def _contains_action_eq(f: Formula) -> bool:
    if isinstance(f, ActionEq):
        return True
    if isinstance(f, Not):
        return _contains_action_eq(f.body)
    if isinstance(f, (And, Or)):
        return any(_contains_action_eq(g) for g in f.items)
    if isinstance(f, Implies):
        return _contains_action_eq(f.lhs) or _contains_action_eq(f.rhs)
    if isinstance(f, (Exists, Forall)):
        return _contains_action_eq(f.body)
    return False


def freeze_free_vars(f: Formula) -> Formula:
    """Replace free variables by fresh non-unique constants, giving them
    "some fixed object" semantics for consistency queries."""

    fv = sorted(free_vars(f), key=lambda v: v.name)
    if not fv:
        return f
    env = {v: Const("_" + v.name, v.sort, unique=False) for v in fv}
    return substitute(f, env)


# ---------------------------------------------------------------------------
# Background axioms


@dataclass(frozen=True)
class AxiomSet:
    """Background theory supplied to consistency checks: domain axioms in
    clausal form.  Unique-names units and the equality axioms are added per
    query because they depend on the constants and predicates present."""

    clauses: tuple[Clause, ...] = ()

    def __add__(self, other: "AxiomSet") -> "AxiomSet":
        merged = list(self.clauses)
        for c in other.clauses:
            if c not in merged:
                merged.append(c)
        return AxiomSet(tuple(merged))


def order_axioms(sort: str) -> AxiomSet:
    """Axioms for a totally ordered sort with neighbor functions: transitivity
    of above/below, mutual exclusion, converses, irreflexivity via equality,
    and the neighbor/inverse laws."""

    x, y, z = Var("x", sort), Var("y", sort), Var("z", sort)

    def lit(pos: bool, pred: str, *args: Term) -> Literal:
        return Literal(pos, pred, tuple(args))

    fa_x = Fn(SUCC_FN, (x,), sort)
    fb_x = Fn(PRED_FN, (x,), sort)
    raw = [
        [lit(False, ORDER_BELOW, x, z), lit(False, ORDER_BELOW, z, y), lit(True, ORDER_BELOW, x, y)],
        [lit(False, ORDER_ABOVE, x, z), lit(False, ORDER_ABOVE, z, y), lit(True, ORDER_ABOVE, x, y)],
        [lit(False, ORDER_ABOVE, x, y), lit(False, ORDER_BELOW, x, y)],
        [lit(False, ORDER_ABOVE, x, y), lit(True, ORDER_BELOW, y, x)],
        [lit(False, ORDER_BELOW, x, y), lit(False, ORDER_ABOVE, x, y)],
        [lit(False, ORDER_BELOW, x, y), lit(True, ORDER_ABOVE, y, x)],
        [lit(False, ORDER_ABOVE, x, y), lit(False, EQ, x, y)],
        [lit(False, ORDER_BELOW, x, y), lit(False, EQ, x, y)],
        [lit(False, EQ, x, y), lit(False, ORDER_ABOVE, x, y)],
        [lit(False, EQ, x, y), lit(False, ORDER_BELOW, x, y)],
        [lit(True, ORDER_ABOVE, fa_x, x)],
        [lit(True, ORDER_BELOW, fb_x, x)],
        [lit(True, EQ, x, Fn(SUCC_FN, (fb_x,), sort))],
        [lit(True, EQ, x, Fn(PRED_FN, (fa_x,), sort))],
    ]
    out: list[Clause] = []
    for lits in raw:
        c = clause_from_literals(lits)
        if c is not None and c not in out:
            out.append(c)
    return AxiomSet(tuple(out))


def equality_axioms() -> tuple[Clause, ...]:
    x, y, z = Var("x"), Var("y"), Var("z")
    return (
        Clause(frozenset([Literal(True, EQ, (x, x))])),
        Clause(frozenset([Literal(False, EQ, (x, y)), Literal(True, EQ, (y, x))])),
        Clause(
            frozenset(
                [
                    Literal(False, EQ, (x, y)),
                    Literal(False, EQ, (y, z)),
                    Literal(True, EQ, (x, z)),
                ]
            )
        ),
    )


def unique_names_units(clauses: Iterable[Clause]) -> list[Clause]:
    """Inequality units for every pair of distinct unique-named constants."""

    consts: set[Const] = set()

    def from_term(t: Term) -> None:
        if isinstance(t, Const) and t.unique:
            consts.add(t)
        elif isinstance(t, Fn):
            for a in t.args:
                from_term(a)

    for c in clauses:
        for lit in c.literals:
            for t in lit.args:
                from_term(t)
    named = sorted(consts, key=lambda c: c.name)
    out = []
    for i, a in enumerate(named):
        for b in named[i + 1 :]:
            out.append(Clause(frozenset([Literal(False, EQ, (a, b))])))
    return out


# ---------------------------------------------------------------------------
# Resolution interface


@dataclass(frozen=True)
class ResolutionResult:
    clauses: tuple[Clause, ...]
    derived_empty: bool
    budget_exhausted: bool
    inferences: int


class ConsistencyVerdict(Enum):
    INCONSISTENT = "inconsistent"
    UNKNOWN = "unknown"


def resolve_on(
    clauses: Iterable[Clause], relation: str, budget: int = DEFAULT_BUDGET
) -> ResolutionResult:
    """Saturate the clause set by resolving on one relation, then drop every
    clause still mentioning it.

    Dropping is satisfiability preserving once saturation on the relation is
    complete; under an exhausted budget the result may keep a satisfiable
    look that full saturation would have refuted, which downstream callers
    treat as Unknown.  Complementary unit clauses of any relation resolve
    against each other the moment both are present, so contradictions that
    never touch the eliminated relation still surface.
    """

    clauses = tuple(clauses)
    enc = []
    seen = set()
    for c in clauses:
        if c.is_empty:
            return ResolutionResult((EMPTY_CLAUSE,), True, False, 0)
        ec = encode_with_dedup(c, seen)
        if ec is not None:
            enc.append(ec)
    arity = _relation_arity(clauses, relation)
    pid = pred_id(relation, arity) if arity is not None else pred_id(relation, 0)
    kept, empty, exhausted, inferences = kernel.saturate_on(tuple(enc), pid, budget)
    out = tuple(decode_clause(ec) for ec in kept)
    if empty:
        out = out + (EMPTY_CLAUSE,)
    return ResolutionResult(out, empty, exhausted, inferences)


def encode_with_dedup(c: Clause, seen: set) -> tuple | None:
    ec = encode_clause(c)
    if ec is None or ec in seen:
        return None
    seen.add(ec)
    return ec


def _relation_arity(clauses: Iterable[Clause], relation: str) -> int | None:
    for c in clauses:
        for lit in c.literals:
            if lit.pred == relation:
                return len(lit.args)
    return None


_verdict_cache: dict[tuple, tuple[ConsistencyVerdict, int]] = {}
_elimination_cache: dict[tuple, tuple[frozenset | None, bool, int]] = {}
_background_cache: dict[tuple, "Background"] = {}


def clear_caches() -> None:
    _verdict_cache.clear()
    _elimination_cache.clear()
    _background_cache.clear()
    _formula_verdict_cache.clear()


class Background:
    """Encoded background theory reused across many eliminations.

    The clauses are encoded once, and the closure of the background alone
    under each eliminated relation is memoised on the instance — a sweep
    over many partitions seeds its saturations with the finished closure
    instead of re-deriving the background's own products every time, and
    subtracts the non-relation part from its survivors.
    """

    __slots__ = ("enc", "enc_set", "budget", "_full", "_nonpid")

    def __init__(self, clauses: Iterable[Clause], budget: int = DEFAULT_BUDGET):
        seen: set = set()
        enc = []
        for c in clauses:
            if c.is_empty:
                raise LogicError("background theory contains the empty clause")
            ec = encode_with_dedup(c, seen)
            if ec is not None:
                enc.append(ec)
        self.enc = tuple(sorted(enc, key=repr))
        self.enc_set = frozenset(self.enc)
        self.budget = budget
        self._full: dict[int, tuple[tuple, bool]] = {}
        self._nonpid: dict[int, frozenset] = {}

    def full_closure(self, pid: int) -> tuple[tuple, bool]:
        """Saturation of the background alone on one relation, kept whole
        (relation clauses included) so eliminations can start from it;
        second element reports budget exhaustion."""

        got = self._full.get(pid)
        if got is None:
            kept, empty, exhausted, _i = kernel.saturate_on(
                self.enc, pid, self.budget, include_pid=True
            )
            if empty:
                raise LogicError("background theory is itself inconsistent")
            got = (kept, exhausted)
            self._full[pid] = got
            self._nonpid[pid] = frozenset(
                c for c in kept if not kernel.mentions(c, pid)
            )
        return got

    def closure(self, pid: int) -> frozenset:
        self.full_closure(pid)
        return self._nonpid[pid]


def background(clauses: Iterable[Clause], budget: int = DEFAULT_BUDGET) -> Background:
    """Content-cached Background, so equal theories share closure memos."""

    bg = Background(clauses, budget)
    key = (bg.enc_set, budget)
    hit = _background_cache.get(key)
    if hit is not None:
        return hit
    _background_cache[key] = bg
    return bg


def eliminate_encoded(
    enc_work: frozenset,
    pid: int,
    bg: Background,
    budget: int = DEFAULT_BUDGET,
) -> tuple[frozenset | None, bool, int]:
    """Encoded-clause core of `eliminate_on`.

    Returns (survivors, budget_exhausted, inferences); survivors is None
    when the work refutes together with the background.
    """

    key = (enc_work, bg.enc_set, pid, budget)
    hit = _elimination_cache.get(key)
    if hit is not None:
        return hit
    full, bg_exhausted = bg.full_closure(pid)
    work = tuple(sorted(enc_work, key=repr))
    kept, empty, exhausted, inferences = kernel.saturate_on(
        full + work, pid, budget, frozen=len(full)
    )
    exhausted = exhausted or bg_exhausted
    if empty:
        out: tuple[frozenset | None, bool, int] = (None, exhausted, inferences)
    else:
        out = (frozenset(kept) - bg.closure(pid), exhausted, inferences)
    _elimination_cache[key] = out
    return out


def eliminate_on(
    clauses: Iterable[Clause],
    relation: str,
    axioms: AxiomSet | None = None,
    budget: int = DEFAULT_BUDGET,
) -> ResolutionResult:
    """Eliminate one relation from a clause set relative to a background
    theory.

    The set is saturated on the relation together with the background
    clauses (plus equality axioms and unique-names units when equality is
    involved), every clause mentioning the relation is dropped, and so is
    everything the background alone derives — those clauses are globally
    true and would otherwise pile up in every caller-side set.  The result
    is what the input specifically contributes once the relation is gone.
    """

    work = tuple(clauses)
    for c in work:
        if c.is_empty:
            return ResolutionResult((EMPTY_CLAUSE,), True, False, 0)

    bgc: list[Clause] = list(axioms.clauses) if axioms is not None else []
    has_eq = any(
        lit.pred == EQ for c in (*work, *bgc) for lit in c.literals
    )
    if has_eq:
        bgc.extend(equality_axioms())
    bgc.extend(unique_names_units((*work, *bgc)))

    seen: set = set()
    enc_work = frozenset(
        e for c in work if (e := encode_with_dedup(c, seen)) is not None
    )
    arity = _relation_arity((*work, *bgc), relation)
    pid = pred_id(relation, arity if arity is not None else 0)

    survivors, exhausted, inferences = eliminate_encoded(
        enc_work, pid, background(bgc, budget), budget
    )
    if survivors is None:
        return ResolutionResult((EMPTY_CLAUSE,), True, exhausted, inferences)
    out = tuple(decode_clause(ec) for ec in sorted(survivors, key=repr))
    return ResolutionResult(out, False, exhausted, inferences)


def has_unit_conflict_encoded(enc: Iterable[tuple]) -> bool:
    enc = tuple(enc)
    return any(len(c) == 0 for c in enc) or kernel.unit_conflicts(enc)


def has_unit_conflict(clauses: Iterable[Clause]) -> bool:
    """Cheap inconsistency filter: two unit clauses with unifiable,
    oppositely signed literals.  Misses everything deeper; never wrong
    when it fires."""

    seen: set = set()
    enc = []
    for c in clauses:
        if c.is_empty:
            return True
        ec = encode_with_dedup(c, seen)
        if ec is not None:
            enc.append(ec)
    return kernel.unit_conflicts(tuple(enc))


def check_clauses(
    clauses: Iterable[Clause],
    axioms: AxiomSet | None = None,
    budget: int = DEFAULT_BUDGET,
) -> tuple[ConsistencyVerdict, int]:
    """Consistency of a clause set against a background theory.

    Relations are eliminated one at a time, cheapest (fewest occurrences)
    first with equality forced last; each elimination step gets the full
    inference budget.  Inconsistent only on a derived empty clause.
    """

    work: list[Clause] = []
    for c in clauses:
        if c.is_empty:
            return ConsistencyVerdict.INCONSISTENT, 0
        work.append(c)
    if axioms is not None:
        work.extend(axioms.clauses)
    preds: dict[str, int] = {}
    has_eq = False
    for c in work:
        for lit in c.literals:
            if lit.pred == EQ:
                has_eq = True
            else:
                preds[lit.pred] = preds.get(lit.pred, 0) + 1
    if has_eq:
        work.extend(equality_axioms())
    work.extend(unique_names_units(work))

    enc = []
    seen: set = set()
    for c in work:
        ec = encode_with_dedup(c, seen)
        if ec is not None:
            enc.append(ec)
    order = sorted(preds, key=lambda p: (preds[p], p))
    pids = [pred_id(p, _relation_arity(work, p) or 0) for p in order]
    if has_eq:
        pids.append(pred_id(EQ, 2))

    key = (frozenset(enc), tuple(pids), budget)
    hit = _verdict_cache.get(key)
    if hit is not None:
        return hit

    current = tuple(enc)
    total = 0
    verdict = ConsistencyVerdict.UNKNOWN
    for pid in pids:
        kept, empty, _exhausted, inferences = kernel.saturate_on(current, pid, budget)
        total += inferences
        if empty:
            verdict = ConsistencyVerdict.INCONSISTENT
            break
        current = kept
    _verdict_cache[key] = (verdict, total)
    return verdict, total


_formula_verdict_cache: dict[tuple, ConsistencyVerdict] = {}


def is_inconsistent(
    f: Formula, axioms: AxiomSet | None = None, budget: int = DEFAULT_BUDGET
) -> ConsistencyVerdict:
    """One-sided consistency of a formula: INCONSISTENT only when resolution
    derives the empty clause within budget, UNKNOWN otherwise.  Free
    variables are frozen to fixed anonymous constants."""

    key = (f, axioms.clauses if axioms is not None else None, budget)
    hit = _formula_verdict_cache.get(key)
    if hit is not None:
        return hit
    g = simplify(f)
    if isinstance(g, Bottom):
        verdict = ConsistencyVerdict.INCONSISTENT
    else:
        clauses = to_cnf(freeze_free_vars(g))
        verdict, _ = check_clauses(clauses, axioms, budget)
    _formula_verdict_cache[key] = verdict
    return verdict
