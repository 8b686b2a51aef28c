"""Parser for the domain specification text format.

One file declares a whole relational MDP: sorts, constants, predicates,
actions with costs, preconditions and nature's choices, successor-state
axioms, background axioms, additive reward criteria, and the discount.
The grammar is documented in docs/domain_format.md; the shipped elevator
model is data in this format, not Python code.

Formulas are parsed by precedence climbing: `!` binds tightest, then `&`,
`|`, `->` (right associative); quantifier bodies extend as far right as
possible.  `t1 != t2` is sugar for `!(t1 = t2)`, and `a = choice(args)`
is the action-equality literal of successor-state axiom bodies.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from foalp.cases import AffineValue, CaseStatement
from foalp.fomdp import FomdpModel, NatureChoice, Ssa, StochasticAction
from foalp.logic import (
    ORDER_ABOVE,
    ORDER_BELOW,
    PRED_FN,
    SIT_NOW,
    SIT_STATIC,
    SUCC_FN,
    ActionEq,
    Atom,
    AxiomSet,
    Const,
    Eq,
    Fn,
    Formula,
    Term,
    Var,
    conj,
    disj,
    exists,
    forall,
    implies,
    neg,
    order_axioms,
    to_cnf,
)

KEYWORDS = {
    "domain", "sort", "chain", "const", "static", "fluent", "axiom",
    "discount", "action", "cost", "precond", "choice", "prob", "ssa",
    "criterion", "case", "otherwise", "true", "false", "forall", "exists",
    "a",
}

PUNCT = ("->", ":=", "!=", "(", ")", "[", "]", ",", ";", ":", ".", "=", "!",
         "&", "|", "/", "-")


class ParseError(Exception):
    def __init__(self, msg: str, line: int, col: int) -> None:
        super().__init__("%s (line %d, column %d)" % (msg, line, col))
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    kind: str  # "kw", "ident", "number", punctuation literal, "eof"
    text: str
    line: int
    col: int


def tokenize(src: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and src[i] != "\n":
                i += 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            word = src[i:j]
            kind = "kw" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if c.isdigit():
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            toks.append(Token("number", src[i:j], line, col))
            col += j - i
            i = j
            continue
        two = src[i : i + 2]
        if two in PUNCT:
            toks.append(Token(two, two, line, col))
            i += 2
            col += 2
            continue
        if c in PUNCT:
            toks.append(Token(c, c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError("unexpected character %r" % c, line, col)
    toks.append(Token("eof", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str) -> None:
        self.toks = tokenize(src)
        self.pos = 0
        self.name = ""
        self.sorts: list[str] = []
        self.chain_sort: str | None = None
        self.consts: dict[str, Const] = {}
        self.fluents: dict[str, tuple[str, ...]] = {}
        self.statics: dict[str, tuple[str, ...]] = {}
        self.axiom_formulas: list[Formula] = []
        self.discount: Fraction | None = None
        self.actions: list[StochasticAction] = []
        self.ssas: dict[str, Ssa] = {}
        self.criteria: list[tuple[str, Fraction, Formula]] = []

    # -- token plumbing

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> Token:
        t = self.peek()
        if t.kind != kind:
            raise ParseError(
                "expected %s, found %r" % (kind, t.text or "end of file"),
                t.line,
                t.col,
            )
        return self.next()

    def expect_kw(self, word: str) -> Token:
        t = self.peek()
        if t.kind != "kw" or t.text != word:
            raise ParseError(
                "expected %r, found %r" % (word, t.text or "end of file"),
                t.line,
                t.col,
            )
        return self.next()

    def at_kw(self, word: str) -> bool:
        t = self.peek()
        return t.kind == "kw" and t.text == word

    def fail(self, msg: str) -> ParseError:
        t = self.peek()
        return ParseError(msg, t.line, t.col)

    # -- top level

    def parse(self) -> FomdpModel:
        self.expect_kw("domain")
        self.name = self.expect("ident").text
        while not self.peek().kind == "eof":
            t = self.peek()
            if t.kind != "kw":
                raise self.fail("expected a declaration keyword, found %r" % t.text)
            if t.text == "sort":
                self.decl_sort()
            elif t.text == "const":
                self.decl_const()
            elif t.text in ("static", "fluent"):
                self.decl_pred()
            elif t.text == "axiom":
                self.next()
                self.axiom_formulas.append(self.formula({}))
            elif t.text == "discount":
                self.next()
                self.discount = self.number()
            elif t.text == "action":
                self.decl_action()
            elif t.text == "ssa":
                self.decl_ssa()
            elif t.text == "criterion":
                self.decl_criterion()
            else:
                raise self.fail("unexpected keyword %r here" % t.text)
        return self.build()

    def decl_sort(self) -> None:
        self.expect_kw("sort")
        name = self.expect("ident").text
        if name in self.sorts:
            raise self.fail("sort %r declared twice" % name)
        self.sorts.append(name)
        if self.at_kw("chain"):
            self.next()
            if self.chain_sort is not None:
                raise self.fail("only one sort can be the chain sort")
            self.chain_sort = name

    def decl_const(self) -> None:
        self.expect_kw("const")
        t = self.expect("ident")
        self.expect(":")
        sort = self.sort_ref()
        if t.text in self.consts:
            raise ParseError("constant %r declared twice" % t.text, t.line, t.col)
        self.consts[t.text] = Const(t.text, sort)

    def decl_pred(self) -> None:
        which = self.next().text
        t = self.expect("ident")
        name = t.text
        if name in self.fluents or name in self.statics or name in (
            ORDER_ABOVE,
            ORDER_BELOW,
        ):
            raise ParseError("predicate %r declared twice" % name, t.line, t.col)
        self.expect("(")
        sorts: list[str] = []
        if self.peek().kind != ")":
            sorts.append(self.sort_ref())
            while self.peek().kind == ",":
                self.next()
                sorts.append(self.sort_ref())
        self.expect(")")
        (self.fluents if which == "fluent" else self.statics)[name] = tuple(sorts)

    def sort_ref(self) -> str:
        t = self.expect("ident")
        if t.text not in self.sorts:
            raise ParseError("unknown sort %r" % t.text, t.line, t.col)
        return t.text

    def decl_action(self) -> None:
        self.expect_kw("action")
        name = self.expect("ident").text
        params = self.param_list()
        scope = {v.name: v for v in params}
        cost: Fraction | None = None
        precond: Formula | None = None
        choices: list[NatureChoice] = []
        while True:
            if self.at_kw("cost"):
                self.next()
                cost = self.number()
            elif self.at_kw("precond"):
                self.next()
                precond = self.formula(scope)
            elif self.at_kw("choice"):
                self.next()
                cname = self.expect("ident").text
                cparams = self.choice_params(scope)
                self.expect_kw("prob")
                prob = self.case_expr(scope)
                choices.append(NatureChoice(cname, cparams, prob))
            else:
                break
        if cost is None:
            raise self.fail("action %s needs a cost" % name)
        if not choices:
            raise self.fail("action %s needs at least one choice" % name)
        from foalp.logic import TRUE

        self.actions.append(
            StochasticAction(name, params, tuple(choices), cost, precond or TRUE)
        )

    def param_list(self) -> tuple[Var, ...]:
        self.expect("(")
        out: list[Var] = []
        if self.peek().kind != ")":
            out.append(self.param())
            while self.peek().kind == ",":
                self.next()
                out.append(self.param())
        self.expect(")")
        names = [v.name for v in out]
        if len(set(names)) != len(names):
            raise self.fail("duplicate parameter name")
        return tuple(out)

    def param(self) -> Var:
        t = self.expect("ident")
        self.expect(":")
        return Var(t.text, self.sort_ref())

    def choice_params(self, scope: dict[str, Var]) -> tuple[Var, ...]:
        self.expect("(")
        out: list[Var] = []
        if self.peek().kind != ")":
            while True:
                t = self.expect("ident")
                if t.text not in scope:
                    raise ParseError(
                        "choice parameter %r is not an action parameter" % t.text,
                        t.line,
                        t.col,
                    )
                out.append(scope[t.text])
                if self.peek().kind != ",":
                    break
                self.next()
        self.expect(")")
        return tuple(out)

    def decl_ssa(self) -> None:
        self.expect_kw("ssa")
        t = self.expect("ident")
        fname = t.text
        if fname not in self.fluents:
            raise ParseError("ssa for undeclared fluent %r" % fname, t.line, t.col)
        if fname in self.ssas:
            raise ParseError("fluent %r has two ssas" % fname, t.line, t.col)
        params = self.param_list()
        declared = self.fluents[fname]
        if tuple(v.sort for v in params) != declared:
            raise ParseError(
                "ssa parameters for %s do not match its signature" % fname,
                t.line,
                t.col,
            )
        self.expect(":=")
        scope = {v.name: v for v in params}
        body = self.formula(scope, allow_action=True)
        self.ssas[fname] = Ssa(fname, params, body)

    def decl_criterion(self) -> None:
        self.expect_kw("criterion")
        name = self.expect("ident").text
        amount = self.number()
        f = self.formula({})
        self.criteria.append((name, amount, f))

    def number(self) -> Fraction:
        negated = False
        if self.peek().kind == "-":
            self.next()
            negated = True
        t = self.expect("number")
        val = Fraction(t.text)
        if self.peek().kind == "/":
            self.next()
            den = self.expect("number")
            if "." in t.text or "." in den.text:
                raise ParseError("mixed decimal and fraction", den.line, den.col)
            val = val / Fraction(den.text)
        return -val if negated else val

    # -- formulas

    def case_expr(self, scope: dict[str, Var]) -> CaseStatement:
        self.expect_kw("case")
        self.expect("[")
        parts: list[tuple[Formula, AffineValue]] = []
        while True:
            if self.at_kw("otherwise"):
                self.next()
                f: Formula = neg(disj(*[p for p, _ in parts]))
            else:
                f = self.formula(scope)
            self.expect(",")
            v = AffineValue.of(self.number())
            parts.append((f, v))
            if self.peek().kind == ";":
                self.next()
                continue
            break
        self.expect("]")
        return CaseStatement(tuple(parts))

    def formula(self, scope: dict[str, Var], allow_action: bool = False) -> Formula:
        return self._implied(dict(scope), allow_action)

    def _implied(self, scope, allow_action) -> Formula:
        lhs = self._disj(scope, allow_action)
        if self.peek().kind == "->":
            self.next()
            return implies(lhs, self._implied(scope, allow_action))
        return lhs

    def _disj(self, scope, allow_action) -> Formula:
        items = [self._conj(scope, allow_action)]
        while self.peek().kind == "|":
            self.next()
            items.append(self._conj(scope, allow_action))
        return items[0] if len(items) == 1 else disj(*items)

    def _conj(self, scope, allow_action) -> Formula:
        items = [self._unary(scope, allow_action)]
        while self.peek().kind == "&":
            self.next()
            items.append(self._unary(scope, allow_action))
        return items[0] if len(items) == 1 else conj(*items)

    def _unary(self, scope, allow_action) -> Formula:
        t = self.peek()
        if t.kind == "!":
            self.next()
            return neg(self._unary(scope, allow_action))
        if t.kind == "kw" and t.text in ("forall", "exists"):
            self.next()
            vs: list[Var] = []
            inner = dict(scope)
            while True:
                v = self.param()
                if v.name in inner:
                    raise self.fail("variable %r shadows an outer binding" % v.name)
                inner[v.name] = v
                vs.append(v)
                if self.peek().kind != ",":
                    break
                self.next()
            self.expect(".")
            body = self._implied(inner, allow_action)
            return (exists if t.text == "exists" else forall)(tuple(vs), body)
        return self._atomic(scope, allow_action)

    def _atomic(self, scope, allow_action) -> Formula:
        t = self.peek()
        if t.kind == "kw" and t.text == "true":
            self.next()
            from foalp.logic import TRUE

            return TRUE
        if t.kind == "kw" and t.text == "false":
            self.next()
            from foalp.logic import FALSE

            return FALSE
        if t.kind == "kw" and t.text == "a":
            if not allow_action:
                raise self.fail("action-equality literal outside an ssa body")
            self.next()
            op = self.peek().kind
            if op not in ("=", "!="):
                raise self.fail("expected = or != after the action variable")
            self.next()
            cn = self.expect("ident").text
            args = self.term_args(scope)
            lit: Formula = ActionEq(cn, args)
            return neg(lit) if op == "!=" else lit
        if t.kind == "(":
            self.next()
            inner = self._implied(scope, allow_action)
            self.expect(")")
            return inner
        if t.kind == "ident":
            return self.atom_or_eq(scope)
        raise self.fail("expected a formula, found %r" % (t.text or "end of file"))

    def atom_or_eq(self, scope) -> Formula:
        t = self.expect("ident")
        if self.peek().kind == "(":
            args = self.term_args(scope)
            nxt = self.peek().kind
            if nxt in ("=", "!="):
                lhs = self.build_fn(t, args)
                return self.finish_eq(lhs, scope)
            return self.build_atom(t, args)
        lhs = self.term_ref(t, scope)
        if self.peek().kind not in ("=", "!="):
            raise ParseError(
                "%r is a term; expected = or != after it" % t.text, t.line, t.col
            )
        return self.finish_eq(lhs, scope)

    def finish_eq(self, lhs: Term, scope) -> Formula:
        op = self.next().kind
        rhs = self.term(scope)
        e = Eq(lhs, rhs)
        return neg(e) if op == "!=" else e

    def build_atom(self, t: Token, args: tuple[Term, ...]) -> Formula:
        name = t.text
        if name in self.fluents:
            sig, sit = self.fluents[name], SIT_NOW
        elif name in self.statics:
            sig, sit = self.statics[name], SIT_STATIC
        elif name in (ORDER_ABOVE, ORDER_BELOW):
            sig, sit = (self.chain_sort, self.chain_sort), SIT_STATIC
            if self.chain_sort is None:
                raise ParseError(
                    "%r needs a chain sort" % name, t.line, t.col
                )
        else:
            raise ParseError("unknown predicate %r" % name, t.line, t.col)
        if len(args) != len(sig):
            raise ParseError(
                "%s expects %d arguments, got %d" % (name, len(sig), len(args)),
                t.line,
                t.col,
            )
        return Atom(name, args, sit)

    def build_fn(self, t: Token, args: tuple[Term, ...]) -> Term:
        if t.text not in (SUCC_FN, PRED_FN):
            raise ParseError("unknown function %r" % t.text, t.line, t.col)
        if len(args) != 1:
            raise ParseError("%s takes one argument" % t.text, t.line, t.col)
        return Fn(t.text, args, self.chain_sort)

    def term_args(self, scope) -> tuple[Term, ...]:
        self.expect("(")
        out: list[Term] = []
        if self.peek().kind != ")":
            out.append(self.term(scope))
            while self.peek().kind == ",":
                self.next()
                out.append(self.term(scope))
        self.expect(")")
        return tuple(out)

    def term(self, scope) -> Term:
        t = self.expect("ident")
        if self.peek().kind == "(":
            return self.build_fn(t, self.term_args(scope))
        return self.term_ref(t, scope)

    def term_ref(self, t: Token, scope) -> Term:
        if t.text in scope:
            return scope[t.text]
        if t.text in self.consts:
            return self.consts[t.text]
        raise ParseError(
            "%r is neither a bound variable nor a declared constant" % t.text,
            t.line,
            t.col,
        )

    # -- assembly

    def build(self) -> FomdpModel:
        if self.discount is None:
            raise ParseError("missing discount declaration", 1, 1)
        for fname in self.fluents:
            if fname not in self.ssas:
                raise ParseError("fluent %s has no ssa" % fname, 1, 1)
        clauses: list = []
        if self.chain_sort is not None:
            clauses.extend(order_axioms(self.chain_sort).clauses)
        for f in self.axiom_formulas:
            clauses.extend(to_cnf(f))
        return FomdpModel(
            name=self.name,
            sorts=tuple(self.sorts),
            chain_sort=self.chain_sort,
            constants=tuple(self.consts[k] for k in sorted(self.consts)),
            fluents=dict(self.fluents),
            statics=dict(self.statics),
            actions=tuple(self.actions),
            ssas=dict(self.ssas),
            criteria=tuple(self.criteria),
            axioms=AxiomSet(tuple(clauses)),
            discount=self.discount,
        )


def parse_domain(src: str) -> FomdpModel:
    return _Parser(src).parse()


def load_domain(path: str) -> FomdpModel:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_domain(fh.read())
