"""Case statements: piecewise-constant functions over first-order state
partitions, with affine values over the LP weight vector.

A case statement is an ordered list of (formula, value) partitions.  The
binary operators pair partitions by cross product, combine the values, and
eagerly discard pairs whose conjoined formula is provably unsatisfiable;
Unknown verdicts keep the partition, which is always safe for the solver
(it can only add vacuous constraints, never lose reachable ones).

Values are kept as exact rationals so every algebraic pipeline is
bit-reproducible; floating point appears only inside the LP solver.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from foalp.logic import (
    DEFAULT_BUDGET,
    TRUE,
    AxiomSet,
    Bottom,
    ConsistencyVerdict,
    Formula,
    Var,
    conj,
    disj,
    exists,
    is_inconsistent,
    neg,
    simplify,
)
from foalp.semantics import GroundState, Universe, eval_formula


class CaseError(Exception):
    pass


class NoCoveringPartition(CaseError):
    """A ground state fell through every partition of a case that the
    caller treated as exhaustive."""


Rational = Fraction | int


def _frac(x: Rational | str) -> Fraction:
    if isinstance(x, float):
        raise CaseError(
            "refusing float %r; pass a Fraction, int, or decimal string" % (x,)
        )
    return Fraction(x)


@dataclass(frozen=True)
class AffineValue:
    """constant + sum of coeff * w_i, all rational.  Zero coefficients are
    never stored, so structural equality is value equality."""

    constant: Fraction = Fraction(0)
    coeffs: tuple[tuple[int, Fraction], ...] = ()

    @staticmethod
    def of(x: Rational | str) -> "AffineValue":
        return AffineValue(_frac(x))

    @staticmethod
    def weight(index: int, scale: Rational | str = 1) -> "AffineValue":
        s = _frac(scale)
        if s == 0:
            return AffineValue()
        return AffineValue(Fraction(0), ((index, s),))

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    def __add__(self, other: "AffineValue") -> "AffineValue":
        acc = dict(self.coeffs)
        for i, c in other.coeffs:
            acc[i] = acc.get(i, Fraction(0)) + c
        return AffineValue(
            self.constant + other.constant,
            tuple(sorted((i, c) for i, c in acc.items() if c != 0)),
        )

    def __sub__(self, other: "AffineValue") -> "AffineValue":
        return self + other.scaled(Fraction(-1))

    def __neg__(self) -> "AffineValue":
        return self.scaled(Fraction(-1))

    def scaled(self, k: Rational | str) -> "AffineValue":
        k = _frac(k)
        if k == 0:
            return AffineValue()
        return AffineValue(
            self.constant * k, tuple((i, c * k) for i, c in self.coeffs)
        )

    def evaluate(self, weights: Sequence[Rational] | None = None) -> Fraction:
        if not self.coeffs:
            return self.constant
        if weights is None:
            raise CaseError("symbolic value %s needs a weight vector" % (self,))
        total = self.constant
        for i, c in self.coeffs:
            total += c * _frac(weights[i])
        return total

    def sort_key(self) -> tuple:
        return (self.constant, self.coeffs)

    def __str__(self) -> str:
        parts = [] if self.constant == 0 else [str(self.constant)]
        for i, c in self.coeffs:
            if c == 1:
                parts.append("w%d" % i)
            elif c == -1:
                parts.append("-w%d" % i)
            else:
                parts.append("%s*w%d" % (c, i))
        if not parts:
            return "0"
        out = parts[0]
        for p in parts[1:]:
            out += " - " + p[1:] if p.startswith("-") else " + " + p
        return out


ZERO = AffineValue()
ONE = AffineValue(Fraction(1))


def affine_mul(a: AffineValue, b: AffineValue) -> AffineValue:
    """Product of two affine values; at least one must be constant, else
    the result would be quadratic in the weights."""

    if a.is_constant:
        return b.scaled(a.constant)
    if b.is_constant:
        return a.scaled(b.constant)
    raise CaseError("product of two weight-bearing values is not affine")


@dataclass(frozen=True)
class CaseStatement:
    """Ordered (formula, value) partitions.  Order is meaningful: ground
    evaluation takes the first partition that holds, and sorted cases rely
    on descending value order."""

    partitions: tuple[tuple[Formula, AffineValue], ...]

    def __post_init__(self) -> None:
        for f, v in self.partitions:
            if not isinstance(v, AffineValue):
                raise CaseError("partition value %r is not an AffineValue" % (v,))

    def __len__(self) -> int:
        return len(self.partitions)

    def formulas(self) -> tuple[Formula, ...]:
        return tuple(f for f, _ in self.partitions)

    def values(self) -> tuple[AffineValue, ...]:
        return tuple(v for _, v in self.partitions)

    def is_weight_bearing(self) -> bool:
        return any(not v.is_constant for _, v in self.partitions)

    def __str__(self) -> str:
        inner = "; ".join("%r, %s" % (f, v) for f, v in self.partitions)
        return "case[%s]" % inner


def case(*parts: tuple[Formula, AffineValue | Rational | str]) -> CaseStatement:
    """Convenience constructor accepting raw rationals for values."""

    out = []
    for f, v in parts:
        out.append((f, v if isinstance(v, AffineValue) else AffineValue.of(v)))
    return CaseStatement(tuple(out))


UNIT_ZERO = case((TRUE, 0))


def prune_inconsistent(
    c: CaseStatement,
    axioms: AxiomSet | None = None,
    budget: int = DEFAULT_BUDGET,
) -> CaseStatement:
    """Drop partitions whose formula is provably unsatisfiable under the
    axioms.  Unknown verdicts keep the partition."""

    kept = []
    for f, v in c.partitions:
        g = simplify(f)
        if isinstance(g, Bottom):
            continue
        if is_inconsistent(g, axioms, budget) is ConsistencyVerdict.INCONSISTENT:
            continue
        kept.append((f, v))
    if len(kept) == len(c.partitions):
        return c
    return CaseStatement(tuple(kept))


def _cross(
    a: CaseStatement,
    b: CaseStatement,
    op,
    axioms: AxiomSet | None,
    prune: bool,
    budget: int,
) -> CaseStatement:
    parts = []
    for pa, va in a.partitions:
        for pb, vb in b.partitions:
            f = conj(pa, pb)
            if isinstance(simplify(f), Bottom):
                continue
            parts.append((f, op(va, vb)))
    out = CaseStatement(tuple(parts))
    if prune:
        out = prune_inconsistent(out, axioms, budget)
    return out


def cross_sum(
    a: CaseStatement,
    b: CaseStatement,
    axioms: AxiomSet | None = None,
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> CaseStatement:
    return _cross(a, b, lambda x, y: x + y, axioms, prune, budget)


def cross_minus(
    a: CaseStatement,
    b: CaseStatement,
    axioms: AxiomSet | None = None,
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> CaseStatement:
    return _cross(a, b, lambda x, y: x - y, axioms, prune, budget)


def cross_product(
    a: CaseStatement,
    b: CaseStatement,
    axioms: AxiomSet | None = None,
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> CaseStatement:
    if a.is_weight_bearing() and b.is_weight_bearing():
        raise CaseError("cross product of two weight-bearing cases")
    return _cross(a, b, affine_mul, axioms, prune, budget)


def scale_values(c: CaseStatement, factor: AffineValue) -> CaseStatement:
    """Multiply every partition value by a fixed factor (formulas are
    untouched, so no pruning is needed)."""

    return CaseStatement(tuple((f, affine_mul(v, factor)) for f, v in c.partitions))


def exists_max(
    c: CaseStatement,
    vars: Iterable[Var],
    weights: Sequence[Rational] | None = None,
) -> CaseStatement:
    """Existentially quantify vars out of a case while preserving max
    semantics: highest-valued partitions claim states first, and each
    partition's formula excludes every higher-valued alternative.

    Partitions carrying the same affine value are merged by disjunction
    before sorting; symbolic values require a weight vector to sort by.
    """

    vs = tuple(vars)
    groups: dict[AffineValue, list[Formula]] = {}
    order: list[AffineValue] = []
    for f, v in c.partitions:
        if v not in groups:
            groups[v] = []
            order.append(v)
        groups[v].append(f)
    merged = []
    for v in order:
        fs = groups[v]
        body = fs[0] if len(fs) == 1 else disj(*fs)
        merged.append((body, v))
    if weights is None and any(not v.is_constant for _, v in merged):
        raise CaseError("sorting a weight-bearing case needs a weight vector")
    merged.sort(key=lambda fv: (-fv[1].evaluate(weights), fv[1].sort_key()))

    out = []
    guards: list[Formula] = []
    for f, v in merged:
        quantified = exists(vs, f)
        out.append((conj(*guards, quantified), v))
        guards.append(neg(quantified))
    return CaseStatement(tuple(out))


def evaluate(
    c: CaseStatement,
    uni: Universe,
    state: GroundState,
    weights: Sequence[Rational] | None = None,
) -> Fraction:
    """Value of the first partition whose formula holds in the state."""

    for f, v in c.partitions:
        if eval_formula(f, uni, state):
            return v.evaluate(weights)
    raise NoCoveringPartition("no partition of %s covers the state" % (c,))


def flatten(
    cs: Sequence[CaseStatement],
    axioms: AxiomSet | None = None,
    prune: bool = True,
    budget: int = DEFAULT_BUDGET,
) -> CaseStatement:
    """Sum a list of cases into one; the empty sum is the zero case."""

    if not cs:
        return UNIT_ZERO
    acc = cs[0]
    for nxt in cs[1:]:
        acc = cross_sum(acc, nxt, axioms, prune, budget)
    return acc
