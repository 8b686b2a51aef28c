from fractions import Fraction

from foalp.cases import AffineValue, case
from foalp.logic import Atom, Const, SIT_NOW, SIT_STATIC, TRUE, Var, neg
from foalp.solver import (
    build_objective,
    default_ordering,
    focg,
    fomax,
    ConstraintFamily,
)
from foalp.backup import BasisFunction

P = Atom("P", (Const("A"),), SIT_NOW)
Q = Atom("Q", (Const("A"),), SIT_NOW)

w = (Fraction(0),)

print("== single case ==")
c1 = case((P, 3), (neg(P), 0))
r = fomax([c1], default_ordering([c1]), w)
print("value:", r.value, "decisive:", r.decisive)

print("== shared relation ==")
c2 = case((P, 0), (neg(P), 2))
r = fomax([c1, c2], default_ordering([c1, c2]), w)
print("value:", r.value, "(expect 3: P-branch 3+0 beats notP 0+2)")

print("== complementary peaks ==")
c3 = case((neg(P), 5), (P, 0))
r = fomax([c1, c3], default_ordering([c1, c3]), w)
print("value:", r.value, "(expect 5)")

print("== independent relations ==")
c4 = case((Q, 7), (neg(Q), 1))
r = fomax([c1, c4], default_ordering([c1, c4]), w)
print("value:", r.value, "(expect 10)")

print("== symbolic affine kept ==")
c5 = case((P, AffineValue.weight(0, 2)), (neg(P), 0))
r = fomax([c1, c5], default_ordering([c1, c5]), (Fraction(1),))
print("value:", r.value, "affine:", r.affine, "(expect 5, 3 + 2*w0)")

print("== build_objective ==")
phi = P
b0 = BasisFunction(0, "const", case((TRUE, 1)), frozenset())
b1 = BasisFunction(1, "ind", case((phi, 1), (neg(phi), 0)), frozenset())
b2 = BasisFunction(2, "three", case((phi, 2), (neg(phi), 1), (TRUE, 0)), frozenset())
print(build_objective([b0, b1, b2]), "(expect w0 + 1/2*w1 + w2)")

print("== focg on a tiny family ==")
# One "action": constraint 0 >= max_s of [case with value 4 - w0 on P, -w0 on notP]
# i.e. V(s) = w0 everywhere must dominate reward 4: optimal w0 = 4.
fam = ConstraintFamily(
    "only",
    (case((P, AffineValue.of(4) + AffineValue.weight(0, -1)),
          (neg(P), AffineValue.weight(0, -1))),),
)
obj = AffineValue.weight(0, 1)
weights, stats, rows = focg(obj, [fam], num_weights=1, tol=Fraction(1, 10**6))
print("weights:", weights, "rows:", len(rows), "iters:", stats.iterations)
