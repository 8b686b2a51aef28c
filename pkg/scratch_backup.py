import importlib.resources as ir
from fractions import Fraction

from foalp.backup import (
    affecting_actions,
    backup_action,
    backup_param,
    fodtr,
    make_basis,
    reward_case,
)
from foalp.cases import CaseStatement, case, evaluate, flatten, scale_values, AffineValue
from foalp.domainfile import parse_domain
from foalp.fomdp import choice_distribution, ground_step, _enumerate_states
from foalp.logic import TRUE, neg, normalize
from foalp.semantics import Universe

src = (ir.files("foalp") / "domains" / "elevators.fod").read_text()
model = parse_domain(src)

crit_cases = []
for name, amount, f in model.criteria:
    crit_cases.append((name, case((f, 1), (neg(f), 0))))
basis = make_basis(model, [("const", case((TRUE, 1)))] + crit_cases)

print("== affected-by ==")
for b in basis:
    print(" %-22s %s" % (b.name, sorted(b.affected_by)))

noop = model.action("noop")
up = model.action("up")
openA = model.action("open")

print("\n== fodtr(case[T,1], noop) ==")
print(fodtr(model, case((TRUE, 1)), noop))

print("\n== fodtr(crit1 bcase, noop) vs gamma*bcase ==")
b1 = basis[1].bcase
lhs = fodtr(model, b1, noop)
rhs = scale_values(b1, AffineValue.of(model.discount))
ln = tuple((normalize(f), v) for f, v in lhs.partitions)
rn = tuple((normalize(f), v) for f, v in rhs.partitions)
print("equal:", ln == rn)
if ln != rn:
    print("lhs:", lhs)
    print("rhs:", rhs)

print("\n== backup_param(noop) shapes ==")
bp = backup_param(model, basis, noop)
for c in bp:
    print("  %d partitions, first value %s" % (len(c.partitions), c.partitions[0][1]))

print("\n== backup_action(noop) at w=1 ==")
ba = backup_action(model, basis, noop, [Fraction(1)] * len(basis))
for c in ba:
    print("  %d partitions" % len(c.partitions))

print("\n== ground Q oracle: fodtr through open on 2-floor universe ==")
from foalp.logic import Const, substitute

uni = Universe({"elev": ("E1",), "floor": ("F1", "F2"), "person": ("P1",), "group": ("G1",)})
statics = frozenset({("Dst", ("P1", "F2"))})
states = list(_enumerate_states(model, uni, statics=statics))
gamma = model.discount
import itertools

checked = 0
bad = 0
for b in basis[:3]:
    fc = fodtr(model, b.bcase, openA)
    for st in states:
        for args in itertools.product(uni.objects("elev")):
            exp = Fraction(0)
            dist = choice_distribution(model, uni, st, "open", args)
            for ct, p in dist:
                nxt = ground_step(model, uni, st, ct)
                exp += p * evaluate(b.bcase, uni, nxt)
            exp *= gamma
            sub = {v: Const(a) for v, a in zip(openA.params, args)}
            bound = CaseStatement(
                tuple((substitute(f, sub), v) for f, v in fc.partitions)
            )
            got = evaluate(bound, uni, st)
            checked += 1
            if got != exp:
                bad += 1
                if bad <= 3:
                    print("  MISMATCH", b.name, sorted(st.atoms), args, got, exp)
print("checked %d, mismatches %d" % (checked, bad))
