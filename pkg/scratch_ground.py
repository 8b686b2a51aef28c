import importlib.resources as ir
from fractions import Fraction

from foalp.domainfile import parse_domain
from foalp.groundmdp import brute_force_max, ground, ground_alp, greedy_policy, value_iteration
from foalp.semantics import GroundState, Universe
from foalp.cases import case
from foalp.logic import TRUE, Atom, Var, exists, neg, SIT_NOW

model = parse_domain((ir.files("foalp") / "domains" / "elevators.fod").read_text())

print("== 2 floors / 1 elev / 0 people ==")
uni0 = Universe({"elev": ("E1",), "floor": ("F1", "F2"), "person": (), "group": ()})
start = GroundState(frozenset({("EAt", ("E1", "F1"))}))
g0 = ground(model, uni0, [start])
print("states:", len(g0.states))
for s in g0.states:
    print("  ", sorted(s.atoms), "applicable:", [g0.actions[a][0] for a in g0.applicable[g0.index_of(s)]])
v0 = value_iteration(g0, 1e-10)
print("V*:", [round(x, 6) for x in v0])

res0, lp0 = ground_alp(g0, [[Fraction(1)] * len(g0.states)])
print("constant-basis ALP:", res0.status, res0.weights, "expect max R/(1-g) = 0")

print("\n== open success branch at F1 with waiting person ==")
uni1 = Universe({"elev": ("E1",), "floor": ("F1", "F2"), "person": ("P1",), "group": ()})
st = GroundState(frozenset({("EAt", ("E1", "F1")), ("PAt", ("P1", "F1")), ("Dst", ("P1", "F2"))}))
from foalp.fomdp import choice_distribution
for ct, p in choice_distribution(model, uni1, st, "open", ("E1",)):
    print("  ", ct, p)

print("\n== 2-floor 1-person ground MDP ==")
g1 = ground(model, uni1, [st])
print("states:", len(g1.states))
v1 = value_iteration(g1, 1e-10)
print("V*(start):", round(v1[g1.index_of(st)], 6))
pol = greedy_policy(g1, v1)
print("greedy at start:", g1.actions[pol[g1.index_of(st)]])

print("\n== per-state indicator basis recovers V* ==")
basis = [[Fraction(1) if i == s else Fraction(0) for s in range(len(g1.states))] for i in range(len(g1.states))]
res1, lp1 = ground_alp(g1, basis)
print("status:", res1.status)
err = max(abs(res1.weights[i] - v1[i]) for i in range(len(g1.states)))
print("max |w_s - V*(s)|:", err)

print("\n== brute_force_max sanity ==")
p, f = Var("p", "person"), Var("f", "floor")
inside = exists([p, f], Atom("PAt", (p, f), SIT_NOW))
c1 = case((inside, 3), (neg(inside), 0))
c2 = case((TRUE, 2))
out = brute_force_max([c1, c2], uni1)
print("max:", out)
both = case((inside, 1), (neg(inside), 0))
contra = case((neg(inside), 5), (inside, 0))
out2 = brute_force_max([both, contra], uni1)
print("contradictory best combo skipped:", out2)
