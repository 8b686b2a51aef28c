import sys
import time
import importlib.resources as ir
from fractions import Fraction

from foalp.backup import make_basis
from foalp.cases import case, AffineValue
from foalp.domainfile import parse_domain
from foalp.logic import TRUE, neg, clear_caches
from foalp.solver import solve_foalp, error_bound

n = int(sys.argv[1]) if len(sys.argv) > 1 else 1
BUDGET = int(sys.argv[2]) if len(sys.argv) > 2 else 20000

src = (ir.files("foalp") / "domains" / "elevators.fod").read_text()
model = parse_domain(src)

named = [("const", case((TRUE, 1)))]
for name, amount, f in model.criteria[:n]:
    named.append((name, case((f, 1), (neg(f), 0))))
basis = make_basis(model, named)
print("basis size:", len(basis))

t0 = time.time()
sol = solve_foalp(model, basis, budget=BUDGET)
t1 = time.time()
print("solve time: %.1fs" % (t1 - t0))
print("weights:", [str(w) for w in sol.weights])
print("objective:", sol.objective)
print("iterations:", sol.stats.iterations)
print("constraints:", sol.stats.constraints)
print("fomax calls:", sol.stats.fomax_calls)
print("decisive:", sol.stats.decisive)

t2 = time.time()
eb = error_bound(model, basis, sol.weights, budget=BUDGET)
t3 = time.time()
print("error bound: %s (%.4f)  [%.1fs]" % (eb, float(eb), t3 - t2))
