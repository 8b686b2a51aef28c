import time
import importlib.resources as ir
from fractions import Fraction

from foalp.backup import make_basis
from foalp.cases import case
from foalp.domainfile import parse_domain
from foalp.logic import TRUE, neg, background, equality_axioms, unique_names_units, pred_id, eliminate_encoded, EQ, SYMBOLS
from foalp import solver
from foalp.solver import build_families, default_ordering, _net_of, _cross_nets, _dominance

src = (ir.files("foalp") / "domains" / "elevators.fod").read_text()
model = parse_domain(src)

named = [("const", case((TRUE, 1)))]
for name, amount, f in model.criteria[:1]:
    named.append((name, case((f, 1), (neg(f), 0))))
basis = make_basis(model, named)
w = (Fraction(199), Fraction(1))

t0 = time.time()
fams = build_families(model, basis, w)
print("build_families: %.1fs" % (time.time() - t0))

for fam in fams:
    print("== family %s: %d cases, partitions %s" % (
        fam.action, len(fam.cases), [len(c.partitions) for c in fam.cases]))

fam = next(f for f in fams if f.action == "open")
ordering = default_ordering(fam.cases)
print("ordering:", ordering)

# replay fomax by hand with timing
built = [_net_of(c) for c in fam.cases]
nets = [n for n, _p in built]
pool = [cl for _n, p in built for cl in p]
bgc = list(model.axioms.clauses)
if any(lit.pred == EQ for cl in (*pool, *bgc) for lit in cl.literals):
    bgc.extend(equality_axioms())
bgc.extend(unique_names_units((*pool, *bgc)))
bg = background(bgc)
print("bg size:", len(bg.enc))

names = {}
for cl in (*pool, *bgc):
    for lit in cl.literals:
        names.setdefault(lit.pred, set()).add(pred_id(lit.pred, len(lit.args)))

rounds = [r for r in ordering if r != EQ] + [EQ]
total_inf = 0
for relation in rounds:
    for pid in sorted(names.get(relation, ())):
        group = [net for net in nets if any(pid in p.pids for p in net)]
        if not group:
            continue
        rest = [net for net in nets if not any(pid in p.pids for p in net)]
        t0 = time.time()
        tmp = group[0]
        for other in group[1:]:
            tmp = _cross_nets(tmp, other)
        t_cross = time.time() - t0
        t0 = time.time()
        reduced = []
        infs = 0
        nsat = 0
        skipped = 0
        worst = (0, None)
        for p in tmp:
            if pid not in p.pids:
                skipped += 1
            survivors, exhausted, i = eliminate_encoded(p.enc, pid, bg)
            if i > worst[0]:
                worst = (i, p, survivors)
            infs += i
            nsat += 1
            if survivors is None:
                continue
            from foalp.solver import _make_part
            reduced.append(_make_part(survivors, p.value))
        if worst[1] is not None and infs > 100000:
            from foalp.logic import decode_clause
            wp = worst[1]
            print("  worst part: %d inferences, %d clauses in, %s out" % (
                worst[0], len(wp.enc), "REFUTED" if worst[2] is None else len(worst[2])))
            for ec in sorted(wp.enc, key=repr)[:40]:
                print("    ", decode_clause(ec))
        t_elim = time.time() - t0
        total_inf += infs
        kept = _dominance(reduced, w) if reduced else []
        print("round %-12s nets-in-group %d  crossed %4d parts (skip-able %d)  "
              "survive %4d  dom-kept %3d  cross %.2fs elim %.2fs  inf %d" % (
                  relation, len(group), len(tmp), skipped, len(reduced), len(kept),
                  t_cross, t_elim, infs))
        nets = rest + [kept]
print("total inferences:", total_inf)
