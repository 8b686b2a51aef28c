"""Resolution kernel over integer-encoded clauses.

This module is the hot inner loop of consistency checking and cost-network
maximization, so it works on a deliberately flat representation:

    term    := negative int (variable) | tuple(symbol_id, *terms)
    literal := (sign, pred_id, args)    sign in {0, 1}, args a tuple of terms
    clause  := tuple of literals, canonically renamed and sorted

The same source is compiled by Cython as foalp._ckernel (see _ckernel.pyx);
keep it free of features the compiler rejects and of imports beyond the
stdlib.  All functions are pure and deterministic.
"""

from collections import deque

DEPTH_CAP = 12

# Predicate id of equality, set by the owning module once the symbol table
# exists.  Equality gets special treatment in canon: a positive t = t makes
# the whole clause true, a negative one is a dead literal, and ground
# argument pairs are oriented canonically so the two spellings of one
# equation cannot double a clause set.
EQ_PID = -1


def set_eq_pid(pid):
    global EQ_PID
    EQ_PID = pid


# ---------------------------------------------------------------------------
# Substitutions (triangular: var -> term, resolved by walking)


def walk(t, subst):
    while isinstance(t, int) and t < 0:
        nxt = subst.get(t)
        if nxt is None:
            return t
        t = nxt
    return t


def occurs(v, t, subst):
    t = walk(t, subst)
    if isinstance(t, int):
        return t == v
    for i in range(1, len(t)):
        if occurs(v, t[i], subst):
            return True
    return False


def unify_terms(a, b, subst):
    """Extend subst to unify two terms; returns False (subst then invalid)
    on clash or occurs-check failure."""

    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = walk(x, subst)
        y = walk(y, subst)
        if x == y:
            continue
        if isinstance(x, int):
            if occurs(x, y, subst):
                return False
            subst[x] = y
            continue
        if isinstance(y, int):
            if occurs(y, x, subst):
                return False
            subst[y] = x
            continue
        if x[0] != y[0] or len(x) != len(y):
            return False
        for i in range(1, len(x)):
            stack.append((x[i], y[i]))
    return True


def unify_args(args1, args2, subst):
    n = len(args1)
    if n != len(args2):
        return False
    for i in range(n):
        if not unify_terms(args1[i], args2[i], subst):
            return False
    return True


def resolve_term(t, subst):
    """Apply a substitution fully to a term."""

    t = walk(t, subst)
    if isinstance(t, int):
        return t
    if len(t) == 1:
        return t
    out = [t[0]]
    for i in range(1, len(t)):
        out.append(resolve_term(t[i], subst))
    return tuple(out)


def apply_clause(lits, subst):
    out = []
    for sign, pid, args in lits:
        new_args = tuple(resolve_term(a, subst) for a in args)
        out.append((sign, pid, new_args))
    return out


def term_depth(t):
    if isinstance(t, int):
        return 0
    best = 0
    for i in range(1, len(t)):
        d = term_depth(t[i])
        if d > best:
            best = d
    return 1 + best


def clause_depth(c):
    best = 0
    for _sign, _pid, args in c:
        for a in args:
            d = term_depth(a)
            if d > best:
                best = d
    return best


# ---------------------------------------------------------------------------
# Canonical form


def term_key(t):
    if isinstance(t, int):
        return (0, -t)
    out = [1, t[0], len(t)]
    for i in range(1, len(t)):
        out.append(term_key(t[i]))
    return tuple(out)


def term_skel(t):
    if isinstance(t, int):
        return (0, 0)
    out = [1, t[0], len(t)]
    for i in range(1, len(t)):
        out.append(term_skel(t[i]))
    return tuple(out)


def lit_key(lit):
    return (lit[1], 1 - lit[0], tuple(term_key(a) for a in lit[2]))


def lit_skel(lit):
    return (lit[1], 1 - lit[0], tuple(term_skel(a) for a in lit[2]))


def clause_key(c):
    return tuple(lit_key(l) for l in c)


def _rename_term(t, mapping):
    if isinstance(t, int):
        v = mapping.get(t)
        if v is None:
            v = -(len(mapping) + 1)
            mapping[t] = v
        return v
    if len(t) == 1:
        return t
    out = [t[0]]
    for i in range(1, len(t)):
        out.append(_rename_term(t[i], mapping))
    return tuple(out)


def is_ground(t):
    if isinstance(t, int):
        return False
    for i in range(1, len(t)):
        if not is_ground(t[i]):
            return False
    return True


def _orient_eq(args):
    a, b = args
    ka = (term_skel(a), term_key(a) if is_ground(a) else ())
    kb = (term_skel(b), term_key(b) if is_ground(b) else ())
    if kb < ka:
        return (b, a)
    return args


def canon(lits):
    """Canonicalize a clause: dedupe literals, rename variables by first
    occurrence in a structure-sorted order, sort; None for tautologies
    (including any clause made true by a reflexive equation)."""

    if EQ_PID >= 0:
        filtered = []
        for l in lits:
            if l[1] == EQ_PID and len(l[2]) == 2:
                if l[2][0] == l[2][1]:
                    if l[0] == 1:
                        return None
                    continue
                l = (l[0], l[1], _orient_eq(l[2]))
            filtered.append(l)
        lits = filtered
    uniq = sorted(set(lits), key=lambda l: (lit_skel(l), lit_key(l)))
    mapping = {}
    renamed = []
    for sign, pid, args in uniq:
        renamed.append((sign, pid, tuple(_rename_term(a, mapping) for a in args)))
    out = tuple(sorted(set(renamed), key=lit_key))
    seen = set(out)
    for sign, pid, args in out:
        if (1 - sign, pid, args) in seen:
            return None
    return out


def mentions(c, pid):
    for lit in c:
        if lit[1] == pid:
            return True
    return False


def shift_vars(c, offset):
    if offset == 0:
        return c
    mapping = {}

    def sh(t):
        if isinstance(t, int):
            return t + offset
        if len(t) == 1:
            return t
        out = [t[0]]
        for i in range(1, len(t)):
            out.append(sh(t[i]))
        return tuple(out)

    return tuple((sign, pid, tuple(sh(a) for a in args)) for sign, pid, args in c)


def min_var(c):
    lo = 0
    for _sign, _pid, args in c:
        stack = list(args)
        while stack:
            t = stack.pop()
            if isinstance(t, int):
                if t < lo:
                    lo = t
            else:
                for i in range(1, len(t)):
                    stack.append(t[i])
    return lo


# ---------------------------------------------------------------------------
# Saturation on one relation


def _resolvents(c1, c2, pid):
    """All binary resolvents of c1 against c2 on pid literals (c1 positive,
    c2 negative), with c2 renamed apart.  Returns (resolvents, attempts)."""

    out = []
    attempts = 0
    found = False
    for l1 in c1:
        if l1[0] == 1 and l1[1] == pid:
            found = True
            break
    if not found:
        return out, 0
    found = False
    for l2 in c2:
        if l2[0] == 0 and l2[1] == pid:
            found = True
            break
    if not found:
        return out, 0
    c2s = shift_vars(c2, min_var(c1))
    for i in range(len(c1)):
        l1 = c1[i]
        if l1[0] != 1 or l1[1] != pid:
            continue
        for j in range(len(c2s)):
            l2 = c2s[j]
            if l2[0] != 0 or l2[1] != pid:
                continue
            attempts += 1
            subst = {}
            if not unify_args(l1[2], l2[2], subst):
                continue
            rest = [c1[k] for k in range(len(c1)) if k != i]
            rest.extend(c2s[k] for k in range(len(c2s)) if k != j)
            out.append(apply_clause(rest, subst))
    return out, attempts


def _factors(c, pid):
    out = []
    attempts = 0
    n = len(c)
    for i in range(n):
        if c[i][1] != pid:
            continue
        for j in range(i + 1, n):
            if c[j][1] != pid or c[j][0] != c[i][0]:
                continue
            attempts += 1
            subst = {}
            if not unify_args(c[i][2], c[j][2], subst):
                continue
            out.append(apply_clause(c, subst))
    return out, attempts


def unit_conflicts(clauses):
    """True when two unit clauses with complementary literals unify; such a
    pair resolves to the empty clause regardless of the elimination order."""

    units = [c for c in clauses if len(c) == 1]
    n = len(units)
    for i in range(n):
        si, pi, ai = units[i][0]
        for j in range(i + 1, n):
            if units[j][0][1] != pi or units[j][0][0] == si:
                continue
            other = shift_vars(units[j], min_var(units[i]))
            subst = {}
            if unify_args(ai, other[0][2], subst):
                return True
    return False


def _match_term(pat, inst, subst):
    """One-way matching: only pat-side variables bind (they are assumed
    renamed apart from inst's)."""

    if isinstance(pat, int):
        b = subst.get(pat)
        if b is None:
            subst[pat] = inst
            return True
        return b == inst
    if isinstance(inst, int):
        return False
    if pat[0] != inst[0] or len(pat) != len(inst):
        return False
    for i in range(1, len(pat)):
        if not _match_term(pat[i], inst[i], subst):
            return False
    return True


def _unit_subsumes(unit, c):
    """True when the unit clause's single literal matches onto a literal of
    c, making c redundant."""

    u = shift_vars(unit, min_var(c))
    sign, pid, args = u[0]
    for lit in c:
        if lit[0] != sign or lit[1] != pid:
            continue
        subst = {}
        ok = True
        for i in range(len(args)):
            if not _match_term(args[i], lit[2][i], subst):
                ok = False
                break
        if ok:
            return True
    return False


def saturate_on(clauses, pid, budget, depth_cap=DEPTH_CAP, frozen=0, include_pid=False):
    """Resolve the clause set to closure on one relation, then drop every
    clause that still mentions it (kept with include_pid, for computing a
    reusable closure).

    The first `frozen` clauses are a background already closed under
    resolution on the relation among themselves: pairs inside that prefix
    are never re-resolved, so the budget buys only inferences the non-frozen
    clauses participate in.

    Unit clauses do double duty as they arrive: one that unifies against a
    complementary unit refutes the whole set on the spot (the pair resolves
    to the empty clause no matter which relation is being eliminated), and
    otherwise it deletes every clause carrying one of its instances, which
    only thins the closure by clauses the unit already implies.

    Returns (kept, derived_empty, budget_exhausted, inferences) where kept
    is the sorted tuple of surviving canonical clauses.  Inferences count
    unification attempts (resolution and factoring); generation stops once
    the budget is consumed, which can only make the result weaker (clauses
    that full saturation would have refuted survive).
    """

    alive = set()
    units = {}  # (sign, relation id) -> unit clauses, newest last
    agenda = deque()
    seen = set()
    dead = set()
    bgset = set()
    inferences = 0
    exhausted = False

    def register_unit(u):
        key = (u[0][0], u[0][1])
        bucket = units.get(key)
        if bucket is None:
            units[key] = [u]
        else:
            bucket.append(u)

    def admit(cc):
        """Store a clause unless an alive unit subsumes it; True means a
        refutation (the clause completes a complementary unit pair)."""

        if len(cc) == 1:
            s, p, args = cc[0]
            for u in units.get((1 - s, p), ()):
                if u in dead:
                    continue
                us = shift_vars(u, min_var(cc))
                subst = {}
                if unify_args(args, us[0][2], subst):
                    return True
        lo = 0
        for lit in cc:
            bucket = units.get((lit[0], lit[1]))
            if not bucket:
                continue
            if lo == 0:
                lo = min_var(cc) or -1
            args = lit[2]
            for u in bucket:
                if u is cc or u in dead:
                    continue
                us = shift_vars(u, lo)
                ua = us[0][2]
                subst = {}
                ok = True
                for i in range(len(args)):
                    if not _match_term(ua[i], args[i], subst):
                        ok = False
                        break
                if ok:
                    return False
        if len(cc) == 1:
            gone = [d for d in alive if d is not cc and _unit_subsumes(cc, d)]
            for d in gone:
                alive.discard(d)
                dead.add(d)
            register_unit(cc)
        alive.add(cc)
        if mentions(cc, pid):
            agenda.append(cc)
        return False

    loaded = 0
    for c in clauses:
        is_bg = loaded < frozen
        loaded += 1
        if c in seen:
            continue
        seen.add(c)
        if len(c) == 0:
            return ((), True, False, inferences)
        if is_bg:
            bgset.add(c)
            alive.add(c)
            if len(c) == 1:
                register_unit(c)
            if mentions(c, pid):
                agenda.append(c)
        elif admit(c):
            return ((), True, False, inferences)

    active_pos = []
    active_neg = []
    while agenda:
        if inferences >= budget:
            exhausted = True
            break
        given = agenda.popleft()
        if given in dead:
            continue
        has_pos = False
        has_neg = False
        for l in given:
            if l[1] == pid:
                if l[0] == 1:
                    has_pos = True
                else:
                    has_neg = True
        if has_pos:
            active_pos.append(given)
        if has_neg:
            active_neg.append(given)
        given_bg = given in bgset
        produced = []
        if not given_bg:
            fs, att = _factors(given, pid)
            inferences += att
            produced.extend(fs)
        if has_pos:
            for other in active_neg:
                if other in dead or (given_bg and other in bgset):
                    continue
                rs, att = _resolvents(given, other, pid)
                inferences += att
                produced.extend(rs)
                if inferences >= budget:
                    exhausted = True
                    break
        if has_neg and not exhausted:
            for other in active_pos:
                if other is given or other in dead or (given_bg and other in bgset):
                    continue
                rs, att = _resolvents(other, given, pid)
                inferences += att
                produced.extend(rs)
                if inferences >= budget:
                    exhausted = True
                    break
        for lits in produced:
            cc = canon(lits)
            if cc is None or cc in seen:
                continue
            seen.add(cc)
            if len(cc) == 0:
                return ((), True, exhausted, inferences)
            if clause_depth(cc) > depth_cap:
                continue
            if admit(cc):
                return ((), True, exhausted, inferences)

    if any(c not in dead for c in agenda):
        exhausted = True
    kept = [c for c in alive if include_pid or not mentions(c, pid)]
    kept_t = tuple(sorted(kept, key=clause_key))
    return (kept_t, False, exhausted, inferences)
