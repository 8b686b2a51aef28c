"""Dense primal simplex for the small weight-fitting LPs, plus export to
the standard human-readable LP text format.

The programs here are tiny (a handful of free variables, at most a few
hundred generated rows), so a dense two-phase tableau with Bland's rule
is plenty: deterministic, immune to cycling, and simple to audit.  All
upstream arithmetic is exact rational; this module is the one documented
place values drop to floating point.

Conventions: variables are free-signed, the objective is minimized, and
every constraint is an affine expression required to be <= 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from foalp.cases import AffineValue

FEAS_TOL = 1e-9
PIVOT_TOL = 1e-9


class LpError(Exception):
    pass


@dataclass
class LinearProgram:
    """min objective(w) subject to row(w) <= 0 for every row; all w free."""

    num_vars: int
    objective: AffineValue
    rows: list[AffineValue] = field(default_factory=list)

    def add(self, row: AffineValue) -> None:
        self.rows.append(row)

    def check(self, weights, tol: float = FEAS_TOL) -> float:
        """Largest constraint violation at the given point (<= tol means
        feasible)."""

        worst = 0.0
        for row in self.rows:
            v = _affine_float(row, weights)
            if v > worst:
                worst = v
        return worst


@dataclass(frozen=True)
class LpResult:
    status: str  # "optimal" | "unbounded" | "infeasible"
    weights: tuple[float, ...] = ()
    objective: float = 0.0
    duals: tuple[float, ...] = ()

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def _affine_float(a: AffineValue, weights) -> float:
    total = float(a.constant)
    for i, c in a.coeffs:
        total += float(c) * float(weights[i])
    return total


def _dense(a: AffineValue, n: int) -> np.ndarray:
    out = np.zeros(n)
    for i, c in a.coeffs:
        if i >= n:
            raise LpError("weight index %d out of range (%d vars)" % (i, n))
        out[i] = float(c)
    return out


def solve(lp: LinearProgram) -> LpResult:
    """Two-phase simplex on the split-variable standard form.  Free w is
    written u - v with u, v >= 0; each row gains a slack; rows with a
    negative right side get a phase-one artificial."""

    n = lp.num_vars
    m = len(lp.rows)
    if m == 0:
        if lp.objective.coeffs:
            return LpResult("unbounded")
        return LpResult(
            "optimal", (0.0,) * n, float(lp.objective.constant), ()
        )

    a = np.vstack([_dense(row, n) for row in lp.rows])
    b = np.array([-float(row.constant) for row in lp.rows])
    c = _dense(lp.objective, n)

    # Columns: u (n), v (n), slack (m); artificials appended as needed.
    total = 2 * n + m
    tab = np.zeros((m, total))
    tab[:, :n] = a
    tab[:, n : 2 * n] = -a
    tab[:, 2 * n :] = np.eye(m)
    rhs = b.copy()
    flip = rhs < 0
    tab[flip] *= -1
    rhs[flip] *= -1

    basis = [2 * n + i for i in range(m)]
    art_cols: list[int] = []
    if flip.any():
        art = np.zeros((m, int(flip.sum())))
        k = 0
        for i in range(m):
            if flip[i]:
                art[i, k] = 1.0
                basis[i] = total + k
                art_cols.append(total + k)
                k += 1
        tab = np.hstack([tab, art])

        cost1 = np.zeros(tab.shape[1])
        cost1[art_cols] = 1.0
        status, obj1 = _optimize(tab, rhs, basis, cost1, allowed=tab.shape[1])
        if status != "optimal" or obj1 > FEAS_TOL:
            return LpResult("infeasible")
        _pivot_out_artificials(tab, rhs, basis, total)

    cost = np.zeros(tab.shape[1])
    cost[:n] = c
    cost[n : 2 * n] = -c
    status, _obj = _optimize(tab, rhs, basis, cost, allowed=total)
    if status != "optimal":
        return LpResult(status)

    x = np.zeros(tab.shape[1])
    for i, col in enumerate(basis):
        x[col] = rhs[i]
    w = tuple(float(x[j] - x[n + j]) for j in range(n))
    objective = float(np.dot(cost, x)) + float(lp.objective.constant)

    # Dual value of row i is the final reduced cost of its slack column:
    # y_i = -zrow[slack_i] under the <=0 convention used here.
    zrow = _reduced_costs(tab, basis, cost)
    duals = tuple(-float(zrow[2 * n + i]) for i in range(m))
    return LpResult("optimal", w, objective, duals)


def _reduced_costs(tab, basis, cost) -> np.ndarray:
    cb = cost[basis]
    return cost - cb @ tab


def _optimize(tab, rhs, basis, cost, allowed: int) -> tuple[str, float]:
    """Bland's rule primal simplex; mutates tab/rhs/basis in place.
    Columns at index >= allowed are never entered (retired artificials)."""

    m = tab.shape[0]
    while True:
        zrow = _reduced_costs(tab, basis, cost)
        enter = -1
        for j in range(allowed):
            if zrow[j] < -PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            cb = cost[basis]
            return "optimal", float(cb @ rhs)
        leave = -1
        best = np.inf
        for i in range(m):
            if tab[i, enter] > PIVOT_TOL:
                ratio = rhs[i] / tab[i, enter]
                if ratio < best - PIVOT_TOL or (
                    abs(ratio - best) <= PIVOT_TOL
                    and (leave < 0 or basis[i] < basis[leave])
                ):
                    best = ratio
                    leave = i
        if leave < 0:
            return "unbounded", 0.0
        _pivot(tab, rhs, basis, leave, enter)


def _pivot(tab, rhs, basis, row: int, col: int) -> None:
    piv = tab[row, col]
    tab[row] /= piv
    rhs[row] /= piv
    for i in range(tab.shape[0]):
        if i != row and abs(tab[i, col]) > 0:
            factor = tab[i, col]
            tab[i] -= factor * tab[row]
            rhs[i] -= factor * rhs[row]
    basis[row] = col


def _pivot_out_artificials(tab, rhs, basis, total: int) -> None:
    """After phase one, drive any degenerate artificial out of the basis
    so phase two never re-enters it."""

    for i in range(tab.shape[0]):
        if basis[i] >= total:
            for j in range(total):
                if abs(tab[i, j]) > PIVOT_TOL:
                    _pivot(tab, rhs, basis, i, j)
                    break


# ---------------------------------------------------------------------------
# LP text format


def export(lp: LinearProgram, name: str = "foalp") -> str:
    """Standard LP-format text: objective, rows, free declarations.  The
    ordering is deterministic, so exports are byte-stable."""

    lines = ["\\ %s" % name, "Minimize", " obj: %s" % _expr(lp.objective, True)]
    lines.append("Subject To")
    for k, row in enumerate(lp.rows):
        lines.append(
            " c%d: %s <= %s" % (k, _expr(row, False), _num(-row.constant))
        )
    lines.append("Bounds")
    for j in range(lp.num_vars):
        lines.append(" w%d free" % j)
    lines.append("End")
    return "\n".join(lines) + "\n"


def _num(x: Fraction) -> str:
    f = float(x)
    return repr(f)


def _expr(a: AffineValue, with_const: bool) -> str:
    terms = []
    for i, c in a.coeffs:
        terms.append((float(c), "w%d" % i))
    if with_const and a.constant != 0:
        terms.append((float(a.constant), ""))
    if not terms:
        return "0"
    parts = []
    for k, (coef, var) in enumerate(terms):
        mag = abs(coef)
        body = ("%s %s" % (repr(mag), var)).strip()
        if k == 0:
            parts.append(body if coef >= 0 else "- " + body)
        else:
            parts.append(("+ " if coef >= 0 else "- ") + body)
    return " ".join(parts)


def parse_lp(text: str) -> LinearProgram:
    """Read back the subset of LP format that export writes.  Exists so
    the export path has a verifiable round trip (and external solutions
    can be cross-checked in tests)."""

    section = ""
    objective: AffineValue | None = None
    rows: list[AffineValue] = []
    num_vars = 0
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("\\"):
            continue
        low = line.lower()
        if low in ("minimize", "subject to", "bounds", "end"):
            section = low
            continue
        if section == "minimize":
            objective = _parse_expr(line.split(":", 1)[1])
        elif section == "subject to":
            body, rhs = line.split(":", 1)[1].rsplit("<=", 1)
            expr = _parse_expr(body)
            rows.append(expr + AffineValue.of(Fraction(-float(rhs.strip()))))
        elif section == "bounds":
            name = line.split()[0]
            num_vars = max(num_vars, int(name[1:]) + 1)
    if objective is None:
        raise LpError("no objective section")
    lp = LinearProgram(num_vars, objective)
    for r in rows:
        lp.add(r)
    return lp


def _parse_expr(body: str) -> AffineValue:
    toks = body.split()
    out = AffineValue()
    sign = Fraction(1)
    pending: Fraction | None = None
    for tok in toks:
        if tok == "+":
            sign = Fraction(1)
            continue
        if tok == "-":
            sign = Fraction(-1)
            continue
        if tok.startswith("w"):
            coef = sign if pending is None else sign * pending
            out = out + AffineValue.weight(int(tok[1:]), coef)
            pending = None
            sign = Fraction(1)
        else:
            pending = Fraction(float(tok))
    if pending is not None:
        out = out + AffineValue.of(sign * pending)
    return out
