"""Ground-truth oracle: explicit MDP over a finite universe.

Grounding a first-order model over a small universe gives an enumerated
MDP that can be solved exactly (value iteration) or approximately but
with full constraint enumeration (the propositional approximate LP).
Both serve as references the symbolic pipeline is checked against; none
of this is meant to scale, that is the symbolic pipeline's job.

The grounding is a closed system: the state only changes through the
model's own actions, so exogenous process noise (e.g. simulator-side
arrivals) is deliberately absent and fixed-point values are well-defined.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from foalp.cases import AffineValue, CaseStatement
from foalp.fomdp import (
    FomdpModel,
    choice_distribution,
    ground_step,
    precondition_holds,
)
from foalp.linprog import LinearProgram, LpResult, solve
from foalp.logic import Formula, conj
from foalp.semantics import GroundState, Universe, ground_satisfiable

STATE_CAP = 200_000


class StateCapExceeded(Exception):
    pass


GroundAction = tuple[str, tuple[str, ...]]


@dataclass
class GroundMdp:
    uni: Universe
    states: tuple[GroundState, ...]
    actions: tuple[GroundAction, ...]
    # per state: indices into actions that are executable there
    applicable: tuple[tuple[int, ...], ...]
    # transitions[s][a] -> ((next_state_index, probability), ...); only
    # present for applicable (s, a) pairs
    transitions: tuple[dict[int, tuple[tuple[int, Fraction], ...]], ...]
    rewards: tuple[dict[int, Fraction], ...]
    discount: Fraction

    def index_of(self, state: GroundState) -> int:
        return self._index[state]

    def __post_init__(self) -> None:
        self._index = {s: i for i, s in enumerate(self.states)}


def _ground_actions(model: FomdpModel, uni: Universe) -> tuple[GroundAction, ...]:
    out = []
    for act in model.actions:
        domains = [uni.objects(v.sort) for v in act.params]
        for combo in itertools.product(*domains):
            out.append((act.name, tuple(combo)))
    return tuple(out)


def ground(
    model: FomdpModel,
    uni: Universe,
    initial: Iterable[GroundState],
    cap: int = STATE_CAP,
) -> GroundMdp:
    """Enumerate the MDP reachable from the initial states.  Rewards are
    charged on the pre-transition state, minus the action cost."""

    actions = _ground_actions(model, uni)
    states: list[GroundState] = []
    index: dict[GroundState, int] = {}
    for s in initial:
        if s not in index:
            index[s] = len(states)
            states.append(s)

    applicable: list[tuple[int, ...]] = []
    transitions: list[dict[int, tuple[tuple[int, Fraction], ...]]] = []
    rewards: list[dict[int, Fraction]] = []

    pos = 0
    while pos < len(states):
        s = states[pos]
        pos += 1
        app = []
        trans: dict[int, tuple[tuple[int, Fraction], ...]] = {}
        rew: dict[int, Fraction] = {}
        base_reward = model.reward_value(uni, s)
        for ai, (name, args) in enumerate(actions):
            if not precondition_holds(model, uni, s, name, args):
                continue
            app.append(ai)
            dist = choice_distribution(model, uni, s, name, args)
            row: dict[int, Fraction] = {}
            for ct, p in dist:
                nxt = ground_step(model, uni, s, ct)
                if nxt not in index:
                    if len(states) >= cap:
                        raise StateCapExceeded(
                            "more than %d reachable states" % cap
                        )
                    index[nxt] = len(states)
                    states.append(nxt)
                ni = index[nxt]
                row[ni] = row.get(ni, Fraction(0)) + p
            assert sum(row.values()) == 1, "transition row does not normalize"
            trans[ai] = tuple(sorted(row.items()))
            rew[ai] = base_reward - model.action(name).cost
        if not app:
            raise StateCapExceeded(
                "state with no executable action cannot be grounded"
            )
        applicable.append(tuple(app))
        transitions.append(trans)
        rewards.append(rew)

    return GroundMdp(
        uni=uni,
        states=tuple(states),
        actions=actions,
        applicable=tuple(applicable),
        transitions=tuple(transitions),
        rewards=tuple(rewards),
        discount=model.discount,
    )


def value_iteration(g: GroundMdp, eps: float = 1e-8) -> list[float]:
    """Optimal values to within eps in sup norm (standard stopping rule:
    iterate until the Bellman residual is below eps*(1-gamma)/(2*gamma))."""

    if eps <= 0:
        raise ValueError("eps must be positive")
    gamma = float(g.discount)
    v = [0.0] * len(g.states)
    if gamma == 0.0:
        return [
            max(float(g.rewards[si][ai]) for ai in g.applicable[si])
            for si in range(len(g.states))
        ]
    threshold = eps * (1.0 - gamma) / (2.0 * gamma)
    while True:
        residual = 0.0
        nxt = [0.0] * len(v)
        for si in range(len(g.states)):
            best = None
            for ai in g.applicable[si]:
                q = float(g.rewards[si][ai])
                for ni, p in g.transitions[si][ai]:
                    q += gamma * float(p) * v[ni]
                if best is None or q > best:
                    best = q
            nxt[si] = best
            residual = max(residual, abs(best - v[si]))
        v = nxt
        if residual < threshold:
            return v


def greedy_policy(g: GroundMdp, v: Sequence[float]) -> list[int]:
    """Per-state action index maximizing the one-step lookahead on v;
    ties go to the lowest action index, which follows declaration order."""

    gamma = float(g.discount)
    out = []
    for si in range(len(g.states)):
        best_ai = None
        best_q = None
        for ai in g.applicable[si]:
            q = float(g.rewards[si][ai])
            for ni, p in g.transitions[si][ai]:
                q += gamma * float(p) * v[ni]
            if best_q is None or q > best_q + 1e-12:
                best_q = q
                best_ai = ai
        out.append(best_ai)
    return out


def policy_value(g: GroundMdp, actions: Sequence[int], eps: float = 1e-8) -> list[float]:
    """Value of a fixed per-state action choice, to within eps in sup
    norm (same stopping rule as value_iteration)."""

    if eps <= 0:
        raise ValueError("eps must be positive")
    gamma = float(g.discount)
    if gamma == 0.0:
        return [
            float(g.rewards[si][actions[si]]) for si in range(len(g.states))
        ]
    threshold = eps * (1.0 - gamma) / (2.0 * gamma)
    v = [0.0] * len(g.states)
    while True:
        residual = 0.0
        nxt = [0.0] * len(v)
        for si in range(len(g.states)):
            ai = actions[si]
            q = float(g.rewards[si][ai])
            for ni, p in g.transitions[si][ai]:
                q += gamma * float(p) * v[ni]
            nxt[si] = q
            residual = max(residual, abs(q - v[si]))
        v = nxt
        if residual < threshold:
            return v


def ground_alp(
    g: GroundMdp, basis_values: Sequence[Sequence[Fraction]]
) -> tuple[LpResult, LinearProgram]:
    """The exact propositional approximate LP: minimize the summed state
    values subject to every ground Bellman constraint.

    basis_values[i][s] is the i-th basis function evaluated at state s.
    Returns the solved result together with the assembled program so
    callers can inspect or re-check the constraint set.
    """

    k = len(basis_values)
    n = len(g.states)
    for row in basis_values:
        if len(row) != n:
            raise ValueError("basis column count does not match state count")

    totals = [sum(basis_values[i][s] for s in range(n)) for i in range(k)]
    obj = AffineValue(
        Fraction(0), tuple((i, t) for i, t in enumerate(totals) if t != 0)
    )
    lp = LinearProgram(k, obj)
    for si in range(n):
        for ai in g.applicable[si]:
            coeffs = []
            for i in range(k):
                c = -basis_values[i][si]
                for ni, p in g.transitions[si][ai]:
                    c += g.discount * p * basis_values[i][ni]
                if c != 0:
                    coeffs.append((i, c))
            lp.add(AffineValue(g.rewards[si][ai], tuple(coeffs)))
    return solve(lp), lp


def brute_force_max(
    cases: Sequence[CaseStatement],
    uni: Universe,
    weights: Sequence[Fraction] | None = None,
    margin: int = 2,
) -> tuple[Fraction, tuple[int, ...]] | None:
    """Highest total value over all jointly satisfiable partition
    combinations, decided by ground-model search over the universe
    (padded at the chain edges so edge effects cannot hide models).

    Returns (value, per-case partition indices), or None when no
    combination is satisfiable.  Exponential in the number of cases; an
    oracle for the symbolic maximization, nothing more.
    """

    ext = uni.extended(margin)
    combos = []
    for pick in itertools.product(*(range(len(c.partitions)) for c in cases)):
        total = Fraction(0)
        fs: list[Formula] = []
        for c, i in zip(cases, pick):
            f, v = c.partitions[i]
            fs.append(f)
            total += v.evaluate(weights)
        combos.append((total, pick, conj(*fs)))
    combos.sort(key=lambda t: (-t[0], t[1]))
    for total, pick, f in combos:
        if ground_satisfiable(f, ext):
            return total, pick
    return None
