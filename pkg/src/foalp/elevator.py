"""The elevator scheduling domain: packaged model, basis functions,
baseline policies, a passenger simulator, and the evaluation harness.

The model itself (fluents, actions, reward criteria) lives in
``domains/elevators.fod`` and is parsed, not hard-coded; this module adds
everything around it that turns the model into runnable episodes:

* a universe builder and initial state (elevators start at the bottom
  floor, no passengers);
* passenger arrivals, which are simulator-side process noise rather than
  part of the model: each step an arrival count is drawn as
  max(0, round(N(mean, sd))), and every arrival gets a uniform origin,
  a uniform destination distinct from it, and independently sampled
  attributes (VIP, attended, group membership);
* policies — greedy one-step lookahead against a weighted basis value
  function, exact depth-limited expectimax, and a family of rule-based
  heuristics — all of which only ever return precondition-satisfying
  actions;
* the trial runner and the results table (policy rows, one column per
  floor count, mean +/- sd, and an upper-bound column for policies that
  carry one).

Conventions this module fixes (the model leaves them open, so they are
interpretations, all configurable or documented):

* Step reward is evaluated on the post-transition state, minus the
  action's cost, and is accrued before new arrivals are injected; the
  discount weight of step t is gamma**t.
* Argmax tie-breaking uses the fixed action order noop < up < down <
  open, then lowest elevator index, making every policy deterministic.
* Heuristic constraint letters: (V) move toward the nearest waiting VIP
  before serving others; (A) never open to board when an attended
  passenger would end up alone in the car; (G) never open to board when
  boarding would put two groups in the car.  Since a successful door
  opening boards every eligible passenger on the floor, (A) and (G) can
  only be honored by keeping the doors shut, even when that delays a
  delivery.

Trials use independent RNG streams derived from the master seed, so the
per-trial returns are reproducible bit for bit regardless of execution
order.
"""

from __future__ import annotations

import concurrent.futures
import csv
import functools
import importlib.resources
import io
import math
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Sequence

from foalp.backup import BasisFunction, LinearValueFunction, make_basis
from foalp.cases import case
from foalp.domainfile import parse_domain
from foalp.fomdp import (
    FomdpModel,
    choice_distribution,
    ground_step,
    precondition_holds,
)
from foalp.logic import TRUE, neg
from foalp.semantics import GroundState, Universe

GroundAction = tuple[str, tuple[str, ...]]

#: Fixed tie-break order for argmax policies; unknown action names sort
#: after these, alphabetically.
ACTION_ORDER = ("noop", "up", "down", "open")


class ElevatorError(Exception):
    pass


# ---------------------------------------------------------------------------
# Model and basis


def build_model() -> FomdpModel:
    """Parse the packaged elevator domain file."""

    src = (
        importlib.resources.files("foalp") / "domains" / "elevators.fod"
    ).read_text(encoding="utf-8")
    return parse_domain(src)


def basis_set(model: FomdpModel, n: int) -> tuple[BasisFunction, ...]:
    """The constant feature plus the first n reward-criterion indicators,
    in the order the model lists its criteria."""

    if not 1 <= n <= len(model.criteria):
        raise ElevatorError(
            "basis size must be between 1 and %d, got %d"
            % (len(model.criteria), n)
        )
    named = [("const", case((TRUE, 1)))]
    for name, _amount, f in model.criteria[:n]:
        named.append((name, case((f, 1), (neg(f), 0))))
    return make_basis(model, named)


# ---------------------------------------------------------------------------
# Episodes


@dataclass(frozen=True)
class EpisodeConfig:
    """Knobs of one evaluation cell.  The defaults reproduce the standard
    protocol: 100 trials of 50 steps, arrivals N(0.1, 0.35) per step."""

    floors: int = 5
    elevators: int = 1
    horizon: int = 50
    trials: int = 100
    arrival_mean: float = 0.1
    arrival_sd: float = 0.35
    vip_prob: float = 0.1
    attended_prob: float = 0.1
    groups: int = 2
    seed: int = 0


@dataclass
class Episode:
    """One trial's mutable context.  The universe grows as passengers
    arrive; people who never arrived simply do not exist, keeping the
    quantified criteria cheap to evaluate."""

    uni: Universe
    state: GroundState
    people: int = 0


def initial_episode(model: FomdpModel, cfg: EpisodeConfig) -> Episode:
    floors = tuple("F%d" % (i + 1) for i in range(cfg.floors))
    elevs = tuple("E%d" % (i + 1) for i in range(cfg.elevators))
    groups = tuple("G%d" % (i + 1) for i in range(cfg.groups))
    if cfg.floors < 2:
        raise ElevatorError("need at least 2 floors")
    if cfg.elevators < 1:
        raise ElevatorError("need at least 1 elevator")
    uni = Universe(
        {"floor": floors, "elev": elevs, "person": (), "group": groups},
        chain_sort="floor",
    )
    atoms = frozenset(("EAt", (e, "F1")) for e in elevs)
    return Episode(uni, GroundState(atoms))


def inject_arrivals(
    model: FomdpModel, ep: Episode, cfg: EpisodeConfig, rng: random.Random
) -> Episode:
    """Sample this step's arrivals and add them to the episode: a fresh
    person object each, waiting at a uniform origin floor with a uniform
    destination distinct from it and independently drawn attributes."""

    count = max(0, round(rng.gauss(cfg.arrival_mean, cfg.arrival_sd)))
    if count == 0:
        return ep
    floors = ep.uni.objects("floor")
    groups = ep.uni.objects("group")
    people = list(ep.uni.objects("person"))
    atoms = set(ep.state.atoms)
    n = ep.people
    for _ in range(count):
        n += 1
        p = "P%d" % n
        people.append(p)
        origin = floors[rng.randrange(len(floors))]
        rest = [f for f in floors if f != origin]
        dest = rest[rng.randrange(len(rest))]
        atoms.add(("PAt", (p, origin)))
        atoms.add(("Dst", (p, dest)))
        if rng.random() < cfg.vip_prob:
            atoms.add(("VIP", (p,)))
        if rng.random() < cfg.attended_prob:
            atoms.add(("Attended", (p,)))
        if groups:
            atoms.add(("Group", (p, groups[rng.randrange(len(groups))])))
    sorts = dict(ep.uni.sorts)
    sorts["person"] = tuple(people)
    uni = Universe(sorts, ep.uni.chain_sort)
    return Episode(uni, GroundState(frozenset(atoms)), n)


def legal_actions(
    model: FomdpModel, uni: Universe, state: GroundState
) -> list[GroundAction]:
    """Executable ground actions in tie-break order: noop < up < down <
    open, then lowest elevator index."""

    def rank(name: str) -> tuple[int, str]:
        try:
            return (ACTION_ORDER.index(name), "")
        except ValueError:
            return (len(ACTION_ORDER), name)

    out = []
    for act in sorted(model.actions, key=lambda a: rank(a.name)):
        domains = [uni.objects(v.sort) for v in act.params]
        combos = [()]
        for dom in domains:
            combos = [c + (o,) for c in combos for o in dom]
        for args in combos:
            if precondition_holds(model, uni, state, act.name, args):
                out.append((act.name, args))
    if not out:
        raise ElevatorError("no executable action; noop should always apply")
    return out


# ---------------------------------------------------------------------------
# Policies


class Policy:
    """A deterministic state-to-action rule.  Subclasses implement
    choose(); the base class guarantees nothing beyond the signature."""

    name = "policy"

    def choose(self, uni: Universe, state: GroundState) -> GroundAction:
        raise NotImplementedError


def _successor_distribution(
    model: FomdpModel,
    uni: Universe,
    state: GroundState,
    action: GroundAction,
) -> list[tuple[GroundState, Fraction]]:
    name, args = action
    out = []
    for ch, p in choice_distribution(model, uni, state, name, args):
        out.append((ground_step(model, uni, state, ch), p))
    return out


class GreedyPolicy(Policy):
    """One-step lookahead against a fitted value function: maximize
    reward(state) - cost + gamma * expected value of the successor."""

    def __init__(self, model: FomdpModel, value: LinearValueFunction):
        if value.weights is None:
            raise ElevatorError("greedy policy needs a weighted value function")
        self.model = model
        self.value = value
        self.name = "greedy"

    def choose(self, uni: Universe, state: GroundState) -> GroundAction:
        model = self.model
        base = model.reward_value(uni, state)
        best: GroundAction | None = None
        best_q: Fraction | None = None
        for action in legal_actions(model, uni, state):
            q = base - model.action(action[0]).cost
            for succ, p in _successor_distribution(model, uni, state, action):
                q += model.discount * p * self.value.evaluate(uni, succ)
            if best_q is None or q > best_q:
                best, best_q = action, q
        assert best is not None
        return best


class MyopicPolicy(Policy):
    """Exact depth-limited expectimax with terminal value zero; rewards
    follow the simulator's timing (post-transition state minus cost)."""

    def __init__(self, model: FomdpModel, depth: int):
        if depth < 1:
            raise ElevatorError("lookahead depth must be at least 1")
        self.model = model
        self.depth = depth
        self.name = "myopic-%d" % depth

    def _value(self, uni: Universe, state: GroundState, depth: int) -> Fraction:
        best: Fraction | None = None
        for action in legal_actions(self.model, uni, state):
            q = self._q(uni, state, action, depth)
            if best is None or q > best:
                best = q
        assert best is not None
        return best

    def _q(
        self, uni: Universe, state: GroundState, action: GroundAction, depth: int
    ) -> Fraction:
        model = self.model
        q = Fraction(0)
        for succ, p in _successor_distribution(model, uni, state, action):
            gain = model.reward_value(uni, succ) - model.action(action[0]).cost
            if depth > 1:
                gain += model.discount * self._value(uni, succ, depth - 1)
            q += p * gain
        return q

    def choose(self, uni: Universe, state: GroundState) -> GroundAction:
        best: GroundAction | None = None
        best_q: Fraction | None = None
        for action in legal_actions(self.model, uni, state):
            q = self._q(uni, state, action, self.depth)
            if best_q is None or q > best_q:
                best, best_q = action, q
        assert best is not None
        return best


class HeuristicPolicy(Policy):
    """Rule-based service: open to deliver or pick up at the current
    floor, otherwise move toward the nearest floor that needs service,
    preferring lower floors on distance ties.  Carrying passengers pins
    the targets to their destinations (moves past them are illegal
    anyway).  Constraint letters tighten the rules as documented in the
    module docstring.  Drives the lowest-indexed elevator; any others
    idle."""

    def __init__(self, model: FomdpModel, letters: str = ""):
        bad = set(letters) - set("VAG")
        if bad:
            raise ElevatorError("unknown constraint letters %r" % "".join(sorted(bad)))
        self.model = model
        self.letters = frozenset(letters)
        self.name = "heuristic-{%s}" % ",".join(sorted(self.letters))

    def _blocked(
        self,
        state: GroundState,
        boarding: set[str],
        staying: set[str],
    ) -> bool:
        after = staying | boarding
        if "A" in self.letters and boarding:
            if len(after) == 1:
                (p,) = after
                if state.holds("Attended", (p,)):
                    return True
        if "G" in self.letters and boarding:
            def conflict(group: set[str]) -> bool:
                seen = set()
                for p in group:
                    for pred, args in state.atoms:
                        if pred == "Group" and args[0] == p:
                            seen.add(args[1])
                return len(seen) > 1
            if conflict(after) and not conflict(staying):
                return True
        return False

    def choose(self, uni: Universe, state: GroundState) -> GroundAction:
        elevs = uni.objects("elev")
        e = elevs[0]
        floors = uni.chain()
        here = next(f for f in floors if state.holds("EAt", (e, f)))
        idx = {f: i for i, f in enumerate(floors)}

        onboard = {
            args[0]
            for pred, args in state.atoms
            if pred == "OnE" and args[1] == e
        }
        deliver = {p for p in onboard if state.holds("Dst", (p, here))}
        waiting_at: dict[str, set[str]] = {}
        for pred, args in state.atoms:
            if pred == "PAt" and not state.holds("Dst", args):
                waiting_at.setdefault(args[1], set()).add(args[0])
        boarding = waiting_at.get(here, set())

        if (deliver or boarding) and not self._blocked(
            state, set(boarding), onboard - deliver
        ):
            return ("open", (e,))

        if onboard:
            vips = {p for p in onboard if state.holds("VIP", (p,))}
            serve = vips if "V" in self.letters and vips else onboard
            targets = {
                args[1]
                for pred, args in state.atoms
                if pred == "Dst" and args[0] in serve
            }
        else:
            targets = set(waiting_at)
            if "V" in self.letters:
                vip_floors = {
                    f
                    for f, group in waiting_at.items()
                    if any(state.holds("VIP", (p,)) for p in group)
                }
                if vip_floors:
                    targets = vip_floors
        targets.discard(here)
        if not targets:
            return ("noop", ())

        goal = min(targets, key=lambda f: (abs(idx[f] - idx[here]), idx[f]))
        name = "up" if idx[goal] > idx[here] else "down"
        if precondition_holds(self.model, uni, state, name, (e,)):
            return (name, (e,))
        return ("noop", ())


def parse_policy(
    model: FomdpModel, spec: str, value: LinearValueFunction | None = None
) -> Policy:
    """Policy from a textual name: ``greedy`` (needs a weighted value
    function), ``myopic:1`` / ``myopic:2``, or ``heuristic:<letters>``
    with letters from VAG (``heuristic:`` is the unconstrained base)."""

    if spec == "greedy":
        if value is None:
            raise ElevatorError("greedy policy requires solved weights")
        return GreedyPolicy(model, value)
    if spec.startswith("myopic:"):
        try:
            depth = int(spec.split(":", 1)[1])
        except ValueError:
            raise ElevatorError("bad myopic depth in %r" % spec) from None
        return MyopicPolicy(model, depth)
    if spec.startswith("heuristic:"):
        return HeuristicPolicy(model, spec.split(":", 1)[1])
    raise ElevatorError("unknown policy %r" % spec)


# ---------------------------------------------------------------------------
# Simulation


def step_policy(
    model: FomdpModel,
    policy: Policy,
    ep: Episode,
    cfg: EpisodeConfig,
    rng: random.Random,
) -> tuple[GroundAction, str, Episode, Fraction]:
    """One simulator step: the policy acts, nature resolves the choice,
    reward is read off the post-transition state minus the action cost,
    and only then do new arrivals appear.  Returns the action taken, the
    sampled choice name, the next episode context, and the reward."""

    action = policy.choose(ep.uni, ep.state)
    name, args = action
    dist = choice_distribution(model, ep.uni, ep.state, name, args)
    draw = rng.random()
    acc = 0.0
    chosen = dist[-1][0]
    for ch, p in dist:
        acc += float(p)
        if draw < acc:
            chosen = ch
            break
    state = ground_step(model, ep.uni, ep.state, chosen)
    reward = model.reward_value(ep.uni, state) - model.action(name).cost
    nxt = inject_arrivals(model, Episode(ep.uni, state, ep.people), cfg, rng)
    return action, chosen.name, nxt, reward


def trial_seed(cfg: EpisodeConfig, trial: int) -> int:
    """Independent stream per trial, derived from the master seed; the
    floor count is folded in so different table cells decorrelate."""

    return (cfg.seed * 1_000_003 + cfg.floors) * 1_000_003 + trial


def run_trial(
    model: FomdpModel,
    policy: Policy,
    cfg: EpisodeConfig,
    trial: int,
    trace: list[str] | None = None,
) -> float:
    """Discounted return of one seeded episode."""

    rng = random.Random(trial_seed(cfg, trial))
    ep = initial_episode(model, cfg)
    total = 0.0
    disc = 1.0
    gamma = float(model.discount)
    for t in range(cfg.horizon):
        action, choice, ep, reward = step_policy(model, policy, ep, cfg, rng)
        total += disc * float(reward)
        disc *= gamma
        if trace is not None:
            trace.append(
                "t=%d action=%s(%s) choice=%s reward=%s people=%d"
                % (t, action[0], ",".join(action[1]), choice, reward, ep.people)
            )
    return total


@dataclass(frozen=True)
class SimResult:
    returns: tuple[float, ...]

    @property
    def mean(self) -> float:
        return sum(self.returns) / len(self.returns)

    @property
    def sd(self) -> float:
        """Sample standard deviation (n - 1); zero for a single trial."""

        n = len(self.returns)
        if n < 2:
            return 0.0
        m = self.mean
        return math.sqrt(sum((r - m) ** 2 for r in self.returns) / (n - 1))


def simulate(
    model: FomdpModel, policy: Policy, cfg: EpisodeConfig, workers: int = 1
) -> SimResult:
    """Independent seeded trials.  Each trial has its own RNG stream and
    the returns are collected by trial index, so the result is identical
    however the trials are scheduled — `workers` > 1 farms them out to a
    process pool without changing a single bit of the output."""

    if cfg.trials < 1:
        raise ElevatorError("need at least 1 trial")
    if workers < 1:
        raise ElevatorError("need at least 1 worker")
    if workers == 1 or cfg.trials == 1:
        returns = tuple(
            run_trial(model, policy, cfg, t) for t in range(cfg.trials)
        )
        return SimResult(returns)
    with concurrent.futures.ProcessPoolExecutor(
        max_workers=min(workers, cfg.trials)
    ) as pool:
        returns = tuple(
            pool.map(
                functools.partial(run_trial, model, policy, cfg),
                range(cfg.trials),
            )
        )
    return SimResult(returns)


# ---------------------------------------------------------------------------
# Results table


@dataclass(frozen=True)
class TableRow:
    policy: str
    cells: tuple[SimResult, ...]
    bound: float | None = None


@dataclass(frozen=True)
class ResultsTable:
    """Policy rows by floor-count columns, mean +/- sample sd per cell,
    plus an upper-bound column for rows that have one."""

    floors: tuple[int, ...]
    rows: tuple[TableRow, ...]

    def to_text(self) -> str:
        header = ["policy"] + ["F%d" % f for f in self.floors] + ["bound"]
        body = []
        for row in self.rows:
            cells = ["%.1f +/- %.1f" % (c.mean, c.sd) for c in row.cells]
            bound = "%.1f" % row.bound if row.bound is not None else "-"
            body.append([row.policy] + cells + [bound])
        widths = [
            max(len(line[i]) for line in [header] + body)
            for i in range(len(header))
        ]
        out = []
        for line in [header] + body:
            out.append(
                "  ".join(cell.ljust(w) for cell, w in zip(line, widths)).rstrip()
            )
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["policy"]
        for f in self.floors:
            head += ["F%d_mean" % f, "F%d_sd" % f]
        head.append("bound")
        w.writerow(head)
        for row in self.rows:
            line: list[object] = [row.policy]
            for c in row.cells:
                line += [repr(c.mean), repr(c.sd)]
            line.append("" if row.bound is None else repr(row.bound))
            w.writerow(line)
        return buf.getvalue()


def results_table(
    model: FomdpModel,
    entries: Sequence[tuple[str, Policy, float | None]],
    floors: Sequence[int],
    cfg: EpisodeConfig,
    workers: int = 1,
) -> ResultsTable:
    """Evaluate every (name, policy, bound) entry on every floor count,
    holding the rest of the episode configuration fixed."""

    rows = []
    for name, policy, bound in entries:
        cells = []
        for f in floors:
            cells.append(
                simulate(model, policy, replace(cfg, floors=f), workers)
            )
        rows.append(TableRow(name, tuple(cells), bound))
    return ResultsTable(tuple(floors), tuple(rows))


def standard_entries(
    model: FomdpModel,
    value: LinearValueFunction | None = None,
    bound: float | None = None,
    myopic_depths: Sequence[int] = (1, 2),
) -> list[tuple[str, Policy, float | None]]:
    """The default evaluation lineup: greedy over the fitted value (when
    weights are given), every heuristic letter combination, and the
    myopic lookaheads."""

    entries: list[tuple[str, Policy, float | None]] = []
    if value is not None:
        entries.append(("greedy", GreedyPolicy(model, value), bound))
    for letters in ("", "V", "A", "G", "VA", "VG", "AG", "VAG"):
        p = HeuristicPolicy(model, letters)
        entries.append((p.name, p, None))
    for d in myopic_depths:
        p = MyopicPolicy(model, d)
        entries.append((p.name, p, None))
    return entries
