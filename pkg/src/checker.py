#
#    PTP Timing Verifier: estimates timing distributions of ROS-style robot control systems from traces and verifies timeliness queries on probabilistic timed programs.
#    Copyright (C) 2025 Ferenc Acs <pass.schist2954@eagereverest.com>
#
#    This program is free software: you can redistribute it and/or modify
#    it under the terms of the GNU Affero General Public License as
#    published by the Free Software Foundation, either version 3 of the
#    License, or (at your option) any later version.
#
#    This program is distributed in the hope that it will be useful,
#    but WITHOUT ANY WARRANTY; without even the implied warranty of
#    MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#    GNU Affero General Public License for more details.
#
#    You should have received a copy of the GNU Affero General Public License
#    along with this program.  If not, see <https://www.gnu.org/licenses/>.
#

"""Reachability queries on probabilistic timed programs.

A model is digitized at granularity g (clock ticks of 1/g model time units) into a
finite MDP, qualitative precomputation fixes the states with probability 0 or 1, and
the rest are solved exactly in reverse topological order when the undecided states
form no cycle, or by value iteration otherwise.
"""

import logging
import re
import time
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, NamedTuple, Optional, Sequence, Set, Tuple, Union

import networkx as nx
import numpy as np
from lark import Lark, Transformer, v_args
from lark.exceptions import LarkError, UnexpectedInput
from tqdm import tqdm

from .config import Config
from .errors import ConvergenceError, LadderError, ModelError, ParseError, QueryError, StateSpaceExceeded
from .ptp import (COMPARISONS, LOCATION_VARIABLE, Assertion, Comparison, Conjunction, Disjunction, LabelAtom,
                  Negation, Ptp, TRUE, Zone, AffineExpr, clock_ceilings, require_valid)

logger = logging.getLogger(__name__)

METHODS = ("auto", "value-iteration", "topological")
TOPOLOGICAL_EXACT = "topological-exact"
VALUE_ITERATION = "value-iteration"
TICK = "tick"


# --- queries ---

@dataclass(frozen=True)
class PctlQuery:
    opt: str
    prop: Assertion
    bound: Optional[int] = None

    def __str__(self) -> str:
        bound = f"<={self.bound}" if self.bound is not None else ""
        return f"P{self.opt}=?[F{bound} {self.prop}]"


QUERY_GRAMMAR = r"""
    start: OPT "=?" "[" "F" bound? prop "]"
    bound: "<=" INT

    ?prop: conj ("|" conj)*  -> disjunction
    ?conj: unary ("&" unary)* -> conjunction
    ?unary: "!" unary        -> negation
          | atom
    ?atom: operand OP operand -> comparison
         | operand EQ operand -> comparison
         | ESCAPED_STRING    -> label
         | "true"            -> true
         | "(" prop ")"

    ?operand: NAME | SIGNED_INT

    OPT: "Pmax" | "Pmin"
    OP: "!=" | "<=" | ">=" | "<" | ">"
    EQ: "="

    %import common.CNAME -> NAME
    %import common.INT
    %import common.SIGNED_INT
    %import common.ESCAPED_STRING
    %import common.WS
    %ignore WS
"""

_TEMPORAL_HEAD = re.compile(r"\[\s*[GXU]\b")
_UNTIL = re.compile(r"(?<![\w.])U(?!\w)")
_NESTED = re.compile(r"\bP(max|min)?\s*(=\?|[<>]=?)")


def _unsupported_operator(text: str) -> bool:
    """Only consulted after the grammar rejected the text."""
    body = re.sub(r'"[^"]*"', '""', text)
    inner = body[body.find("[") + 1:] if "[" in body else ""
    return bool(_TEMPORAL_HEAD.search(body) or _UNTIL.search(inner) or _NESTED.search(inner))


@v_args(inline=True)
class _QueryBuilder(Transformer):
    def start(self, opt, *rest):
        bound = rest[0] if len(rest) == 2 else None
        return PctlQuery(str(opt)[1:], rest[-1], bound)

    def bound(self, value):
        return int(value)

    def disjunction(self, *args):
        return args[0] if len(args) == 1 else Disjunction(tuple(args))

    def conjunction(self, *args):
        return args[0] if len(args) == 1 else Conjunction(tuple(args))

    def negation(self, arg):
        return Negation(arg)

    def comparison(self, left, op, right):
        return Comparison(self._operand(left), str(op), self._operand(right))

    def label(self, text):
        return LabelAtom(str(text)[1:-1])

    def true(self):
        return TRUE

    @staticmethod
    def _operand(token):
        return int(token) if token.type in ("SIGNED_INT", "INT") else str(token)


_query_parser = Lark(QUERY_GRAMMAR, parser="lalr", lexer="contextual", maybe_placeholders=False)


def parse_query(text: str) -> PctlQuery:
    """Parse `Pmax=?[F<=T prop]` / `Pmin=?[F prop]`; labels are quoted, comparisons use & and |."""
    try:
        tree = _query_parser.parse(text)
    except UnexpectedInput as e:
        if _unsupported_operator(text):
            raise QueryError("only F and F<=T supported")
        line = getattr(e, "line", -1)
        column = getattr(e, "column", -1)
        raise ParseError(f"malformed query {text!r}", line if line > 0 else None,
                         column if column > 0 else None, "query")
    except LarkError as e:
        raise ParseError(f"malformed query: {e}", source="query")
    return _QueryBuilder().transform(tree)


# --- digitized MDP ---

class DigitizedState(NamedTuple):
    location: int
    valuation: Tuple[int, ...]
    clocks: Tuple[int, ...]
    elapsed: Optional[int] = None


class Action(NamedTuple):
    tag: Union[str, int]
    distribution: Tuple[Tuple[int, Fraction], ...]


@dataclass(frozen=True)
class Mdp:
    states: Tuple[DigitizedState, ...]
    initial: int
    actions: Tuple[Tuple[Action, ...], ...]
    target: FrozenSet[int]
    granularity: int
    bound: Optional[int] = None
    locations: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.states)

    def successors(self, state: int) -> Set[int]:
        return {succ for action in self.actions[state] for succ, _ in action.distribution}

    def predecessors(self) -> List[List[Tuple[int, int]]]:
        """(state, action index) pairs leading into each state."""
        pre: List[List[Tuple[int, int]]] = [[] for _ in self.states]
        for s, actions in enumerate(self.actions):
            for a, action in enumerate(actions):
                for succ, _ in action.distribution:
                    pre[succ].append((s, a))
        return pre


def _compile_zone(zone: Zone, clock_index: Dict[str, int], g: int):
    compiled = []
    for c in zone.constraints:
        right = -1 if c.right is None else clock_index[c.right]
        compiled.append((clock_index[c.left], right, COMPARISONS[c.rel], c.bound * g))
    return tuple(compiled)


def _zone_holds(compiled, ticks: Tuple[int, ...]) -> bool:
    for left, right, relation, bound in compiled:
        difference = ticks[left] - (ticks[right] if right >= 0 else 0)
        if not relation(difference, bound):
            return False
    return True


class _Digitizer:
    def __init__(self, m: Ptp, g: int, bound: Optional[int], target: Optional[Assertion],
                 state_cap: int, cap_slack: int):
        self.m = m
        self.g = g
        self.bound = bound
        self.target = target
        self.state_cap = state_cap
        self.clock_index = {clock: k for k, clock in enumerate(m.clocks)}
        ceilings = clock_ceilings(m)
        self.caps = tuple(ceilings[clock] * g + 1 + cap_slack for clock in m.clocks)
        self.deadline = bound * g if bound is not None else None
        self.variables = tuple(v.name for v in m.variables)
        self.ranges = {v.name: (v.lo, v.hi) for v in m.variables}
        self.expose_location = LOCATION_VARIABLE not in self.ranges
        self.invariants = tuple(_compile_zone(m.invariant_of(loc), self.clock_index, g) for loc in m.locations)
        self.location_labels = tuple(m.labels_of(loc) for loc in m.locations)
        self.outgoing: List[List[int]] = [[] for _ in m.locations]
        for k, transition in enumerate(m.transitions):
            self.outgoing[m.location_index[transition.source]].append(k)
        self.enabling = tuple(_compile_zone(t.enabling, self.clock_index, g) for t in m.transitions)
        self.guard_cache: Dict[Tuple[int, Tuple[int, ...]], bool] = {}
        self.target_cache: Dict[Tuple[int, Tuple[int, ...]], bool] = {}

        self.states: List[DigitizedState] = []
        self.index: Dict[DigitizedState, int] = {}
        self.actions: List[Tuple[Action, ...]] = []
        self.target_states: Set[int] = set()
        self.frontier: deque = deque()

    def env(self, location: int, valuation: Tuple[int, ...]) -> Dict[str, int]:
        env = dict(zip(self.variables, valuation))
        if self.expose_location:
            env[LOCATION_VARIABLE] = location
        return env

    def is_target(self, state: DigitizedState) -> bool:
        if self.target is None:
            return False
        if self.deadline is not None and state.elapsed > self.deadline:
            return False
        key = (state.location, state.valuation)
        if key not in self.target_cache:
            self.target_cache[key] = self.target.evaluate(self.env(*key), self.location_labels[state.location])
        return self.target_cache[key]

    def add(self, state: DigitizedState) -> int:
        found = self.index.get(state)
        if found is not None:
            return found
        number = len(self.states)
        if number >= self.state_cap:
            raise StateSpaceExceeded(number + 1, self.state_cap)
        self.index[state] = number
        self.states.append(state)
        self.actions.append(())
        if self.is_target(state):
            self.target_states.add(number)
        elif self.deadline is None or state.elapsed <= self.deadline:
            self.frontier.append(number)
        return number

    def guard_holds(self, k: int, location: int, valuation: Tuple[int, ...]) -> bool:
        key = (k, valuation)
        if key not in self.guard_cache:
            self.guard_cache[key] = self.m.transitions[k].guard.evaluate(self.env(location, valuation))
        return self.guard_cache[key]

    def apply_update(self, outcome, location: int, valuation: Tuple[int, ...]) -> Tuple[int, ...]:
        if not outcome.update:
            return valuation
        env = self.env(location, valuation)
        values = dict(zip(self.variables, valuation))
        for name, value in outcome.update:
            new = value.evaluate(env) if isinstance(value, AffineExpr) else value
            lo, hi = self.ranges[name]
            if not lo <= new <= hi:
                raise ModelError(f"update {name}:={new} leaves range {lo}..{hi} "
                                 f"from location '{self.m.locations[location]}'")
            values[name] = new
        return tuple(values[name] for name in self.variables)

    def expand(self, number: int) -> Tuple[Action, ...]:
        state = self.states[number]
        actions = []

        ticks = tuple(min(t + 1, cap) for t, cap in zip(state.clocks, self.caps))
        if _zone_holds(self.invariants[state.location], ticks):
            elapsed = None if state.elapsed is None else min(state.elapsed + 1, self.deadline + 1)
            succ = self.add(DigitizedState(state.location, state.valuation, ticks, elapsed))
            actions.append(Action(TICK, ((succ, Fraction(1)),)))

        for k in self.outgoing[state.location]:
            if not self.guard_holds(k, state.location, state.valuation):
                continue
            if not _zone_holds(self.enabling[k], state.clocks):
                continue
            successors = []
            for outcome in self.m.transitions[k].outcomes:
                target = self.m.location_index[outcome.target]
                reset = tuple(0 if clock in outcome.resets else t for clock, t in zip(self.m.clocks, state.clocks))
                if not _zone_holds(self.invariants[target], reset):
                    break
                valuation = self.apply_update(outcome, state.location, state.valuation)
                successors.append((DigitizedState(target, valuation, reset, state.elapsed), outcome.weight))
            else:
                merged: Dict[int, Fraction] = {}
                for succ_state, weight in successors:
                    succ = self.add(succ_state)
                    merged[succ] = merged.get(succ, Fraction(0)) + weight
                actions.append(Action(k, tuple(merged.items())))
        return tuple(actions)

    def run(self) -> Mdp:
        m = self.m
        start = DigitizedState(m.location_index[m.initial], tuple(m.initial_values()[v] for v in self.variables),
                               tuple(0 for _ in m.clocks), None if self.bound is None else 0)
        if not _zone_holds(self.invariants[start.location], start.clocks):
            raise ModelError("initial state violates the initial invariant")
        initial = self.add(start)
        while self.frontier:
            number = self.frontier.popleft()
            self.actions[number] = self.expand(number)
        return Mdp(tuple(self.states), initial, tuple(self.actions), frozenset(self.target_states),
                   self.g, self.bound, m.locations)


def digitize(m: Ptp, g: int, bound: Optional[int] = None, *, target: Optional[Assertion] = None,
             state_cap: Optional[int] = None, cap_slack: int = 0) -> Mdp:
    """Digital-clocks MDP of m at granularity g, restricted to states reachable from the initial one.

    Target states (when a target proposition is given) and states past the deadline
    are materialized but have no actions.
    """
    if isinstance(g, bool) or not isinstance(g, int) or g < 1:
        raise ModelError(f"granularity must be a positive integer, got {g!r}")
    if bound is not None and bound < 0:
        raise QueryError(f"time bound must be nonnegative, got {bound}")
    if cap_slack < 0:
        raise ModelError(f"cap slack must be nonnegative, got {cap_slack}")
    require_valid(m)
    cap = state_cap if state_cap is not None else Config.get_state_cap()
    started = time.perf_counter()
    mdp = _Digitizer(m, g, bound, target, cap, cap_slack).run()
    logger.debug(f"Digitized model at g={g}: {len(mdp)} states, {len(mdp.target)} targets "
                 f"({time.perf_counter() - started:.2f}s)")
    return mdp


# --- qualitative precomputation ---

def _backward_closure(pre: List[List[Tuple[int, int]]], seeds: Iterable[int],
                      allowed: Optional[Set[int]] = None) -> Set[int]:
    reached = set(seeds)
    queue = deque(reached)
    while queue:
        t = queue.popleft()
        for s, _ in pre[t]:
            if s not in reached and (allowed is None or s in allowed):
                reached.add(s)
                queue.append(s)
    return reached


def _almost_sure_max(mdp: Mdp, pre, target: Set[int], candidates: Set[int]) -> Set[int]:
    """States from which some scheduler reaches target with probability 1."""
    keep = set(candidates)
    while True:
        reached = set(target)
        queue = deque(reached)
        while queue:
            t = queue.popleft()
            for s, a in pre[t]:
                if s in reached or s not in keep:
                    continue
                if all(succ in keep for succ, _ in mdp.actions[s][a].distribution):
                    reached.add(s)
                    queue.append(s)
        if reached == keep:
            return keep
        keep = reached


def _forced_positive(mdp: Mdp, pre, target: Set[int]) -> Set[int]:
    """States from which every scheduler reaches target with positive probability."""
    forced = set(target)
    remaining = [len(actions) for actions in mdp.actions]
    hit: Set[Tuple[int, int]] = set()
    queue = deque(forced)
    while queue:
        t = queue.popleft()
        for s, a in pre[t]:
            if s in forced or (s, a) in hit:
                continue
            hit.add((s, a))
            remaining[s] -= 1
            if remaining[s] == 0:
                forced.add(s)
                queue.append(s)
    return forced


def qualitative_precompute(mdp: Mdp, target: Iterable[int], opt: str) -> Tuple[Set[int], Set[int]]:
    """(zero, one): states whose optimal probability of reaching target is exactly 0 or exactly 1."""
    if opt not in ("max", "min"):
        raise QueryError(f"opt must be max or min, got {opt!r}")
    target = set(target)
    everything = set(range(len(mdp)))
    pre = mdp.predecessors()
    if opt == "max":
        zero = everything - _backward_closure(pre, target)
        one = _almost_sure_max(mdp, pre, target, everything - zero)
    else:
        zero = everything - _forced_positive(mdp, pre, target)
        escapes = _backward_closure(pre, zero, allowed=everything - target)
        one = everything - escapes
    return zero, one


# --- quantitative solution ---

@dataclass(frozen=True)
class StateValues:
    values: Tuple[Union[float, Fraction], ...]
    method: str
    iterations: int

    def __getitem__(self, state: int) -> Union[float, Fraction]:
        return self.values[state]

    def __len__(self) -> int:
        return len(self.values)


def _undecided_order(mdp: Mdp, undecided: List[int]) -> Optional[List[int]]:
    """Topological order of the undecided states, or None when they form a cycle."""
    members = set(undecided)
    graph = nx.DiGraph()
    graph.add_nodes_from(undecided)
    graph.add_edges_from((s, succ) for s in undecided for succ in mdp.successors(s) if succ in members)
    try:
        return list(nx.topological_sort(graph))
    except nx.NetworkXUnfeasible:
        return None


def _solve_exact(mdp: Mdp, order: List[int], zero: Set[int], one: Set[int], opt: str) -> List[Fraction]:
    choose = max if opt == "max" else min
    values = [Fraction(1) if s in one else Fraction(0) for s in range(len(mdp))]
    for s in reversed(order):
        values[s] = choose(sum((p * values[succ] for succ, p in action.distribution), Fraction(0))
                           for action in mdp.actions[s])
    return values


def _solve_iteratively(mdp: Mdp, undecided: List[int], one: Set[int], opt: str, epsilon: float,
                       max_iterations: int) -> Tuple[np.ndarray, int]:
    values = np.zeros(len(mdp))
    if one:
        values[list(one)] = 1.0
    if not undecided:
        return values, 0

    choice_of_entry, succ_of_entry, prob_of_entry, starts = [], [], [], []
    choice = 0
    for s in undecided:
        starts.append(choice)
        for action in mdp.actions[s]:
            for succ, p in action.distribution:
                choice_of_entry.append(choice)
                succ_of_entry.append(succ)
                prob_of_entry.append(float(p))
            choice += 1
    entry_choice = np.asarray(choice_of_entry, dtype=np.int64)
    entry_succ = np.asarray(succ_of_entry, dtype=np.int64)
    entry_prob = np.asarray(prob_of_entry, dtype=float)
    first_choice = np.asarray(starts, dtype=np.int64)
    rows = np.asarray(undecided, dtype=np.int64)
    reduce = np.maximum.reduceat if opt == "max" else np.minimum.reduceat
    change = float("inf")

    for iteration in range(1, max_iterations + 1):
        expected = np.bincount(entry_choice, weights=entry_prob * values[entry_succ], minlength=choice)
        updated = reduce(expected, first_choice)
        change = float(np.max(np.abs(updated - values[rows])))
        values = values.copy()
        values[rows] = updated
        if change < epsilon:
            return values, iteration
    raise ConvergenceError(f"value iteration did not converge within {max_iterations} iterations "
                           f"(last change {change:.3g})")


def optimal_reachability(mdp: Mdp, target: Iterable[int], opt: str, epsilon: Optional[float] = None,
                         method: str = "auto", max_iterations: Optional[int] = None) -> StateValues:
    """Optimal probability of eventually reaching target, for every state of mdp."""
    if method not in METHODS:
        raise QueryError(f"method must be one of {', '.join(METHODS)}, got {method!r}")
    epsilon = Config.get_epsilon() if epsilon is None else epsilon
    if not epsilon > 0:
        raise QueryError(f"epsilon must be positive, got {epsilon}")
    max_iterations = Config.get_max_iterations() if max_iterations is None else max_iterations

    zero, one = qualitative_precompute(mdp, target, opt)
    undecided = [s for s in range(len(mdp)) if s not in zero and s not in one]
    logger.debug(f"Qualitative precomputation: {len(zero)} zero, {len(one)} one, {len(undecided)} undecided")

    if method != VALUE_ITERATION:
        order = _undecided_order(mdp, undecided)
        if order is not None:
            return StateValues(tuple(_solve_exact(mdp, order, zero, one, opt)), TOPOLOGICAL_EXACT, 1)
        if method == "topological":
            raise ConvergenceError("undecided states form a cycle; the topological method does not apply")
    values, iterations = _solve_iteratively(mdp, undecided, one, opt, epsilon, max_iterations)
    return StateValues(tuple(float(v) for v in values), VALUE_ITERATION, iterations)


# --- checking ---

@dataclass(frozen=True)
class CheckResult:
    value: float
    granularity: int
    states: int
    iterations: int
    method: str
    wall_time: float
    exact: Optional[Fraction] = None

    def describe(self) -> str:
        text = f"g={self.granularity} value={self.value:.6f}"
        if self.exact is not None:
            text += f" exact={self.exact}"
        return text + f" states={self.states} method={self.method} time={self.wall_time:.2f}s"


def _check_proposition(m: Ptp, q: PctlQuery) -> None:
    unknown = sorted(q.prop.label_names() - set(m.labels))
    if unknown:
        raise QueryError(f"unknown label \"{unknown[0]}\" (model labels: {', '.join(sorted(m.labels)) or 'none'})")
    declared = {v.name for v in m.variables} | {LOCATION_VARIABLE}
    undeclared = sorted(q.prop.variables() - declared)
    if undeclared:
        raise QueryError(f"query refers to undeclared variable '{undeclared[0]}'")


def check(m: Ptp, q: PctlQuery, g: int, *, epsilon: Optional[float] = None, state_cap: Optional[int] = None,
          method: str = "auto", cap_slack: int = 0, max_iterations: Optional[int] = None) -> CheckResult:
    """Answer q on m at granularity g."""
    _check_proposition(m, q)
    started = time.perf_counter()
    mdp = digitize(m, g, q.bound, target=q.prop, state_cap=state_cap, cap_slack=cap_slack)
    solved = optimal_reachability(mdp, mdp.target, q.opt, epsilon, method, max_iterations)
    value = solved[mdp.initial]
    exact = value if isinstance(value, Fraction) else None
    result = CheckResult(value=min(max(float(value), 0.0), 1.0), granularity=g, states=len(mdp),
                         iterations=solved.iterations, method=solved.method,
                         wall_time=time.perf_counter() - started, exact=exact)
    logger.info(f"{q} at g={g}: {result.value:.6f} ({result.states} states, {result.method})")
    return result


def check_ladder_precondition(gs: Sequence[int]) -> None:
    if not gs:
        raise LadderError("granularity list is empty")
    for g in gs:
        if isinstance(g, bool) or not isinstance(g, int) or g < 1:
            raise LadderError(f"granularity must be a positive integer, got {g!r}")
    for smaller, larger in zip(gs, gs[1:]):
        if larger <= smaller:
            raise LadderError(f"granularities must be strictly increasing, got {smaller} then {larger}")
        if larger % smaller:
            raise LadderError(f"granularity {smaller} does not divide {larger}")


def ladder_is_monotone(results: Sequence[CheckResult], opt: str, tolerance: float = 1e-9) -> bool:
    """Pmax may only grow and Pmin only shrink as the grid refines."""
    for coarse, fine in zip(results, results[1:]):
        if opt == "max" and fine.value < coarse.value - tolerance:
            return False
        if opt == "min" and fine.value > coarse.value + tolerance:
            return False
    return True


def granularity_ladder(m: Ptp, q: PctlQuery, gs: Sequence[int], **options) -> List[CheckResult]:
    """One CheckResult per granularity; a non-monotone ladder is logged as an error."""
    check_ladder_precondition(gs)
    results = []
    for g in tqdm(gs, desc="Granularity ladder", unit="g", disable=not Config.show_progress()):
        results.append(check(m, q, g, **options))
    if not ladder_is_monotone(results, q.opt):
        logger.error(f"Non-monotone granularity ladder for {q}: "
                     + ", ".join(f"g={r.granularity}: {r.value:.9f}" for r in results))
    return results


@dataclass(frozen=True)
class DesignComparison:
    granularity: int
    before: CheckResult
    after: CheckResult

    @property
    def difference(self) -> float:
        return self.after.value - self.before.value


def compare(model_a: Ptp, model_b: Ptp, q: PctlQuery, gs: Sequence[int], **options) -> List[DesignComparison]:
    """Ladders of q on two designs side by side."""
    before = granularity_ladder(model_a, q, gs, **options)
    after = granularity_ladder(model_b, q, gs, **options)
    return [DesignComparison(a.granularity, a, b) for a, b in zip(before, after)]
