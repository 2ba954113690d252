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

"""Probabilistic timed programs: locations, clocks, zones, integer state variables and
probabilistic transitions, with well-formedness checks and zone evaluation.

Model file (JSON)::

    {"locations": ["recv", "proc", "done"], "initial": "recv", "clocks": ["x"],
     "invariant": {"proc": [{"left": "x", "rel": "<", "bound": 16}]},
     "variables": [{"name": "tries", "lo": 0, "hi": 3}], "init": {"tries": 0},
     "transitions": [{"source": "proc", "guard": {"op": "<", "left": "tries", "right": 3},
                      "enabling": [{"left": "x", "rel": ">", "bound": 12}],
                      "outcomes": [{"p": "91/100", "target": "done"},
                                   {"p": "9/100", "target": "recv", "resets": ["x"],
                                    "update": {"tries": {"const": 1, "terms": {"tries": 1}}}}]}],
     "labels": {"Success": ["done"]}}
"""

import json
import logging
import math
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, FrozenSet, List, Mapping, Optional, Tuple, Union

from .errors import Diagnostic, ModelError, errors_only

logger = logging.getLogger(__name__)

# Name under which query propositions may refer to the location index
LOCATION_VARIABLE = "s"

CLOCK_RELATIONS = ("<", "<=", ">", ">=")
COMPARISONS: Dict[str, Callable] = {
    "=": operator.eq,
    "!=": operator.ne,
    "<": operator.lt,
    "<=": operator.le,
    ">": operator.gt,
    ">=": operator.ge,
}


# --- clock zones ---

@dataclass(frozen=True)
class ClockConstraint:
    """left - right REL bound, where right=None stands for the constant-zero clock."""
    left: str
    rel: str
    bound: int
    right: Optional[str] = None

    def clocks(self) -> Tuple[str, ...]:
        return (self.left,) if self.right is None else (self.left, self.right)

    def holds(self, valuation: Mapping[str, Union[int, float, Fraction]]) -> bool:
        try:
            difference = valuation[self.left] - (0 if self.right is None else valuation[self.right])
        except KeyError as e:
            raise ModelError(f"clock {e.args[0]} has no value in the valuation")
        return COMPARISONS[self.rel](difference, self.bound)

    def __str__(self) -> str:
        left = self.left if self.right is None else f"{self.left}-{self.right}"
        return f"{left}{self.rel}{self.bound}"


@dataclass(frozen=True)
class Zone:
    constraints: Tuple[ClockConstraint, ...] = ()

    def __and__(self, other: "Zone") -> "Zone":
        return Zone(self.constraints + other.constraints)

    def clocks(self) -> FrozenSet[str]:
        return frozenset(c for constraint in self.constraints for c in constraint.clocks())

    def __str__(self) -> str:
        return " & ".join(str(c) for c in self.constraints) or "true"


UNIVERSAL = Zone()


def zone_satisfied(z: Zone, t: Mapping[str, Union[int, float, Fraction]]) -> bool:
    return all(constraint.holds(t) for constraint in z.constraints)


def _bound_sum(a: Tuple[float, int], b: Tuple[float, int]) -> Tuple[float, int]:
    # bounds are (value, 0 for strict / 1 for non-strict); the sum is strict if either is
    return (a[0] + b[0], min(a[1], b[1]))


def zone_nonempty(z: Zone) -> bool:
    """True iff some nonnegative clock valuation satisfies z.

    Builds the difference-bound matrix over the zone's clocks plus the zero clock,
    tightens it with Floyd-Warshall, and looks for a negative cycle.
    """
    clocks = sorted(z.clocks())
    index = {clock: position + 1 for position, clock in enumerate(clocks)}
    size = len(clocks) + 1
    unbounded = (math.inf, 0)
    # matrix[i][j] bounds x_i - x_j
    matrix = [[(0, 1) if i == j else unbounded for j in range(size)] for i in range(size)]
    for i in range(1, size):
        matrix[0][i] = (0, 1)  # 0 - x_i <= 0

    def tighten(i: int, j: int, bound: Tuple[float, int]):
        if bound < matrix[i][j]:
            matrix[i][j] = bound

    for constraint in z.constraints:
        i = index[constraint.left]
        j = 0 if constraint.right is None else index[constraint.right]
        if constraint.rel in ("<", "<="):
            tighten(i, j, (constraint.bound, 0 if constraint.rel == "<" else 1))
        else:
            tighten(j, i, (-constraint.bound, 0 if constraint.rel == ">" else 1))

    for k in range(size):
        for i in range(size):
            for j in range(size):
                via = _bound_sum(matrix[i][k], matrix[k][j])
                if via < matrix[i][j]:
                    matrix[i][j] = via
    return all(matrix[i][i] >= (0, 1) for i in range(size))


# --- assertions over integer variables ---

Operand = Union[str, int]


class Assertion:
    def evaluate(self, env: Mapping[str, int], labels: FrozenSet[str] = frozenset()) -> bool:
        raise NotImplementedError

    def variables(self) -> FrozenSet[str]:
        return frozenset()

    def label_names(self) -> FrozenSet[str]:
        return frozenset()


@dataclass(frozen=True)
class TrueAssertion(Assertion):
    def evaluate(self, env, labels=frozenset()):
        return True

    def __str__(self):
        return "true"


@dataclass(frozen=True)
class Comparison(Assertion):
    left: Operand
    op: str
    right: Operand

    def evaluate(self, env, labels=frozenset()):
        def value(operand):
            if isinstance(operand, int):
                return operand
            try:
                return env[operand]
            except KeyError:
                raise ModelError(f"unknown variable '{operand}'")
        return COMPARISONS[self.op](value(self.left), value(self.right))

    def variables(self):
        return frozenset(x for x in (self.left, self.right) if isinstance(x, str))

    def __str__(self):
        return f"{self.left}{self.op}{self.right}"


@dataclass(frozen=True)
class Conjunction(Assertion):
    args: Tuple[Assertion, ...]

    def evaluate(self, env, labels=frozenset()):
        return all(arg.evaluate(env, labels) for arg in self.args)

    def variables(self):
        return frozenset().union(*(arg.variables() for arg in self.args))

    def label_names(self):
        return frozenset().union(*(arg.label_names() for arg in self.args))

    def __str__(self):
        return " & ".join(_wrapped(arg) for arg in self.args)


@dataclass(frozen=True)
class Disjunction(Assertion):
    args: Tuple[Assertion, ...]

    def evaluate(self, env, labels=frozenset()):
        return any(arg.evaluate(env, labels) for arg in self.args)

    def variables(self):
        return frozenset().union(*(arg.variables() for arg in self.args))

    def label_names(self):
        return frozenset().union(*(arg.label_names() for arg in self.args))

    def __str__(self):
        return " | ".join(_wrapped(arg) for arg in self.args)


@dataclass(frozen=True)
class Negation(Assertion):
    arg: Assertion

    def evaluate(self, env, labels=frozenset()):
        return not self.arg.evaluate(env, labels)

    def variables(self):
        return self.arg.variables()

    def label_names(self):
        return self.arg.label_names()

    def __str__(self):
        return f"!{_wrapped(self.arg)}"


@dataclass(frozen=True)
class LabelAtom(Assertion):
    """Location-label proposition; only meaningful in queries."""
    name: str

    def evaluate(self, env, labels=frozenset()):
        return self.name in labels

    def label_names(self):
        return frozenset({self.name})

    def __str__(self):
        return f'"{self.name}"'


def _wrapped(assertion: Assertion) -> str:
    if isinstance(assertion, (Conjunction, Disjunction)):
        return f"({assertion})"
    return str(assertion)


TRUE = TrueAssertion()


# --- updates ---

@dataclass(frozen=True)
class AffineExpr:
    const: int = 0
    terms: Tuple[Tuple[str, int], ...] = ()

    def evaluate(self, env: Mapping[str, int]) -> int:
        try:
            return self.const + sum(coefficient * env[name] for name, coefficient in self.terms)
        except KeyError as e:
            raise ModelError(f"unknown variable '{e.args[0]}' in update")

    def variables(self) -> FrozenSet[str]:
        return frozenset(name for name, _ in self.terms)


UpdateValue = Union[int, AffineExpr]


@dataclass(frozen=True)
class Outcome:
    weight: Fraction
    target: str
    resets: FrozenSet[str] = frozenset()
    update: Tuple[Tuple[str, UpdateValue], ...] = ()


@dataclass(frozen=True)
class Transition:
    source: str
    outcomes: Tuple[Outcome, ...]
    guard: Assertion = TRUE
    enabling: Zone = UNIVERSAL


@dataclass(frozen=True)
class Variable:
    name: str
    lo: int
    hi: int


@dataclass(frozen=True)
class Ptp:
    locations: Tuple[str, ...]
    initial: str
    clocks: Tuple[str, ...] = ()
    invariant: Mapping[str, Zone] = field(default_factory=dict)
    variables: Tuple[Variable, ...] = ()
    initial_valuation: Mapping[str, int] = field(default_factory=dict)
    transitions: Tuple[Transition, ...] = ()
    labels: Mapping[str, FrozenSet[str]] = field(default_factory=dict)

    @cached_property
    def location_index(self) -> Dict[str, int]:
        return {name: position for position, name in enumerate(self.locations)}

    def invariant_of(self, location: str) -> Zone:
        return self.invariant.get(location, UNIVERSAL)

    def variable(self, name: str) -> Optional[Variable]:
        for v in self.variables:
            if v.name == name:
                return v
        return None

    def initial_values(self) -> Dict[str, int]:
        return {v.name: self.initial_valuation.get(v.name, v.lo) for v in self.variables}

    def labels_of(self, location: str) -> FrozenSet[str]:
        return frozenset(label for label, locations in self.labels.items() if location in locations)


@dataclass(frozen=True)
class PtpState:
    location: str
    valuation: Mapping[str, int]
    clocks: Mapping[str, Fraction]

    def is_admissible(self, m: Ptp) -> bool:
        return zone_satisfied(m.invariant_of(self.location), self.clocks)


def initial_state(m: Ptp) -> PtpState:
    return PtpState(m.initial, m.initial_values(), {clock: Fraction(0) for clock in m.clocks})


# --- validation ---

def _zone_diagnostics(zone: Zone, clocks: FrozenSet[str], where: str) -> List[Diagnostic]:
    found = []
    for constraint in zone.constraints:
        for clock in constraint.clocks():
            if clock not in clocks:
                found.append(Diagnostic("UnknownClock", f"unknown clock '{clock}'", where))
        if constraint.rel not in CLOCK_RELATIONS:
            found.append(Diagnostic("InvalidRelation", f"clock relation '{constraint.rel}' is not one of "
                                    f"{', '.join(CLOCK_RELATIONS)}", where))
        if not isinstance(constraint.bound, int) or isinstance(constraint.bound, bool):
            found.append(Diagnostic("NonIntegerBound", f"bound {constraint.bound!r} is not an integer", where))
        elif constraint.right is None and constraint.bound < 0:
            found.append(Diagnostic("NegativeBound", f"single-clock bound {constraint} is negative", where))
    return found


def validate_ptp(m: Ptp) -> List[Diagnostic]:
    """Well-formedness of every component; errors and lints, each with an element path."""
    found: List[Diagnostic] = []
    locations = set(m.locations)
    clocks = frozenset(m.clocks)
    variables = {v.name: v for v in m.variables}

    if len(locations) != len(m.locations):
        found.append(Diagnostic("DuplicateLocation", "location names must be unique", "locations"))
    if len(clocks) != len(m.clocks):
        found.append(Diagnostic("DuplicateClock", "clock names must be unique", "clocks"))
    if len(variables) != len(m.variables):
        found.append(Diagnostic("DuplicateVariable", "variable names must be unique", "variables"))
    for name in clocks & set(variables):
        found.append(Diagnostic("NameClash", f"'{name}' is both a clock and a variable", f"variables.{name}"))
    if m.initial not in locations:
        found.append(Diagnostic("UnknownLocation", f"initial location '{m.initial}' does not exist", "initial"))

    for v in m.variables:
        if v.lo > v.hi:
            found.append(Diagnostic("EmptyRange", f"range {v.lo}..{v.hi} is empty", f"variables.{v.name}"))
    for name, value in m.initial_valuation.items():
        v = variables.get(name)
        if v is None:
            found.append(Diagnostic("UnknownVariable", f"initial value for undeclared '{name}'", f"init.{name}"))
        elif not v.lo <= value <= v.hi:
            found.append(Diagnostic("InitialOutOfRange", f"{name}={value} outside {v.lo}..{v.hi}", f"init.{name}"))

    for location, zone in m.invariant.items():
        where = f"invariant.{location}"
        if location not in locations:
            found.append(Diagnostic("UnknownLocation", f"invariant for unknown location '{location}'", where))
        found.extend(_zone_diagnostics(zone, clocks, where))

    for position, transition in enumerate(m.transitions):
        where = f"transitions[{position}]"
        if transition.source not in locations:
            found.append(Diagnostic("UnknownLocation", f"unknown source '{transition.source}'", f"{where}.source"))
        for name in sorted(transition.guard.variables() - set(variables)):
            found.append(Diagnostic("UnknownVariable", f"guard refers to undeclared variable '{name}'",
                                    f"{where}.guard"))
        if transition.guard.label_names():
            found.append(Diagnostic("LabelInGuard", "guards may not refer to location labels", f"{where}.guard"))
        found.extend(_zone_diagnostics(transition.enabling, clocks, f"{where}.enabling"))

        if not transition.outcomes:
            found.append(Diagnostic("EmptyOutcomes", "transition has no outcomes", f"{where}.outcomes"))
            continue
        total = sum((o.weight for o in transition.outcomes), Fraction(0))
        if total != 1:
            shown = float(total) if total.denominator in (1, 2, 4, 5, 8, 10, 20, 25, 50, 100) else total
            found.append(Diagnostic("WeightsSumTo", f"outcome weights sum to {shown}, not 1",
                                    f"{where}.outcomes"))
        for k, outcome in enumerate(transition.outcomes):
            owhere = f"{where}.outcomes[{k}]"
            if not 0 < outcome.weight <= 1:
                found.append(Diagnostic("NonPositiveWeight", f"weight {outcome.weight} outside (0,1]", owhere))
            if outcome.target not in locations:
                found.append(Diagnostic("UnknownLocation", f"unknown target '{outcome.target}'", owhere))
            for clock in sorted(outcome.resets - clocks):
                found.append(Diagnostic("UnknownClock", f"reset of unknown clock '{clock}'", owhere))
            for name, value in outcome.update:
                v = variables.get(name)
                if v is None:
                    found.append(Diagnostic("UnknownVariable", f"update of undeclared variable '{name}'", owhere))
                    continue
                if isinstance(value, AffineExpr):
                    for ref in sorted(value.variables() - set(variables)):
                        found.append(Diagnostic("UnknownVariable", f"update refers to undeclared '{ref}'", owhere))
                elif not v.lo <= value <= v.hi:
                    found.append(Diagnostic("UpdateOutOfRange", f"{name}:={value} outside {v.lo}..{v.hi}", owhere))
            if outcome.target in locations and outcome.resets <= clocks:
                after_reset = m.invariant_of(outcome.target) & Zone(tuple(
                    ClockConstraint(clock, "<=", 0) for clock in sorted(outcome.resets)))
                if not _zone_diagnostics(after_reset, clocks, owhere) and not zone_nonempty(after_reset):
                    found.append(Diagnostic("OutcomeAlwaysDisabled",
                                            f"target '{outcome.target}' invariant can never hold after the reset",
                                            owhere, severity="warning"))

    for label, members in m.labels.items():
        for location in sorted(members - locations):
            found.append(Diagnostic("UnknownLocation", f"label '{label}' names unknown location '{location}'",
                                    f"labels.{label}"))

    if m.initial in locations and not any(d.code in ("UnknownClock", "NegativeBound") for d in found):
        start = initial_state(m)
        if not start.is_admissible(m):
            found.append(Diagnostic("InitialInvariantViolated",
                                    "the all-zero clock valuation violates the initial invariant", "initial"))
    return found


def clock_ceilings(m: Ptp) -> Dict[str, int]:
    """Largest absolute constant each clock is compared against (0 if never compared)."""
    ceilings = {clock: 0 for clock in m.clocks}
    zones = list(m.invariant.values()) + [t.enabling for t in m.transitions]
    for zone in zones:
        for constraint in zone.constraints:
            for clock in constraint.clocks():
                if clock in ceilings:
                    ceilings[clock] = max(ceilings[clock], abs(constraint.bound))
    return ceilings


def require_valid(m: Ptp) -> None:
    problems = errors_only(validate_ptp(m))
    if problems:
        for extra in problems[1:]:
            logger.debug(f"Additional model diagnostic: {extra}")
        raise ModelError(f"model is not well-formed: {problems[0]}")


# --- JSON model file ---

def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelError(f"{where}: expected an integer, got {value!r}")
    return value


def _weight(value, where: str) -> Fraction:
    if isinstance(value, bool) or not isinstance(value, (int, float, str)):
        raise ModelError(f"{where}: expected a probability, got {value!r}")
    try:
        return Fraction(repr(value)) if isinstance(value, float) else Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise ModelError(f"{where}: malformed probability {value!r}")


def assertion_from_json(data, where: str) -> Assertion:
    if data is True or data is None:
        return TRUE
    if not isinstance(data, dict) or "op" not in data:
        raise ModelError(f"{where}: expected an assertion object with 'op'")
    op = data["op"]
    if op == "true":
        return TRUE
    if op in ("and", "or"):
        args = tuple(assertion_from_json(arg, f"{where}.args[{k}]") for k, arg in enumerate(data.get("args", [])))
        return Conjunction(args) if op == "and" else Disjunction(args)
    if op == "not":
        return Negation(assertion_from_json(data.get("arg"), f"{where}.arg"))
    if op == "label":
        return LabelAtom(str(data["name"]))
    if op in COMPARISONS:
        operands = []
        for side in ("left", "right"):
            value = data.get(side)
            if isinstance(value, bool) or not isinstance(value, (str, int)):
                raise ModelError(f"{where}.{side}: expected a variable name or an integer")
            operands.append(value)
        return Comparison(operands[0], op, operands[1])
    raise ModelError(f"{where}: unknown assertion operator '{op}'")


def assertion_to_json(assertion: Assertion):
    if isinstance(assertion, TrueAssertion):
        return {"op": "true"}
    if isinstance(assertion, Comparison):
        return {"op": assertion.op, "left": assertion.left, "right": assertion.right}
    if isinstance(assertion, Conjunction):
        return {"op": "and", "args": [assertion_to_json(a) for a in assertion.args]}
    if isinstance(assertion, Disjunction):
        return {"op": "or", "args": [assertion_to_json(a) for a in assertion.args]}
    if isinstance(assertion, Negation):
        return {"op": "not", "arg": assertion_to_json(assertion.arg)}
    if isinstance(assertion, LabelAtom):
        return {"op": "label", "name": assertion.name}
    raise ModelError(f"cannot serialize assertion {assertion!r}")


def zone_from_json(data, where: str) -> Zone:
    if data is None:
        return UNIVERSAL
    if not isinstance(data, list):
        raise ModelError(f"{where}: a zone is a list of clock constraints")
    constraints = []
    for k, raw in enumerate(data):
        cwhere = f"{where}[{k}]"
        if not isinstance(raw, dict) or "left" not in raw or "rel" not in raw or "bound" not in raw:
            raise ModelError(f"{cwhere}: expected {{left, rel, bound[, right]}}")
        constraints.append(ClockConstraint(str(raw["left"]), str(raw["rel"]), _integer(raw["bound"], cwhere),
                                           raw.get("right")))
    return Zone(tuple(constraints))


def zone_to_json(zone: Zone) -> list:
    result = []
    for c in zone.constraints:
        entry = {"left": c.left, "rel": c.rel, "bound": c.bound}
        if c.right is not None:
            entry["right"] = c.right
        result.append(entry)
    return result


def _update_from_json(data, where: str) -> Tuple[Tuple[str, UpdateValue], ...]:
    if not data:
        return ()
    if not isinstance(data, dict):
        raise ModelError(f"{where}: update must map variables to values")
    result = []
    for name, value in data.items():
        if isinstance(value, dict):
            terms = tuple((ref, _integer(c, f"{where}.{name}.terms.{ref}"))
                          for ref, c in sorted(value.get("terms", {}).items()))
            result.append((name, AffineExpr(_integer(value.get("const", 0), f"{where}.{name}.const"), terms)))
        else:
            result.append((name, _integer(value, f"{where}.{name}")))
    return tuple(result)


def _update_to_json(update) -> dict:
    result = {}
    for name, value in update:
        if isinstance(value, AffineExpr):
            result[name] = {"const": value.const, "terms": dict(value.terms)}
        else:
            result[name] = value
    return result


def weight_to_json(weight: Fraction):
    """Shortest exact decimal when one exists, otherwise "num/den"."""
    denominator = weight.denominator
    while denominator % 2 == 0:
        denominator //= 2
    while denominator % 5 == 0:
        denominator //= 5
    if denominator != 1:
        return f"{weight.numerator}/{weight.denominator}"
    if weight.denominator == 1:
        return int(weight)
    return float(weight)


def ptp_from_dict(data: dict) -> Ptp:
    if not isinstance(data, dict):
        raise ModelError("model must be a JSON object")
    try:
        locations = tuple(str(name) for name in data["locations"])
        initial = str(data.get("initial", locations[0] if locations else ""))
    except (KeyError, TypeError):
        raise ModelError("model needs a 'locations' list")
    variables = []
    for k, raw in enumerate(data.get("variables", [])):
        where = f"variables[{k}]"
        if not isinstance(raw, dict) or "name" not in raw or "lo" not in raw or "hi" not in raw:
            raise ModelError(f"{where}: variables need name, lo and hi (ranges are mandatory)")
        variables.append(Variable(str(raw["name"]), _integer(raw["lo"], f"{where}.lo"),
                                  _integer(raw["hi"], f"{where}.hi")))
    transitions = []
    for k, raw in enumerate(data.get("transitions", [])):
        where = f"transitions[{k}]"
        if not isinstance(raw, dict) or "source" not in raw:
            raise ModelError(f"{where}: transitions need a source")
        outcomes = []
        for j, out in enumerate(raw.get("outcomes", [])):
            owhere = f"{where}.outcomes[{j}]"
            if not isinstance(out, dict) or "target" not in out:
                raise ModelError(f"{owhere}: outcomes need a target")
            outcomes.append(Outcome(_weight(out.get("p", 1), f"{owhere}.p"), str(out["target"]),
                                    frozenset(out.get("resets", [])),
                                    _update_from_json(out.get("update"), f"{owhere}.update")))
        transitions.append(Transition(str(raw["source"]), tuple(outcomes),
                                      assertion_from_json(raw.get("guard"), f"{where}.guard"),
                                      zone_from_json(raw.get("enabling"), f"{where}.enabling")))
    return Ptp(
        locations=locations,
        initial=initial,
        clocks=tuple(str(c) for c in data.get("clocks", [])),
        invariant={str(loc): zone_from_json(z, f"invariant.{loc}") for loc, z in data.get("invariant", {}).items()},
        variables=tuple(variables),
        initial_valuation={str(k): _integer(v, f"init.{k}") for k, v in data.get("init", {}).items()},
        transitions=tuple(transitions),
        labels={str(label): frozenset(members) for label, members in data.get("labels", {}).items()},
    )


def ptp_to_dict(m: Ptp) -> dict:
    return {
        "locations": list(m.locations),
        "initial": m.initial,
        "clocks": list(m.clocks),
        "invariant": {loc: zone_to_json(m.invariant[loc]) for loc in m.locations
                      if loc in m.invariant and m.invariant[loc].constraints},
        "variables": [{"name": v.name, "lo": v.lo, "hi": v.hi} for v in m.variables],
        "init": dict(m.initial_valuation),
        "transitions": [
            {
                "source": t.source,
                "guard": assertion_to_json(t.guard),
                "enabling": zone_to_json(t.enabling),
                "outcomes": [
                    {"p": weight_to_json(o.weight), "target": o.target, "resets": sorted(o.resets),
                     "update": _update_to_json(o.update)}
                    for o in t.outcomes
                ],
            }
            for t in m.transitions
        ],
        "labels": {label: sorted(members, key=lambda loc: m.location_index.get(loc, -1))
                   for label, members in sorted(m.labels.items())},
    }


def load_ptp(document: str) -> Ptp:
    """Decode and validate a JSON model file."""
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise ModelError(f"model file is not valid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    m = ptp_from_dict(data)
    require_valid(m)
    return m


def dump_ptp(m: Ptp) -> str:
    return json.dumps(ptp_to_dict(m), indent=2, ensure_ascii=False) + "\n"
