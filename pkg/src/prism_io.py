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

"""Reading and writing the `pta` subset of the PRISM modelling language.

One module, one integer variable encoding the location (the first one declared),
clocks, guarded probabilistic commands, an optional invariant block and location
labels. Anything else is rejected with UnsupportedConstruct.
"""

import logging
import re
from decimal import Decimal
from fractions import Fraction
from typing import Dict, List, NamedTuple, Optional, Set, Tuple

from lark import Lark, Token, Transformer, v_args
from lark.exceptions import UnexpectedCharacters, UnexpectedEOF, UnexpectedInput, UnexpectedToken

from .errors import ModelError, ParseError, UnsupportedConstruct
from .ptp import (TRUE, AffineExpr, Assertion, ClockConstraint, Comparison, Conjunction, Disjunction, Negation,
                  Outcome, Ptp, TrueAssertion, Transition, Variable, Zone, require_valid)

logger = logging.getLogger(__name__)

LOCATION_NAME = "s"
MODULE_NAME = "M"

PRISM_GRAMMAR = r"""
    start: "pta" module label*

    module: "module" NAME decl* command* invariant? "endmodule"
    ?decl: NAME ":" "[" SIGNED_INT ".." SIGNED_INT "]" ("init" SIGNED_INT)? ";" -> int_decl
         | NAME ":" "clock" ";" -> clock_decl
    command: "[" "]" expr "->" branch ("+" branch)* ";"
    branch: (PROB ":")? assign ("&" assign)*
    assign: "(" NAME "'" EQ SIGNED_INT ")"
    invariant: "invariant" expr "endinvariant"
    label: "label" ESCAPED_STRING EQ expr ";"

    ?expr: disj
         | disj "=>" disj -> implies
    ?disj: conj
         | disj "|" conj -> any_of
    ?conj: unary
         | conj "&" unary -> all_of
    ?unary: atom
          | "!" unary -> negate
    ?atom: operand REL operand -> compare
         | operand EQ operand -> compare
         | "(" expr ")"
         | "true" -> true
    ?operand: NAME
            | SIGNED_INT
            | NAME "-" NAME -> difference

    REL: "<=" | ">=" | "!=" | "<" | ">"
    EQ: "="
    PROB: /\d+\/\d+|\d*\.\d+|\d+/

    %import common.CNAME -> NAME
    %import common.SIGNED_INT
    %import common.ESCAPED_STRING
    %import common.WS
    %ignore WS
    %ignore /\/\/[^\n]*/
"""

_MODEL_TYPE = re.compile(r"\A(?:\s|//[^\n]*\n)*(\w+)")
_OTHER_MODEL_TYPES = {"dtmc", "ctmc", "mdp", "probabilistic", "stochastic", "nondeterministic", "pomdp", "popta",
                      "smg", "csg"}
_UNSUPPORTED_BLOCKS = re.compile(r"^\s*(const|formula|rewards|global|system)\b", re.MULTILINE)
# `init ... endinit`, not the tail of a declaration continued on the next line
_INIT_BLOCK = re.compile(r"^\s*(init)\b(?!\s*[-+]?\d+\s*;).*?^\s*endinit\b", re.MULTILINE | re.DOTALL)
_MODULE = re.compile(r"^\s*module\b", re.MULTILINE)
_SYNC_LABEL = re.compile(r"\[\s*\w+\s*\]")


class _Difference(NamedTuple):
    left: str
    right: str


class _Implication(NamedTuple):
    premise: object
    conclusion: object


class _IntDecl(NamedTuple):
    name: str
    lo: int
    hi: int
    init: Optional[int]


class _ClockDecl(NamedTuple):
    name: str


class _Command(NamedTuple):
    guard: object
    branches: tuple


class _Invariant(NamedTuple):
    expr: object


class _Branch(NamedTuple):
    weight: Fraction
    assignments: Tuple[Tuple[str, int], ...]


@v_args(inline=True)
class _ProgramBuilder(Transformer):
    def start(self, module, *labels):
        return module, labels

    def module(self, name, *items):
        return items

    def int_decl(self, name, lo, hi, init=None):
        return _IntDecl(str(name), int(lo), int(hi), None if init is None else int(init))

    def clock_decl(self, name):
        return _ClockDecl(str(name))

    def command(self, guard, *branches):
        return _Command(guard, branches)

    def branch(self, *items):
        weight = Fraction(1)
        if items and isinstance(items[0], Token) and items[0].type == "PROB":
            weight = Fraction(str(items[0]))
            items = items[1:]
        return _Branch(weight, tuple(items))

    def assign(self, name, _eq, value):
        return str(name), int(value)

    def invariant(self, expr):
        return _Invariant(expr)

    def label(self, name, _eq, expr):
        return str(name)[1:-1], expr

    def implies(self, premise, conclusion):
        return _Implication(premise, conclusion)

    def any_of(self, left, right):
        return Disjunction(_flatten(Disjunction, left) + (right,))

    def all_of(self, left, right):
        return Conjunction(_flatten(Conjunction, left) + (right,))

    def negate(self, arg):
        return Negation(arg)

    def compare(self, left, op, right):
        return Comparison(_operand(left), str(op), _operand(right))

    def difference(self, left, right):
        return _Difference(str(left), str(right))

    def true(self):
        return TRUE


def _flatten(kind, node) -> tuple:
    return node.args if isinstance(node, kind) else (node,)


def _operand(item):
    if isinstance(item, _Difference):
        return item
    return int(item) if item.type == "SIGNED_INT" else str(item)


_prism_parser = Lark(PRISM_GRAMMAR, parser="lalr", lexer="contextual", maybe_placeholders=False)


def _conjuncts(expr) -> tuple:
    if isinstance(expr, TrueAssertion):
        return ()
    return expr.args if isinstance(expr, Conjunction) else (expr,)


_FLIPPED = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "=": "=", "!=": "!="}


class _ModelBuilder:
    def __init__(self, declarations, labels):
        integers = [d for d in declarations if isinstance(d, _IntDecl)]
        self.clocks = [d.name for d in declarations if isinstance(d, _ClockDecl)]
        if not integers:
            raise UnsupportedConstruct("the module needs an integer variable encoding the location")
        self.location = integers[0]
        if self.location.lo > self.location.hi:
            raise ModelError(f"location variable range {self.location.lo}..{self.location.hi} is empty")
        self.variables = integers[1:]
        self.locations = tuple(f"{self.location.name}{value}"
                               for value in range(self.location.lo, self.location.hi + 1))
        self.labels = labels

    def location_of(self, value: int, where: str) -> str:
        if not self.location.lo <= value <= self.location.hi:
            raise ModelError(f"{where}: {self.location.name}={value} outside "
                             f"{self.location.lo}..{self.location.hi}")
        return self.locations[value - self.location.lo]

    def mentions(self, node, names: Set[str]) -> bool:
        if isinstance(node, Comparison):
            operands = [node.left, node.right]
            flat = set()
            for operand in operands:
                if isinstance(operand, _Difference):
                    flat.update(operand)
                elif isinstance(operand, str):
                    flat.add(operand)
            return bool(flat & names)
        if isinstance(node, (Conjunction, Disjunction)):
            return any(self.mentions(arg, names) for arg in node.args)
        if isinstance(node, Negation):
            return self.mentions(node.arg, names)
        if isinstance(node, _Implication):
            return self.mentions(node.premise, names) or self.mentions(node.conclusion, names)
        return False

    def location_test(self, node) -> Optional[int]:
        """k when node is `s=k` (either orientation)."""
        if isinstance(node, Comparison) and node.op == "=":
            if node.left == self.location.name and isinstance(node.right, int):
                return node.right
            if node.right == self.location.name and isinstance(node.left, int):
                return node.left
        return None

    def clock_constraints(self, node, where: str) -> List[ClockConstraint]:
        if not isinstance(node, Comparison) or node.op == "!=":
            raise UnsupportedConstruct(f"{where}: clock conditions must be conjunctions of comparisons")
        left, op, right = node.left, node.op, node.right
        if isinstance(left, int):
            left, op, right = right, _FLIPPED[op], left
        if not isinstance(right, int):
            raise UnsupportedConstruct(f"{where}: clocks may only be compared against integer constants")
        if isinstance(left, _Difference):
            clock, other = left.left, left.right
        else:
            clock, other = left, None
        for name in (clock, other):
            if name is not None and name not in self.clocks:
                raise UnsupportedConstruct(f"{where}: '{name}' is not a clock")
        if op == "=":
            return [ClockConstraint(clock, "<=", right, other), ClockConstraint(clock, ">=", right, other)]
        return [ClockConstraint(clock, op, right, other)]

    def zone(self, node, where: str) -> Zone:
        constraints = []
        for part in _conjuncts(node):
            constraints.extend(self.clock_constraints(part, where))
        return Zone(tuple(constraints))

    def command(self, number: int, command: _Command) -> Transition:
        where = f"command {number}"
        source = None
        guard_parts, zone_parts = [], []
        clock_names = set(self.clocks)
        for part in _conjuncts(command.guard):
            k = self.location_test(part)
            if k is not None and source is None:
                source = self.location_of(k, where)
            elif self.mentions(part, {self.location.name}):
                raise UnsupportedConstruct(f"{where}: the guard must test the location exactly once, as "
                                           f"{self.location.name}=k")
            elif self.mentions(part, clock_names):
                zone_parts.extend(self.clock_constraints(part, where))
            elif isinstance(part, _Implication) or self.has_difference(part):
                raise UnsupportedConstruct(f"{where}: unsupported guard expression")
            else:
                guard_parts.append(part)
        if source is None:
            raise UnsupportedConstruct(f"{where}: the guard must test the location as {self.location.name}=k")
        guard: Assertion = TRUE
        if len(guard_parts) == 1:
            guard = guard_parts[0]
        elif guard_parts:
            guard = Conjunction(tuple(guard_parts))

        outcomes = []
        for branch in command.branches:
            target = source
            resets, update = set(), []
            for name, value in branch.assignments:
                if name == self.location.name:
                    target = self.location_of(value, where)
                elif name in clock_names:
                    if value != 0:
                        raise UnsupportedConstruct(f"{where}: clocks can only be reset to 0")
                    resets.add(name)
                else:
                    update.append((name, value))
            outcomes.append(Outcome(branch.weight, target, frozenset(resets), tuple(update)))
        return Transition(source, tuple(outcomes), guard, Zone(tuple(zone_parts)))

    def has_difference(self, node) -> bool:
        if isinstance(node, Comparison):
            return isinstance(node.left, _Difference) or isinstance(node.right, _Difference)
        if isinstance(node, (Conjunction, Disjunction)):
            return any(self.has_difference(arg) for arg in node.args)
        if isinstance(node, Negation):
            return self.has_difference(node.arg)
        return False

    def invariant(self, expr) -> Dict[str, Zone]:
        invariant: Dict[str, Zone] = {}
        for part in _conjuncts(expr):
            if not isinstance(part, _Implication):
                raise UnsupportedConstruct(f"invariant: expected ({self.location.name}=k => <clock conditions>)")
            k = self.location_test(part.premise)
            if k is None:
                raise UnsupportedConstruct(f"invariant: the premise must be {self.location.name}=k")
            location = self.location_of(k, "invariant")
            zone = self.zone(part.conclusion, "invariant")
            invariant[location] = invariant[location] & zone if location in invariant else zone
        return invariant

    def label(self, name: str, expr) -> frozenset:
        where = f"label \"{name}\""
        members = set()
        tests = expr.args if isinstance(expr, Disjunction) else (expr,)
        for test in tests:
            k = self.location_test(test)
            if k is None:
                raise UnsupportedConstruct(f"{where}: labels must be disjunctions of {self.location.name}=k")
            members.add(self.location_of(k, where))
        return frozenset(members)

    def build(self, commands, invariant_expr) -> Ptp:
        init = self.location.init if self.location.init is not None else self.location.lo
        initial = self.location_of(init, "location variable init")
        labels: Dict[str, frozenset] = {}
        for name, expr in self.labels:
            if name in labels:
                raise ModelError(f"label \"{name}\" is defined twice")
            labels[name] = self.label(name, expr)
        return Ptp(
            locations=self.locations,
            initial=initial,
            clocks=tuple(self.clocks),
            invariant=self.invariant(invariant_expr) if invariant_expr is not None else {},
            variables=tuple(Variable(d.name, d.lo, d.hi) for d in self.variables),
            initial_valuation={d.name: d.init for d in self.variables if d.init is not None},
            transitions=tuple(self.command(k, c) for k, c in enumerate(commands, start=1)),
            labels=labels,
        )


def _precheck(text: str) -> None:
    found = _MODEL_TYPE.match(text)
    if found and found.group(1) != "pta":
        if found.group(1) in _OTHER_MODEL_TYPES:
            raise UnsupportedConstruct("only pta supported")
    blocks = _UNSUPPORTED_BLOCKS.search(text) or _INIT_BLOCK.search(text)
    if blocks:
        line = text.count("\n", 0, blocks.start(1)) + 1
        raise UnsupportedConstruct(f"'{blocks.group(1)}' blocks are not supported", line)
    modules = _MODULE.findall(text)
    if len(modules) > 1:
        raise UnsupportedConstruct("only a single module is supported")
    sync = _SYNC_LABEL.search(text)
    if sync:
        line = text.count("\n", 0, sync.start()) + 1
        raise UnsupportedConstruct(f"synchronization label {sync.group(0)} is not supported", line)


def parse_prism(text: str, source: Optional[str] = None) -> Ptp:
    """Ptp for a PRISM pta program; locations are named after the location variable's values."""
    _precheck(text)
    try:
        tree = _prism_parser.parse(text)
    except UnexpectedEOF:
        raise ParseError("unexpected end of input", source=source)
    except (UnexpectedToken, UnexpectedCharacters) as e:
        near = text[e.pos_in_stream:e.pos_in_stream + 12].split("\n")[0] if e.pos_in_stream is not None else ""
        raise ParseError(f"syntax error near {near!r}", e.line, e.column, source)
    except UnexpectedInput as e:
        raise ParseError(f"syntax error: {e}", source=source)
    items, labels = _ProgramBuilder().transform(tree)
    declarations = [i for i in items if isinstance(i, (_IntDecl, _ClockDecl))]
    commands = [i for i in items if isinstance(i, _Command)]
    invariants = [i.expr for i in items if isinstance(i, _Invariant)]
    m = _ModelBuilder(declarations, labels).build(commands, invariants[0] if invariants else None)
    require_valid(m)
    logger.debug(f"Parsed PRISM program: {len(m.locations)} locations, {len(m.transitions)} commands")
    return m


# --- export ---

def prism_probability(weight: Fraction) -> str:
    """Shortest exact decimal when the rational has one, otherwise num/den."""
    denominator = weight.denominator
    for factor in (2, 5):
        while denominator % factor == 0:
            denominator //= factor
    if denominator != 1:
        return f"{weight.numerator}/{weight.denominator}"
    return format(Decimal(weight.numerator) / Decimal(weight.denominator), "f")


def _render(node) -> str:
    if isinstance(node, (Conjunction, Disjunction)):
        return f"({node})"
    if isinstance(node, Negation):
        inner = _render(node.arg)
        return f"!{inner}" if inner.startswith("(") else f"!({inner})"
    return str(node)


def _guard_text(guard: Assertion) -> List[str]:
    if isinstance(guard, TrueAssertion):
        return []
    if isinstance(guard, Conjunction):
        return [_render(part) for part in guard.args]
    return [_render(guard)]


def export_prism(m: Ptp) -> str:
    """Render m as a PRISM pta program with the location encoded in variable s."""
    require_valid(m)
    for name in [v.name for v in m.variables] + list(m.clocks):
        if name == LOCATION_NAME:
            raise ModelError(f"'{LOCATION_NAME}' is reserved for the location encoding; rename the "
                             f"{'clock' if name in m.clocks else 'variable'}")
    index = m.location_index
    lines = ["pta", f"module {MODULE_NAME}"]
    initial = index[m.initial]
    lines.append(f"  {LOCATION_NAME} : [0..{len(m.locations) - 1}]" + (f" init {initial};" if initial else ";"))
    for v in m.variables:
        init = m.initial_values()[v.name]
        lines.append(f"  {v.name} : [{v.lo}..{v.hi}]" + (f" init {init};" if init != v.lo else ";"))
    for clock in m.clocks:
        lines.append(f"  {clock} : clock;")

    ordered = sorted(enumerate(m.transitions), key=lambda item: (index[item[1].source], item[0]))
    for _, t in ordered:
        condition = [f"{LOCATION_NAME}={index[t.source]}"] + _guard_text(t.guard) + [str(c) for c in
                                                                                      t.enabling.constraints]
        branches = []
        for o in t.outcomes:
            assignments = [f"({LOCATION_NAME}'={index[o.target]})"]
            for name, value in o.update:
                if isinstance(value, AffineExpr):
                    raise ModelError(f"update of '{name}' is not a constant and cannot be exported")
                assignments.append(f"({name}'={value})")
            assignments.extend(f"({clock}'=0)" for clock in sorted(o.resets))
            text = "&".join(assignments)
            if not (len(t.outcomes) == 1 and o.weight == 1):
                text = f"{prism_probability(o.weight)}:{text}"
            branches.append(text)
        lines.append(f"  [] {' & '.join(condition)} -> {' + '.join(branches)};")

    invariants = [f"({LOCATION_NAME}={index[loc]} => {m.invariant[loc]})" for loc in m.locations
                  if loc in m.invariant and m.invariant[loc].constraints]
    if invariants:
        lines.append("  invariant")
        lines.append("    " + " &\n    ".join(invariants))
        lines.append("  endinvariant")
    lines.append("endmodule")
    for label, members in sorted(m.labels.items()):
        tests = " | ".join(f"{LOCATION_NAME}={index[loc]}" for loc in sorted(members, key=index.get))
        lines.append(f'label "{label}" = {tests};')
    return "\n".join(lines) + "\n"
