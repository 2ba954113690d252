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

"""Process pipelines (receive/work/retry stages with interval durations) compiled into
single-clock probabilistic timed programs.

Pipeline file (JSON)::

    {"start": "recv",
     "stages": [{"kind": "delay", "id": "recv", "duration": {"ref": "images:BcastComm"}, "then": "process"},
                {"kind": "work", "id": "process", "lo": 8, "hi": 10, "p": 0.7,
                 "success": "done", "fail": "recv"},
                {"kind": "absorb", "id": "done", "label": "Success"}]}
"""

import json
import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Tuple, Union

import networkx as nx

from .errors import Diagnostic, PipelineError, StatsError, UnboundDistribution, errors_only
from .ptp import ClockConstraint, Outcome, Ptp, Transition, Zone, require_valid
from .stats import IntervalHistogram, histogram_from_json, histogram_to_json, to_fraction

logger = logging.getLogger(__name__)

CLOCK = "x"


@dataclass(frozen=True)
class DurationRef:
    """Named distribution, resolved against a stats file by bind_statistics."""
    name: str


@dataclass(frozen=True)
class Delay:
    id: str
    duration: Union[IntervalHistogram, DurationRef]
    then: str


@dataclass(frozen=True)
class Work:
    id: str
    lo: int
    hi: int
    success_p: Fraction
    on_success: str
    on_fail: str


@dataclass(frozen=True)
class Absorb:
    id: str
    label: str


Stage = Union[Delay, Work, Absorb]


@dataclass(frozen=True)
class PipelineSpec:
    start: str
    stages: Tuple[Stage, ...]

    def stage(self, stage_id: str) -> Optional[Stage]:
        for stage in self.stages:
            if stage.id == stage_id:
                return stage
        return None

    def references(self) -> List[str]:
        return sorted({s.duration.name for s in self.stages if isinstance(s, Delay)
                       and isinstance(s.duration, DurationRef)})


def _successors(stage: Stage) -> List[Tuple[str, str]]:
    if isinstance(stage, Delay):
        return [("then", stage.then)]
    if isinstance(stage, Work):
        return [("success", stage.on_success), ("fail", stage.on_fail)]
    return []


def validate_pipeline(p: PipelineSpec) -> List[Diagnostic]:
    found: List[Diagnostic] = []
    ids = [stage.id for stage in p.stages]
    for stage_id in sorted({i for i in ids if ids.count(i) > 1}):
        found.append(Diagnostic("DuplicateStage", f"stage id '{stage_id}' is used more than once",
                                f"stages.{stage_id}"))
    known = set(ids)
    if p.start not in known:
        found.append(Diagnostic("UnknownStage", f"start stage '{p.start}' does not exist", "start"))

    flow = nx.DiGraph()
    flow.add_nodes_from(known)
    for stage in p.stages:
        where = f"stages.{stage.id}"
        for field_name, successor in _successors(stage):
            if successor not in known:
                found.append(Diagnostic("UnknownStage", f"'{field_name}' refers to unknown stage '{successor}'",
                                        f"{where}.{field_name}"))
            else:
                flow.add_edge(stage.id, successor)
        if isinstance(stage, Work):
            if stage.lo < 0 or stage.lo >= stage.hi:
                found.append(Diagnostic("DegenerateInterval", f"work interval ({stage.lo},{stage.hi}) "
                                        "must satisfy 0 <= lo < hi", where))
            if not 0 <= stage.success_p <= 1:
                found.append(Diagnostic("InvalidProbability", f"success probability {stage.success_p} "
                                        "outside [0,1]", f"{where}.p"))
        if isinstance(stage, Absorb) and not stage.label:
            found.append(Diagnostic("MissingLabel", "absorbing stage needs a label", f"{where}.label"))

    # Skipped while any reference is dangling
    if not any(d.code == "UnknownStage" for d in found):
        reachable = nx.descendants(flow, p.start) | {p.start}
        if not any(isinstance(s, Absorb) and s.id in reachable for s in p.stages):
            found.append(Diagnostic("NoTerminalStage", f"no absorbing stage is reachable from '{p.start}'",
                                    "start"))
    return found


def bind_statistics(p: PipelineSpec, stats: Mapping[str, IntervalHistogram]) -> PipelineSpec:
    """Replace every named duration by its histogram from stats."""
    missing = [name for name in p.references() if name not in stats]
    if missing:
        raise UnboundDistribution(missing)
    if not p.references():
        return p
    stages = tuple(replace(s, duration=stats[s.duration.name])
                   if isinstance(s, Delay) and isinstance(s.duration, DurationRef) else s
                   for s in p.stages)
    return replace(p, stages=stages)


def _bin_location(stage_id: str, k: int) -> str:
    return f"{stage_id}.bin{k}"


def compile_pipeline(p: PipelineSpec, branch_invariant: bool = True) -> Ptp:
    """Single-clock Ptp for p; locations follow the stage order, each Delay's bins after its branch.

    Entering any stage but an absorbing one resets the clock.
    """
    problems = errors_only(validate_pipeline(p))
    if problems:
        raise PipelineError(f"pipeline is not valid: {problems[0]}")
    if p.references():
        raise UnboundDistribution(p.references())

    stages = {stage.id: stage for stage in p.stages}

    def enter(stage_id: str, weight: Fraction) -> Outcome:
        resets = frozenset() if isinstance(stages[stage_id], Absorb) else frozenset({CLOCK})
        return Outcome(weight, stage_id, resets)

    def below(bound: int) -> Zone:
        return Zone((ClockConstraint(CLOCK, "<", bound),))

    def above(bound: int) -> Zone:
        return Zone((ClockConstraint(CLOCK, ">", bound),))

    locations: List[str] = []
    invariant: Dict[str, Zone] = {}
    transitions: List[Transition] = []
    labels: Dict[str, set] = {}

    for stage in p.stages:
        locations.append(stage.id)
        if isinstance(stage, Delay):
            if branch_invariant:
                invariant[stage.id] = Zone((ClockConstraint(CLOCK, "<=", 0),))
            branches = []
            for k, b in enumerate(stage.duration.bins, start=1):
                location = _bin_location(stage.id, k)
                locations.append(location)
                invariant[location] = below(b.hi)
                transitions.append(Transition(location, (enter(stage.then, Fraction(1)),), enabling=above(b.lo)))
                branches.append(Outcome(b.prob, location, frozenset({CLOCK})))
            transitions.append(Transition(stage.id, tuple(branches)))
        elif isinstance(stage, Work):
            invariant[stage.id] = below(stage.hi)
            outcomes = [enter(target, weight) for target, weight in
                        ((stage.on_success, stage.success_p), (stage.on_fail, 1 - stage.success_p)) if weight > 0]
            transitions.append(Transition(stage.id, tuple(outcomes), enabling=above(stage.lo)))
        else:
            labels.setdefault(stage.label, set()).add(stage.id)
            transitions.append(Transition(stage.id, (Outcome(Fraction(1), stage.id),)))

    m = Ptp(locations=tuple(locations), initial=p.start, clocks=(CLOCK,), invariant=invariant,
            transitions=tuple(transitions), labels={label: frozenset(ids) for label, ids in labels.items()})
    require_valid(m)
    logger.debug(f"Compiled pipeline with {len(p.stages)} stages into {len(locations)} locations")
    return m


# --- pipeline file ---

def _field(raw: dict, name: str, where: str):
    if name not in raw:
        raise PipelineError(f"{where}: missing field '{name}'")
    return raw[name]


def _integer(value, where: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise PipelineError(f"{where}: expected an integer, got {value!r}")
    return value


def _duration_from_json(raw, where: str) -> Union[IntervalHistogram, DurationRef]:
    if isinstance(raw, dict) and "ref" in raw:
        return DurationRef(str(raw["ref"]))
    try:
        return histogram_from_json(raw, where)
    except StatsError as e:
        raise PipelineError(str(e))


def stage_from_json(raw, where: str) -> Stage:
    if not isinstance(raw, dict):
        raise PipelineError(f"{where}: a stage must be an object")
    kind = _field(raw, "kind", where)
    stage_id = str(_field(raw, "id", where))
    where = f"stages.{stage_id}"
    if kind == "delay":
        return Delay(stage_id, _duration_from_json(_field(raw, "duration", where), f"{where}.duration"),
                     str(_field(raw, "then", where)))
    if kind == "work":
        if "duration" in raw or "bins" in raw:
            raise PipelineError(f"{where}: work durations are a single interval (lo, hi), not a histogram")
        try:
            p = to_fraction(_field(raw, "p", where))
        except StatsError as e:
            raise PipelineError(f"{where}.p: {e}")
        return Work(stage_id, _integer(_field(raw, "lo", where), f"{where}.lo"),
                    _integer(_field(raw, "hi", where), f"{where}.hi"), p,
                    str(_field(raw, "success", where)), str(_field(raw, "fail", where)))
    if kind == "absorb":
        return Absorb(stage_id, str(raw.get("label", "")))
    raise PipelineError(f"{where}: unknown stage kind '{kind}' (expected delay, work or absorb)")


def pipeline_from_dict(data) -> PipelineSpec:
    if not isinstance(data, dict):
        raise PipelineError("pipeline must be a JSON object")
    stages = _field(data, "stages", "pipeline")
    if not isinstance(stages, list):
        raise PipelineError("pipeline: 'stages' must be a list")
    return PipelineSpec(str(_field(data, "start", "pipeline")),
                        tuple(stage_from_json(raw, f"stages[{k}]") for k, raw in enumerate(stages)))


def load_pipeline(document: str) -> PipelineSpec:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise PipelineError(f"pipeline file is not valid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    return pipeline_from_dict(data)


def _probability_json(value: Fraction):
    return int(value) if value.denominator == 1 else float(value)


def pipeline_to_dict(p: PipelineSpec) -> dict:
    stages = []
    for s in p.stages:
        if isinstance(s, Delay):
            duration = {"ref": s.duration.name} if isinstance(s.duration, DurationRef) \
                else histogram_to_json(s.duration)
            stages.append({"kind": "delay", "id": s.id, "duration": duration, "then": s.then})
        elif isinstance(s, Work):
            stages.append({"kind": "work", "id": s.id, "lo": s.lo, "hi": s.hi,
                           "p": _probability_json(s.success_p), "success": s.on_success, "fail": s.on_fail})
        else:
            stages.append({"kind": "absorb", "id": s.id, "label": s.label})
    return {"start": p.start, "stages": stages}


def write_pipeline(p: PipelineSpec) -> str:
    return json.dumps(pipeline_to_dict(p), indent=2, ensure_ascii=False) + "\n"
