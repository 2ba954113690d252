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

"""The camera object-finding case study: a detector receives one image from each of two
cameras and looks for an object within 35 time units. Ready-made pipelines, the equivalent
hand-written models, the improved design's PRISM program, and a graph and scenario for
regenerating the receive-latency statistics by simulation.
"""

from fractions import Fraction
from typing import Dict, Optional

from .pipeline import Absorb, Delay, DurationRef, PipelineSpec, Work
from .ptp import ClockConstraint, Outcome, Ptp, Transition, Zone
from .ros_graph import RosGraph, graph_from_dict
from .simulator import ScenarioConfig
from .stats import IntervalHistogram

RECEIVE_BINS = ((3, 4, Fraction(3, 10)), (4, 6, Fraction(6, 10)), (6, 8, Fraction(1, 10)))
RECEIVE_CHANNEL = "images:BcastComm"
DEADLINE = 35
SUCCESS = "Success"
DEADLINE_QUERY = f'Pmax=?[F<={DEADLINE} "{SUCCESS}"]'
EVENTUALLY_QUERY = f'Pmax=?[F "{SUCCESS}"]'
# The improved program carries no labels; success is location 5
DEADLINE_QUERY_BY_LOCATION = f"Pmax=?[F<={DEADLINE} s=5]"

IMPROVED_PRISM = """pta
module M
  s : [0..6];
  x : clock;
  [] s=0 -> 0.3:(s'=1)&(x'=0) + 0.6:(s'=2)&(x'=0) +
      0.1:(s'=3)&(x'=0);
  [] s=1 & x<4 & x>3 -> (s'=4)&(x'=0);
  [] s=2 & x<6 & x>4 -> (s'=4)&(x'=0);
  [] s=3 & x<8 & x>6 -> (s'=4)&(x'=0);
  [] s=4 & x<10 & x>8 -> 0.7:(s'=5) + 0.3:(s'=6)&(x'=0);
  [] s=5 -> (s'=5);
  [] s=6 & x<10 & x>8 ->0.7:(s'=5)+0.3:(s'=0)&(x'=0);
endmodule
"""

IMPROVED_PRISM_LABELLED = IMPROVED_PRISM + f'label "{SUCCESS}" = s=5;\n'


def receive_histogram() -> IntervalHistogram:
    return IntervalHistogram.from_triples(RECEIVE_BINS)


def _receive_duration(inline: bool):
    return receive_histogram() if inline else DurationRef(RECEIVE_CHANNEL)


def original_pipeline(inline: bool = True) -> PipelineSpec:
    """Wait for both images, then process them together: (12,16) units, success 0.91, else start over."""
    return PipelineSpec("primary", (
        Delay("primary", _receive_duration(inline), "secondary"),
        Delay("secondary", _receive_duration(inline), "process"),
        Work("process", 12, 16, Fraction(91, 100), "found", "primary"),
        Absorb("found", SUCCESS),
    ))


def improved_pipeline(inline: bool = True) -> PipelineSpec:
    """Process each image as it arrives: (8,10) units each, success 0.7 per image."""
    return PipelineSpec("receive", (
        Delay("receive", _receive_duration(inline), "first_image"),
        Work("first_image", 8, 10, Fraction(7, 10), "found", "second_image"),
        Absorb("found", SUCCESS),
        Work("second_image", 8, 10, Fraction(7, 10), "found", "receive"),
    ))


def _x(rel: str, bound: int) -> ClockConstraint:
    return ClockConstraint("x", rel, bound)


RESET = frozenset({"x"})


def _receive_branch(source: str, fast: str, mid: str, slow: str) -> Transition:
    return Transition(source, tuple(Outcome(p, target, RESET)
                                    for (_, _, p), target in zip(RECEIVE_BINS, (fast, mid, slow))))


def original_model() -> Ptp:
    """Original design written out by hand, one location per receive bin."""
    locations = ("primary", "primary_fast", "primary_mid", "primary_slow",
                 "secondary", "secondary_fast", "secondary_mid", "secondary_slow",
                 "processing", "success")
    invariant: Dict[str, Zone] = {"primary": Zone((_x("<=", 0),)), "secondary": Zone((_x("<=", 0),)),
                                  "processing": Zone((_x("<", 16),))}
    transitions = [_receive_branch("primary", "primary_fast", "primary_mid", "primary_slow"),
                   _receive_branch("secondary", "secondary_fast", "secondary_mid", "secondary_slow")]
    for camera, next_location in (("primary", "secondary"), ("secondary", "processing")):
        for (lo, hi, _), speed in zip(RECEIVE_BINS, ("fast", "mid", "slow")):
            location = f"{camera}_{speed}"
            invariant[location] = Zone((_x("<", hi),))
            transitions.append(Transition(location, (Outcome(Fraction(1), next_location, RESET),),
                                          enabling=Zone((_x(">", lo),))))
    transitions.append(Transition("processing", (Outcome(Fraction(91, 100), "success"),
                                                 Outcome(Fraction(9, 100), "primary", RESET)),
                                  enabling=Zone((_x(">", 12),))))
    transitions.append(Transition("success", (Outcome(Fraction(1), "success"),)))
    return Ptp(locations=locations, initial="primary", clocks=("x",), invariant=invariant,
               transitions=tuple(transitions), labels={SUCCESS: frozenset({"success"})})


def improved_model(labelled: bool = True) -> Ptp:
    """Improved design as in its PRISM program: no invariants, every bound on the commands."""
    locations = ("receive", "fast", "mid", "slow", "first_image", "success", "second_image")
    transitions = [_receive_branch("receive", "fast", "mid", "slow")]
    for (lo, hi, _), location in zip(RECEIVE_BINS, ("fast", "mid", "slow")):
        transitions.append(Transition(location, (Outcome(Fraction(1), "first_image", RESET),),
                                      enabling=Zone((_x("<", hi), _x(">", lo)))))
    processing = Zone((_x("<", 10), _x(">", 8)))
    transitions.append(Transition("first_image", (Outcome(Fraction(7, 10), "success"),
                                                  Outcome(Fraction(3, 10), "second_image", RESET)),
                                  enabling=processing))
    transitions.append(Transition("success", (Outcome(Fraction(1), "success"),)))
    transitions.append(Transition("second_image", (Outcome(Fraction(7, 10), "success"),
                                                   Outcome(Fraction(3, 10), "receive", RESET)),
                                  enabling=processing))
    labels = {SUCCESS: frozenset({"success"})} if labelled else {}
    return Ptp(locations=locations, initial="receive", clocks=("x",), transitions=tuple(transitions),
               labels=labels)


def camera_graph() -> RosGraph:
    return graph_from_dict({
        "nodes": [{"id": "primary_camera", "label": "Primary camera"},
                  {"id": "secondary_camera", "label": "Secondary camera"},
                  {"id": "detector", "label": "Object detector"}],
        "topics": ["images"],
        "services": [],
        "descriptors": {"images": ["Image"]},
        "classes": {"Image": None},
        "edges": [{"from": "primary_camera", "to": "images"}, {"from": "secondary_camera", "to": "images"},
                  {"from": "images", "to": "detector"}],
    })


def camera_scenario(horizon: float = 50000.0, seed: Optional[int] = None) -> ScenarioConfig:
    """Each camera publishes every 10 s; delivery to the detector follows the receive histogram.

    The default horizon yields 10,000 deliveries.
    """
    return ScenarioConfig(comm={"images->detector": receive_histogram()},
                          publish_period={"images": 10.0}, horizon=horizon,
                          seed=42 if seed is None else seed)
