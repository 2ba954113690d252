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

"""Discrete-event simulation of a RosGraph emitting timed trace entries.

Random draws use numpy's PCG64 bit generator (``numpy.random.Generator(PCG64(seed))``),
whose output stream is fixed across platforms for a given seed.

Scenario file (JSON)::

    {"comm": {"images->processor": {"unit": 1, "bins": [[3, 4, 0.3], [4, 6, 0.6], [6, 8, 0.1]]}},
     "exec": {"plan": 0.5},
     "handler": {"images->processor": 0.25},
     "publish_period": {"images": 10.0},
     "request_period": {"plan->nav": 2.0},
     "horizon": 100000, "seed": 42}
"""

import heapq
import json
import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Deque, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
from tqdm import tqdm

from .config import Config
from .errors import ScenarioError, StatsError, errors_only
from .ros_graph import EdgeKind, RosGraph, edge_key, validate_graph
from .stats import IntervalHistogram, histogram_from_json
from .trace import EventKind, TraceEvent

logger = logging.getLogger(__name__)

DurationSpec = Union[float, IntervalHistogram]


@dataclass(frozen=True)
class ScenarioConfig:
    comm: Mapping[str, DurationSpec] = field(default_factory=dict)
    exec: Mapping[str, DurationSpec] = field(default_factory=dict)
    handler: Mapping[str, DurationSpec] = field(default_factory=dict)
    publish_period: Mapping[str, float] = field(default_factory=dict)
    request_period: Mapping[str, float] = field(default_factory=dict)
    horizon: float = 100.0
    seed: int = 42

    def with_overrides(self, seed: Optional[int] = None, horizon: Optional[float] = None) -> "ScenarioConfig":
        return ScenarioConfig(self.comm, self.exec, self.handler, self.publish_period, self.request_period,
                              self.horizon if horizon is None else horizon, self.seed if seed is None else seed)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def draw_duration(hist: IntervalHistogram, rng: np.random.Generator) -> float:
    """Pick a bin by probability, then a value uniformly inside its open interval (seconds)."""
    probabilities = np.array([float(b.prob) for b in hist.bins])
    index = int(rng.choice(len(hist.bins), p=probabilities / probabilities.sum()))
    chosen = hist.bins[index]
    lo = float(chosen.lo * hist.unit)
    hi = float(chosen.hi * hist.unit)
    value = rng.uniform(lo, hi)
    # uniform() is half-open; the interval is open at both ends
    while value <= lo:
        value = rng.uniform(lo, hi)
    return float(value)


def _duration_spec(raw, where: str) -> DurationSpec:
    if isinstance(raw, bool):
        raise ScenarioError(f"{where}: expected seconds or a histogram")
    if isinstance(raw, (int, float)):
        if raw < 0:
            raise ScenarioError(f"{where}: duration must be nonnegative")
        return float(raw)
    try:
        return histogram_from_json(raw, where)
    except StatsError as e:
        raise ScenarioError(str(e))


def scenario_from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ScenarioError("scenario must be a JSON object")

    def section(name: str) -> dict:
        value = data.get(name, {})
        if not isinstance(value, dict):
            raise ScenarioError(f"'{name}' must be an object")
        return value

    def periods(name: str) -> Dict[str, float]:
        result = {}
        for key, value in section(name).items():
            if isinstance(value, bool) or not isinstance(value, (int, float)) or value <= 0:
                raise ScenarioError(f"{name}.{key}: period must be a positive number of seconds")
            result[key] = float(value)
        return result

    horizon = data.get("horizon", 100.0)
    if isinstance(horizon, bool) or not isinstance(horizon, (int, float)) or horizon <= 0:
        raise ScenarioError("horizon must be a positive number of seconds")
    seed = data.get("seed", Config.get_seed())
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ScenarioError("seed must be a 64-bit nonnegative integer")
    return ScenarioConfig(
        comm={k: _duration_spec(v, f"comm.{k}") for k, v in section("comm").items()},
        exec={k: _duration_spec(v, f"exec.{k}") for k, v in section("exec").items()},
        handler={k: _duration_spec(v, f"handler.{k}") for k, v in section("handler").items()},
        publish_period=periods("publish_period"),
        request_period=periods("request_period"),
        horizon=float(horizon),
        seed=seed,
    )


def load_scenario(document: str) -> ScenarioConfig:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"scenario file is not valid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    return scenario_from_dict(data)


def check_scenario(graph: RosGraph, config: ScenarioConfig) -> None:
    """Raise ScenarioError when the config references something the graph lacks."""
    edges = {e.key: e for e in graph.edges}
    for key in config.comm:
        if key not in edges:
            raise ScenarioError(f"comm.{key}: unknown graph edge")
    for service in config.exec:
        if service not in graph.services:
            raise ScenarioError(f"exec.{service}: unknown service")
    for key in config.handler:
        if key not in edges or edges[key].kind != EdgeKind.SUBSCRIBE:
            raise ScenarioError(f"handler.{key}: not a topic->subscriber edge")
    for topic in config.publish_period:
        if topic not in graph.topics:
            raise ScenarioError(f"publish_period.{topic}: unknown topic")
        if not graph.publishers(topic):
            raise ScenarioError(f"publish_period.{topic}: topic has no publisher")
    for key in config.request_period:
        if key not in edges or edges[key].kind != EdgeKind.REQUEST_SERVICE:
            raise ScenarioError(f"request_period.{key}: not a service->caller edge")
        if not graph.providers(edges[key].source):
            raise ScenarioError(f"request_period.{key}: service has no provider")
    if config.horizon <= 0:
        raise ScenarioError("horizon must be positive")


class _Simulation:
    """One sequential event loop; heap entries are (time, insertion sequence, action)."""

    def __init__(self, graph: RosGraph, config: ScenarioConfig):
        self.graph = graph
        self.config = config
        self.rng = make_rng(config.seed)
        self.queue: List[Tuple[float, int, Callable[[float], None]]] = []
        self.sequence = 0
        self.events: List[TraceEvent] = []
        self.next_corr: Dict[str, int] = {}
        # provider node -> (busy flag, FIFO of pending service starts)
        self.busy: Dict[str, bool] = {}
        self.waiting: Dict[str, Deque[Callable[[float], None]]] = {}

    def schedule(self, time: float, action: Callable[[float], None]) -> None:
        heapq.heappush(self.queue, (time, self.sequence, action))
        self.sequence += 1

    def draw(self, spec: Optional[DurationSpec]) -> float:
        if spec is None:
            return 0.0
        if isinstance(spec, IntervalHistogram):
            return draw_duration(spec, self.rng)
        return float(spec)

    def comm(self, key: str) -> float:
        return self.draw(self.config.comm.get(key))

    def corr(self, channel: str) -> int:
        value = self.next_corr.get(channel, 0)
        self.next_corr[channel] = value + 1
        return value

    def emit(self, kind: EventKind, caller: str, channel: str, observer: str, corr: int, t: float) -> None:
        label = self.graph.label
        self.events.append(TraceEvent(kind, label(caller), label(channel), label(observer), corr, t))

    # --- topics ---

    def publish(self, topic: str, publisher: str, period: float):
        def fire(now: float):
            corr = self.corr(topic)
            self.emit(EventKind.TOP_PUB, publisher, topic, publisher, corr, now)
            out_latency = self.comm(edge_key(publisher, topic))
            for subscriber in self.graph.subscribers(topic):
                delay = out_latency + self.comm(edge_key(topic, subscriber))
                self.schedule(now + delay, self.deliver(topic, publisher, subscriber, corr))
            if now + period < self.config.horizon:
                self.schedule(now + period, fire)
        return fire

    def deliver(self, topic: str, publisher: str, subscriber: str, corr: int):
        def receive(now: float):
            self.emit(EventKind.TOP_RECV, publisher, topic, subscriber, corr, now)
            handling = self.draw(self.config.handler.get(edge_key(topic, subscriber)))
            self.schedule(now + handling,
                          lambda done: self.emit(EventKind.TOP_DONE, publisher, topic, subscriber, corr, done))
        return receive

    # --- services ---

    def leg(self, service: str, caller: str, provider: str) -> float:
        return self.comm(edge_key(service, caller)) + self.comm(edge_key(provider, service))

    def request(self, service: str, caller: str, period: float):
        provider = self.graph.providers(service)[0]

        def fire(now: float):
            corr = self.corr(service)
            self.emit(EventKind.SVC_REQ_SEND, caller, service, caller, corr, now)
            self.schedule(now + self.leg(service, caller, provider), self.arrive(service, caller, provider, corr))
            if now + period < self.config.horizon:
                self.schedule(now + period, fire)
        return fire

    def arrive(self, service: str, caller: str, provider: str, corr: int):
        def receive(now: float):
            self.emit(EventKind.SVC_REQ_RECV, caller, service, provider, corr, now)
            start = self.execute(service, caller, provider, corr)
            if self.busy.get(provider):
                self.waiting.setdefault(provider, deque()).append(start)
            else:
                self.busy[provider] = True
                start(now)
        return receive

    def execute(self, service: str, caller: str, provider: str, corr: int):
        def start(now: float):
            duration = self.draw(self.config.exec.get(service))
            self.schedule(now + duration, self.answer(service, caller, provider, corr))
        return start

    def answer(self, service: str, caller: str, provider: str, corr: int):
        def send(now: float):
            self.emit(EventKind.SVC_ANS_SEND, caller, service, provider, corr, now)
            self.schedule(now + self.leg(service, caller, provider),
                          lambda done: self.emit(EventKind.SVC_ANS_RECV, caller, service, caller, corr, done))
            pending = self.waiting.get(provider)
            if pending:
                pending.popleft()(now)
            else:
                self.busy[provider] = False
        return send

    def run(self) -> List[TraceEvent]:
        for topic, period in sorted(self.config.publish_period.items()):
            for publisher in self.graph.publishers(topic):
                self.schedule(0.0, self.publish(topic, publisher, period))
        for key, period in sorted(self.config.request_period.items()):
            edge = self.graph.edge(key)
            self.schedule(0.0, self.request(edge.source, edge.target, period))

        with tqdm(desc="Simulating", unit=" events", disable=not Config.show_progress()) as pbar:
            while self.queue:
                now, _, action = heapq.heappop(self.queue)
                action(now)
                pbar.update(1)

        order = {(id(e)): position for position, e in enumerate(self.events)}
        self.events.sort(key=lambda e: (e.t, e.corr_id, e.kind.order, order[id(e)]))
        return self.events


def simulate(graph: RosGraph, config: ScenarioConfig) -> List[TraceEvent]:
    """Run the scenario to completion and return the trace sorted by (t, corr_id, kind order)."""
    problems = errors_only(validate_graph(graph))
    if problems:
        raise ScenarioError(f"graph is not valid: {problems[0]}")
    check_scenario(graph, config)
    events = _Simulation(graph, config).run()
    logger.info(f"Simulated {len(events)} trace events up to horizon {config.horizon}s (seed {config.seed})")
    return events
