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

"""Timed trace entries of service calls and topic broadcasts, and their pairing into durations.

Trace log (JSON Lines), one object per event::

    {"header": {"offsets": {"proc": 0.002}}}                 (optional first line)
    {"kind": "top_pub", "caller": "cam", "channel": "img", "observer": "cam", "corr": 3, "t": 2.0}
"""

import json
import logging
from collections import defaultdict
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, TextIO, Tuple

from .errors import DuplicateEventError, TraceError

logger = logging.getLogger(__name__)


class EventKind(str, Enum):
    # Declaration order is the tie-break order of events with equal timestamps
    SVC_REQ_SEND = "svc_req_send"
    SVC_REQ_RECV = "svc_req_recv"
    SVC_ANS_SEND = "svc_ans_send"
    SVC_ANS_RECV = "svc_ans_recv"
    TOP_PUB = "top_pub"
    TOP_RECV = "top_recv"
    TOP_DONE = "top_done"

    @property
    def order(self) -> int:
        return list(EventKind).index(self)

    @property
    def is_service(self) -> bool:
        return self.value.startswith("svc_")


class SampleKind(str, Enum):
    REQ_COMM = "ReqComm"
    SVC_EXEC = "SvcExec"
    ANS_COMM = "AnsComm"
    BCAST_COMM = "BcastComm"
    HANDLER_TIME = "HandlerTime"


@dataclass(frozen=True)
class TraceEvent:
    kind: EventKind
    caller: str
    channel: str
    observer: str
    corr_id: int
    t: float


@dataclass(frozen=True)
class DurationSample:
    kind: SampleKind
    channel: str
    value: float
    corr_id: int
    observer: str = ""

    @property
    def key(self) -> str:
        return f"{self.channel}:{self.kind.value}"


@dataclass
class PairingResult:
    samples: List[DurationSample]
    unpaired: List[TraceEvent]
    negative: List[DurationSample]


_FIELDS = ("kind", "caller", "channel", "observer", "corr", "t")


def _event_from_record(record, where: str) -> TraceEvent:
    if not isinstance(record, dict):
        raise TraceError(f"{where}: trace record must be a JSON object")
    for name in _FIELDS:
        if name not in record:
            raise TraceError(f"{where}: missing field '{name}'")
    try:
        kind = EventKind(record["kind"])
    except ValueError:
        raise TraceError(f"{where}: field 'kind': unknown event kind '{record['kind']}'")
    for name in ("caller", "channel", "observer"):
        if not isinstance(record[name], str) or not record[name]:
            raise TraceError(f"{where}: field '{name}' must be a non-empty string")
    corr = record["corr"]
    if isinstance(corr, bool) or not isinstance(corr, int) or corr < 0:
        raise TraceError(f"{where}: field 'corr' must be a nonnegative integer")
    t = record["t"]
    if isinstance(t, bool) or not isinstance(t, (int, float)):
        raise TraceError(f"{where}: field 't' must be a number")
    if t < 0:
        raise TraceError(f"{where}: field 't': negative timestamp")
    return TraceEvent(kind, record["caller"], record["channel"], record["observer"], corr, float(t))


def parse_trace_event(line: str, line_number: Optional[int] = None) -> TraceEvent:
    where = f"line {line_number}" if line_number is not None else "trace record"
    try:
        record = json.loads(line)
    except json.JSONDecodeError as e:
        raise TraceError(f"{where}: malformed record at column {e.colno}: {e.msg}")
    return _event_from_record(record, where)


def read_trace(lines: Iterable[str]) -> List[TraceEvent]:
    """Parse a whole log, subtracting per-observer clock offsets from the optional header."""
    offsets: Mapping[str, float] = {}
    events = []
    for number, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        if number == 1 and line.lstrip().startswith('{"header"'):
            try:
                header = json.loads(line)["header"]
                offsets = {node: float(value) for node, value in header.get("offsets", {}).items()}
            except (json.JSONDecodeError, AttributeError, TypeError, ValueError) as e:
                raise TraceError(f"line 1: malformed header: {e}")
            logger.debug(f"Trace header declares offsets for {len(offsets)} nodes")
            continue
        event = parse_trace_event(line, number)
        offset = offsets.get(event.observer)
        if offset:
            event = TraceEvent(event.kind, event.caller, event.channel, event.observer, event.corr_id,
                               event.t - offset)
        events.append(event)
    return events


def format_trace_event(event: TraceEvent) -> str:
    record = {
        "kind": event.kind.value,
        "caller": event.caller,
        "channel": event.channel,
        "observer": event.observer,
        "corr": event.corr_id,
        "t": event.t,
    }
    return json.dumps(record)


def write_trace(events: List[TraceEvent], sink: TextIO, offsets: Optional[Mapping[str, float]] = None) -> int:
    """Write one JSON line per event in input order; returns the record count."""
    if offsets:
        sink.write(json.dumps({"header": {"offsets": dict(offsets)}}) + "\n")
    count = 0
    for event in events:
        sink.write(format_trace_event(event) + "\n")
        count += 1
    return count


# (start kind, end kind, sample kind) per interaction type
_SERVICE_LEGS = (
    (EventKind.SVC_REQ_SEND, EventKind.SVC_REQ_RECV, SampleKind.REQ_COMM),
    (EventKind.SVC_REQ_RECV, EventKind.SVC_ANS_SEND, SampleKind.SVC_EXEC),
    (EventKind.SVC_ANS_SEND, EventKind.SVC_ANS_RECV, SampleKind.ANS_COMM),
)


def pair_events(events: List[TraceEvent]) -> PairingResult:
    """Match entries of one interaction and emit the five duration kinds.

    corr_id is numbered per (channel, caller), so services are keyed by (channel, caller, corr_id)
    and topic publications by (channel, publisher, corr_id), with receive/done entries further
    split per subscriber (the observer).
    """
    seen: Dict[Tuple, TraceEvent] = {}
    duplicates = []
    for event in events:
        key = (event.kind, event.channel, event.caller, event.corr_id, event.observer)
        if key in seen:
            duplicates.append((event.kind.value, event.corr_id, event.observer))
        else:
            seen[key] = event
    if duplicates:
        raise DuplicateEventError(duplicates)

    services: Dict[Tuple[str, str, int], Dict[EventKind, TraceEvent]] = defaultdict(dict)
    publications: Dict[Tuple[str, str, int], TraceEvent] = {}
    deliveries: Dict[Tuple[str, str, int, str], Dict[EventKind, TraceEvent]] = defaultdict(dict)
    for event in events:
        if event.kind.is_service:
            services[(event.channel, event.caller, event.corr_id)][event.kind] = event
        elif event.kind == EventKind.TOP_PUB:
            publications[(event.channel, event.caller, event.corr_id)] = event
        else:
            deliveries[(event.channel, event.caller, event.corr_id, event.observer)][event.kind] = event

    samples: List[DurationSample] = []
    used = set()

    def emit(kind: SampleKind, start: TraceEvent, end: TraceEvent):
        samples.append(DurationSample(kind, end.channel, end.t - start.t, end.corr_id, end.observer))
        used.add(id(start))
        used.add(id(end))

    for entries in services.values():
        for start_kind, end_kind, sample_kind in _SERVICE_LEGS:
            if start_kind in entries and end_kind in entries:
                emit(sample_kind, entries[start_kind], entries[end_kind])

    for (channel, publisher, corr, _subscriber), entries in deliveries.items():
        received = entries.get(EventKind.TOP_RECV)
        published = publications.get((channel, publisher, corr))
        if received is not None and published is not None:
            emit(SampleKind.BCAST_COMM, published, received)
        done = entries.get(EventKind.TOP_DONE)
        if received is not None and done is not None:
            emit(SampleKind.HANDLER_TIME, received, done)

    unpaired = [event for event in events if id(event) not in used]
    negative = [sample for sample in samples if sample.value < 0]
    for sample in negative:
        logger.warning(f"Negative {sample.kind.value} duration {sample.value:.6f}s on {sample.channel} "
                       f"(corr {sample.corr_id}); clocks may be unsynchronized")
    if unpaired:
        logger.info(f"{len(unpaired)} trace events have no partner entry")
    return PairingResult(samples, unpaired, negative)


def group_samples(samples: Iterable[DurationSample]) -> Dict[str, List[float]]:
    """Collect durations per "channel:kind" in encounter order."""
    groups: Dict[str, List[float]] = defaultdict(list)
    for sample in samples:
        groups[sample.key].append(sample.value)
    return dict(sorted(groups.items()))
