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

"""Tri-partite ROS-graph of nodes, topics and services.

Graph file (JSON)::

    {"nodes": ["receiver", {"id": "p", "label": "processor"}],
     "topics": ["images"], "services": [],
     "edges": [{"from": "receiver", "to": "images"}, {"from": "images", "to": "p"}],
     "descriptors": {"images": ["Image"]},
     "classes": {"Image": null}}
"""

import json
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Mapping, Optional, Tuple

import networkx as nx

from .errors import Diagnostic, GraphError, errors_only

logger = logging.getLogger(__name__)


class VertexKind(str, Enum):
    NODE = "node"
    TOPIC = "topic"
    SERVICE = "service"


class EdgeKind(str, Enum):
    PUBLISH = "publish"
    SUBSCRIBE = "subscribe"
    PROVIDE_SERVICE = "provide-service"
    REQUEST_SERVICE = "request-service"


# (source kind, target kind) -> edge role; node->service provides, service->node requests
EDGE_ROLES: Dict[Tuple[VertexKind, VertexKind], EdgeKind] = {
    (VertexKind.NODE, VertexKind.TOPIC): EdgeKind.PUBLISH,
    (VertexKind.TOPIC, VertexKind.NODE): EdgeKind.SUBSCRIBE,
    (VertexKind.NODE, VertexKind.SERVICE): EdgeKind.PROVIDE_SERVICE,
    (VertexKind.SERVICE, VertexKind.NODE): EdgeKind.REQUEST_SERVICE,
}


def edge_key(source: str, target: str) -> str:
    return f"{source}->{target}"


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    kind: EdgeKind

    @property
    def key(self) -> str:
        return edge_key(self.source, self.target)


@dataclass(frozen=True)
class RosGraph:
    nodes: FrozenSet[str] = frozenset()
    topics: FrozenSet[str] = frozenset()
    services: FrozenSet[str] = frozenset()
    edges: Tuple[Edge, ...] = ()
    descriptors: Mapping[str, Tuple[str, ...]] = field(default_factory=dict)
    labels: Mapping[str, str] = field(default_factory=dict)
    # child class -> parent class (None for roots)
    classes: Mapping[str, Optional[str]] = field(default_factory=dict)

    def vertex_kind(self, vertex: str) -> Optional[VertexKind]:
        if vertex in self.nodes:
            return VertexKind.NODE
        if vertex in self.topics:
            return VertexKind.TOPIC
        if vertex in self.services:
            return VertexKind.SERVICE
        return None

    def label(self, vertex: str) -> str:
        return self.labels.get(vertex, vertex)

    def edge(self, key: str) -> Optional[Edge]:
        for candidate in self.edges:
            if candidate.key == key:
                return candidate
        return None

    def publishers(self, topic: str) -> List[str]:
        return sorted(e.source for e in self.edges if e.target == topic and e.kind == EdgeKind.PUBLISH)

    def subscribers(self, topic: str) -> List[str]:
        return sorted(e.target for e in self.edges if e.source == topic and e.kind == EdgeKind.SUBSCRIBE)

    def providers(self, service: str) -> List[str]:
        return sorted(e.source for e in self.edges if e.target == service and e.kind == EdgeKind.PROVIDE_SERVICE)

    def callers(self, service: str) -> List[str]:
        return sorted(e.target for e in self.edges if e.source == service and e.kind == EdgeKind.REQUEST_SERVICE)

    def to_networkx(self) -> nx.DiGraph:
        """Directed view with `kind` on vertices and edges."""
        graph = nx.DiGraph()
        for vertex_set, kind in ((self.nodes, VertexKind.NODE), (self.topics, VertexKind.TOPIC),
                                 (self.services, VertexKind.SERVICE)):
            for vertex in sorted(vertex_set):
                graph.add_node(vertex, kind=kind, label=self.labels.get(vertex))
        for e in self.edges:
            graph.add_edge(e.source, e.target, kind=e.kind)
        return graph


def classify_edge(graph: RosGraph, source: str, target: str) -> Optional[EdgeKind]:
    """Role of an edge, or None when the endpoints do not alternate node/channel."""
    return EDGE_ROLES.get((graph.vertex_kind(source), graph.vertex_kind(target)))


def validate_graph(graph: RosGraph) -> List[Diagnostic]:
    diagnostics: List[Diagnostic] = []

    overlaps = (graph.nodes & graph.topics) | (graph.nodes & graph.services) | (graph.topics & graph.services)
    for vertex in sorted(overlaps):
        diagnostics.append(Diagnostic("OverlappingVertexSets",
                                      "vertex belongs to more than one of nodes/topics/services", vertex))

    for e in graph.edges:
        missing = [v for v in (e.source, e.target) if graph.vertex_kind(v) is None]
        if missing:
            diagnostics.append(Diagnostic("UnknownVertex", f"edge refers to unknown vertex {missing[0]}", e.key))
            continue
        kind = classify_edge(graph, e.source, e.target)
        if kind is None:
            diagnostics.append(Diagnostic("InvalidEdge", "edge endpoints must alternate node/channel", e.key))
        elif kind != e.kind:
            diagnostics.append(Diagnostic("EdgeKindMismatch",
                                          f"edge kind {e.kind.value} does not match endpoints ({kind.value})", e.key))

    # Labelling is total and unique within each vertex kind
    for vertex_set, kind in ((graph.nodes, VertexKind.NODE), (graph.topics, VertexKind.TOPIC),
                             (graph.services, VertexKind.SERVICE)):
        seen: Dict[str, str] = {}
        for vertex in sorted(vertex_set):
            label = graph.labels.get(vertex)
            if not label:
                diagnostics.append(Diagnostic("MissingLabel", f"{kind.value} has no label", vertex))
                continue
            if label in seen:
                diagnostics.append(Diagnostic("DuplicateLabel",
                                              f"label '{label}' already used by {kind.value} {seen[label]}", vertex))
            else:
                seen[label] = vertex

    known_classes = set(graph.classes) | {p for p in graph.classes.values() if p is not None}
    edge_keys = {e.key: e for e in graph.edges}
    for site, sequence in sorted(graph.descriptors.items()):
        site_edge = edge_keys.get(site)
        if site in graph.topics:
            pass
        elif site_edge is not None and site_edge.kind in (EdgeKind.PROVIDE_SERVICE, EdgeKind.REQUEST_SERVICE):
            pass
        else:
            diagnostics.append(Diagnostic("DescriptorSiteInvalid",
                                          "descriptors attach to topics and node-service edges only", site))
            continue
        for cls in sequence:
            if cls not in known_classes:
                diagnostics.append(Diagnostic("UnknownClass", f"descriptor uses undeclared class '{cls}'", site))

    hierarchy = nx.DiGraph()
    hierarchy.add_nodes_from(known_classes)
    hierarchy.add_edges_from((child, parent) for child, parent in graph.classes.items() if parent is not None)
    if not nx.is_directed_acyclic_graph(hierarchy):
        cycle = nx.find_cycle(hierarchy)
        diagnostics.append(Diagnostic("ClassCycle", "class hierarchy is not a partial order",
                                      " -> ".join(child for child, _ in cycle)))
    return diagnostics


def _vertex_entries(entries, kind: str) -> List[Tuple[str, Optional[str]]]:
    result = []
    for position, entry in enumerate(entries):
        if isinstance(entry, str):
            result.append((entry, entry))
        elif isinstance(entry, dict) and isinstance(entry.get("id"), str):
            result.append((entry["id"], entry.get("label")))
        else:
            raise GraphError(f"{kind}[{position}]: expected a name or an object with an 'id'")
    return result


def graph_from_dict(data: dict) -> RosGraph:
    """Build a RosGraph from the decoded graph file, without validating it."""
    if not isinstance(data, dict):
        raise GraphError("graph document must be a JSON object")
    labels: Dict[str, str] = {}
    vertex_sets = {}
    for kind in ("nodes", "topics", "services"):
        entries = _vertex_entries(data.get(kind, []), kind)
        vertex_sets[kind] = frozenset(vertex for vertex, _ in entries)
        for vertex, label in entries:
            if label:
                labels[vertex] = label

    graph = RosGraph(nodes=vertex_sets["nodes"], topics=vertex_sets["topics"], services=vertex_sets["services"],
                     labels=labels)
    edges = []
    for position, raw in enumerate(data.get("edges", [])):
        try:
            source, target = raw["from"], raw["to"]
        except (KeyError, TypeError):
            raise GraphError(f"edges[{position}]: expected an object with 'from' and 'to'")
        for vertex in (source, target):
            if graph.vertex_kind(vertex) is None:
                raise GraphError(f"edges[{position}]: unknown vertex '{vertex}'")
        kind = classify_edge(graph, source, target)
        if kind is None:
            raise GraphError(f"edges[{position}] ({edge_key(source, target)}): "
                             "edge endpoints must alternate node/channel")
        edges.append(Edge(source, target, kind))

    descriptors = {site: tuple(sequence) for site, sequence in data.get("descriptors", {}).items()}
    classes = dict(data.get("classes", {}))
    return RosGraph(nodes=graph.nodes, topics=graph.topics, services=graph.services, edges=tuple(edges),
                    descriptors=descriptors, labels=labels, classes=classes)


def load_graph(document: str) -> RosGraph:
    try:
        data = json.loads(document)
    except json.JSONDecodeError as e:
        raise GraphError(f"graph file is not valid JSON at line {e.lineno}, column {e.colno}: {e.msg}")
    graph = graph_from_dict(data)
    problems = errors_only(validate_graph(graph))
    if problems:
        for extra in problems[1:]:
            logger.debug(f"Additional graph diagnostic: {extra}")
        first = problems[0]
        raise GraphError(f"{first.code} ({first.element}): {first.message}")
    logger.debug(f"Loaded graph with {len(graph.nodes)} nodes, {len(graph.topics)} topics, "
                 f"{len(graph.services)} services, {len(graph.edges)} edges")
    return graph


def write_graph(graph: RosGraph) -> str:
    def entries(vertices):
        result = []
        for vertex in sorted(vertices):
            label = graph.labels.get(vertex)
            result.append(vertex if label == vertex else {"id": vertex, "label": label})
        return result

    document = {
        "nodes": entries(graph.nodes),
        "topics": entries(graph.topics),
        "services": entries(graph.services),
        "edges": [{"from": e.source, "to": e.target} for e in graph.edges],
        "descriptors": {site: list(sequence) for site, sequence in sorted(graph.descriptors.items())},
        "classes": dict(sorted(graph.classes.items())),
    }
    return json.dumps(document, indent=2, ensure_ascii=False) + "\n"
