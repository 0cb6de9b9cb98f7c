"""Typed tripartite graph over triggers, outcomes and exposure vessels.

Layering is enforced on every mutation: a trigger *causes* an outcome and an
outcome *impacts* an exposure vessel, nothing else. Node identity is
(kind, normalized phrase); parallel edges merge by unioning their risk-id
sets, which keeps shared-outcome and degree queries well defined.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum

from .extraction import Confidence, RiskDecomposition, normalize_phrase


class GraphError(ValueError):
    pass


class InsufficientStructure(GraphError):
    """Decomposition has no vessel/outcome structure worth graphing."""


class NodeKind(str, Enum):
    TRIGGER = "trigger"
    OUTCOME = "outcome"
    EXPOSURE_VESSEL = "exposure_vessel"


_KIND_ORDER = {NodeKind.TRIGGER: 0, NodeKind.OUTCOME: 1, NodeKind.EXPOSURE_VESSEL: 2}

# DOT styling per node kind: (shape, fillcolor)
_DOT_STYLE = {
    NodeKind.TRIGGER: ("box", "lightcoral"),
    NodeKind.OUTCOME: ("ellipse", "khaki"),
    NodeKind.EXPOSURE_VESSEL: ("box", "lightblue"),
}


class Relation(str, Enum):
    CAUSES = "causes"
    IMPACTS = "impacts"


_RELATION_LAYERS = {
    Relation.CAUSES: (NodeKind.TRIGGER, NodeKind.OUTCOME),
    Relation.IMPACTS: (NodeKind.OUTCOME, NodeKind.EXPOSURE_VESSEL),
}

NodeKey = tuple[NodeKind, str]
EdgeKey = tuple[Relation, NodeKey, NodeKey]


@dataclass
class GraphNode:
    kind: NodeKind
    phrase: str
    risk_ids: set[str] = field(default_factory=set)


@dataclass
class GraphEdge:
    relation: Relation
    src: NodeKey
    dst: NodeKey
    risk_ids: set[str] = field(default_factory=set)


@dataclass
class DegreeEntry:
    kind: NodeKind
    phrase: str
    in_degree: int
    out_degree: int
    risk_count: int


class KnowledgeGraph:
    def __init__(self) -> None:
        self.nodes: dict[NodeKey, GraphNode] = {}
        self.edges: dict[EdgeKey, GraphEdge] = {}

    def _touch_node(self, kind: NodeKind, phrase: str, risk_id: str) -> NodeKey:
        key = (kind, phrase)
        node = self.nodes.get(key)
        if node is None:
            node = GraphNode(kind=kind, phrase=phrase)
            self.nodes[key] = node
        node.risk_ids.add(risk_id)
        return key

    def _touch_edge(
        self, relation: Relation, src: NodeKey, dst: NodeKey, risk_id: str
    ) -> None:
        want = _RELATION_LAYERS[relation]
        if (src[0], dst[0]) != want:
            raise GraphError(
                f"{relation.value} edge must be {want[0].value} -> {want[1].value}, "
                f"got {src[0].value} -> {dst[0].value}"
            )
        key = (relation, src, dst)
        edge = self.edges.get(key)
        if edge is None:
            edge = GraphEdge(relation=relation, src=src, dst=dst)
            self.edges[key] = edge
        edge.risk_ids.add(risk_id)

    def add_risk(self, decomposition: RiskDecomposition) -> None:
        """Merge one decomposition's triple structure into the graph.

        trigger_only decompositions carry no edges and are rejected; the
        caller may still index such risks for news matching.
        """
        if decomposition.confidence is Confidence.TRIGGER_ONLY:
            raise InsufficientStructure(
                f"risk {decomposition.risk_id!r}: insufficient structure "
                "(trigger only, nothing to connect)"
            )
        if not decomposition.trigger:
            raise GraphError(f"risk {decomposition.risk_id!r}: empty trigger")
        rid = decomposition.risk_id
        trigger_key = self._touch_node(NodeKind.TRIGGER, decomposition.trigger, rid)
        outcome_keys = [
            self._touch_node(NodeKind.OUTCOME, phrase, rid)
            for phrase in decomposition.outcomes
        ]
        vessel_keys = [
            self._touch_node(NodeKind.EXPOSURE_VESSEL, phrase, rid)
            for phrase in decomposition.exposure_vessels
        ]
        for okey in outcome_keys:
            self._touch_edge(Relation.CAUSES, trigger_key, okey, rid)
            for vkey in vessel_keys:
                self._touch_edge(Relation.IMPACTS, okey, vkey, rid)

    def risks_by_trigger(self, phrase: str) -> set[str]:
        node = self.nodes.get((NodeKind.TRIGGER, normalize_phrase(phrase)))
        return set(node.risk_ids) if node else set()

    def shared_outcomes(self) -> list[tuple[str, set[str]]]:
        """Outcomes reached from two or more risks, most shared first."""
        hits = [
            (node.phrase, set(node.risk_ids))
            for (kind, _), node in self.nodes.items()
            if kind is NodeKind.OUTCOME and len(node.risk_ids) >= 2
        ]
        hits.sort(key=lambda item: (-len(item[1]), item[0]))
        return hits

    def degree_report(self) -> list[DegreeEntry]:
        in_deg: dict[NodeKey, int] = {}
        out_deg: dict[NodeKey, int] = {}
        for edge in self.edges.values():
            out_deg[edge.src] = out_deg.get(edge.src, 0) + 1
            in_deg[edge.dst] = in_deg.get(edge.dst, 0) + 1
        return [
            DegreeEntry(
                kind=node.kind,
                phrase=node.phrase,
                in_degree=in_deg.get(key, 0),
                out_degree=out_deg.get(key, 0),
                risk_count=len(node.risk_ids),
            )
            for key, node in sorted(
                self.nodes.items(), key=lambda kv: (_KIND_ORDER[kv[0][0]], kv[0][1])
            )
        ]

    def _sorted_nodes(self) -> list[GraphNode]:
        return [
            node
            for _, node in sorted(
                self.nodes.items(), key=lambda kv: (_KIND_ORDER[kv[0][0]], kv[0][1])
            )
        ]

    def _sorted_edges(self) -> list[GraphEdge]:
        return [
            edge
            for _, edge in sorted(
                self.edges.items(),
                key=lambda kv: (
                    kv[0][0].value,
                    _KIND_ORDER[kv[0][1][0]],
                    kv[0][1][1],
                    _KIND_ORDER[kv[0][2][0]],
                    kv[0][2][1],
                ),
            )
        ]

    def export(self, fmt: str) -> str:
        if fmt == "dot":
            return self._export_dot()
        if fmt == "json":
            return self._export_json()
        raise GraphError(f"unknown export format {fmt!r}")

    def _export_dot(self) -> str:
        def dot_id(key: NodeKey) -> str:
            return _dot_quote(f"{key[0].value}:{key[1]}")

        lines = ["digraph risks {", "  rankdir=LR;"]
        for node in self._sorted_nodes():
            shape, color = _DOT_STYLE[node.kind]
            lines.append(
                f"  {dot_id((node.kind, node.phrase))} "
                f'[label={_dot_quote(node.phrase)}, shape={shape}, '
                f'style=filled, fillcolor={_dot_quote(color)}];'
            )
        for edge in self._sorted_edges():
            lines.append(
                f"  {dot_id(edge.src)} -> {dot_id(edge.dst)} "
                f"[label={_dot_quote(edge.relation.value)}];"
            )
        lines.append("}")
        return "\n".join(lines) + "\n"

    def _export_json(self) -> str:
        doc = {
            "schema": "riskgraph/1",
            "nodes": [
                {
                    "kind": node.kind.value,
                    "phrase": node.phrase,
                    "risk_ids": sorted(node.risk_ids),
                }
                for node in self._sorted_nodes()
            ],
            "edges": [
                {
                    "relation": edge.relation.value,
                    "from": {"kind": edge.src[0].value, "phrase": edge.src[1]},
                    "to": {"kind": edge.dst[0].value, "phrase": edge.dst[1]},
                    "risk_ids": sorted(edge.risk_ids),
                }
                for edge in self._sorted_edges()
            ],
        }
        return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "KnowledgeGraph":
        doc = json.loads(text)
        if doc.get("schema") != "riskgraph/1":
            raise GraphError(f"unsupported graph schema {doc.get('schema')!r}")
        graph = cls()
        for nd in doc["nodes"]:
            key = (NodeKind(nd["kind"]), nd["phrase"])
            graph.nodes[key] = GraphNode(
                kind=key[0], phrase=key[1], risk_ids=set(nd["risk_ids"])
            )
        for ed in doc["edges"]:
            relation = Relation(ed["relation"])
            src = (NodeKind(ed["from"]["kind"]), ed["from"]["phrase"])
            dst = (NodeKind(ed["to"]["kind"]), ed["to"]["phrase"])
            for endpoint in (src, dst):
                if endpoint not in graph.nodes:
                    raise GraphError(f"edge endpoint missing from nodes: {endpoint}")
            if (src[0], dst[0]) != _RELATION_LAYERS[relation]:
                raise GraphError(f"layering violation in imported edge {ed}")
            graph.edges[(relation, src, dst)] = GraphEdge(
                relation=relation, src=src, dst=dst, risk_ids=set(ed["risk_ids"])
            )
        return graph


def build_graph(decompositions: list[RiskDecomposition]) -> tuple[KnowledgeGraph, list[str]]:
    """Build a graph from decompositions, returning it plus the risk ids
    rejected for insufficient structure."""
    graph = KnowledgeGraph()
    rejected = []
    for dec in decompositions:
        try:
            graph.add_risk(dec)
        except InsufficientStructure:
            rejected.append(dec.risk_id)
    return graph, rejected


def _dot_quote(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"')
    return f'"{escaped}"'
