"""Node registry, label-based selection, and config placement.

Nodes carry typed labels (string, 64-bit float, boolean).  A label query is a
conjunction of per-key conditions; a condition on an absent key or on a value
of a different type is simply false, never an error.  Disseminating a config
snapshots the matching node set into an immutable placement record, so later
label edits never rewrite who a past dissemination addressed.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Optional, Union

from confplane.errors import (
    AlreadyRegistered,
    ConfigNotFound,
    InvalidLabels,
    InvalidQuery,
    NodeNotFound,
    NoMatchingNodes,
    NotFound,
)
from confplane.model import ConfigId, canonical_json, check_identifier
from confplane.storage import KeyExists, KVStore
from confplane.versions import VersionedRecord, VersionStore

__all__ = [
    "LabelValue",
    "Node",
    "Condition",
    "LabelQuery",
    "Placement",
    "normalize_labels",
    "parse_label_query",
    "match",
    "Dissemination",
]

LabelValue = Union[str, float, bool]

_ORDER_OPS = (">", "<", ">=", "<=")
_ALL_OPS = ("=", "!=") + _ORDER_OPS
_CONDITION = re.compile(r"(.*?)(>=|<=|!=|[=<>])(.*)", re.DOTALL)


def _type_tag(value: LabelValue) -> str:
    # bool first: it would otherwise pass the float check
    if isinstance(value, bool):
        return "boolean"
    if isinstance(value, float):
        return "float"
    return "string"


def _normalize_value(value: Any) -> LabelValue:
    if isinstance(value, bool):
        return value
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return value
    raise InvalidLabels(
        f"label value {value!r} must be a string, number or boolean"
    )


def normalize_labels(
    labels: Union[Mapping[str, Any], Iterable[tuple[str, Any]]],
) -> dict[str, LabelValue]:
    """Coerce label input to the typed form, rejecting duplicate keys."""
    items = labels.items() if isinstance(labels, Mapping) else list(labels)
    out: dict[str, LabelValue] = {}
    for key, value in items:
        if not isinstance(key, str) or not key:
            raise InvalidLabels(f"label key must be a non-empty string, got {key!r}")
        if key in out:
            raise InvalidLabels(f"duplicate label key {key!r}")
        out[key] = _normalize_value(value)
    return out


@dataclass(frozen=True)
class Node:
    node_id: str
    organization: str
    labels: dict[str, LabelValue]

    def to_json(self) -> dict[str, Any]:
        return {
            "labels": dict(sorted(self.labels.items())),
            "nodeId": self.node_id,
            "organization": self.organization,
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "Node":
        return cls(doc["nodeId"], doc["organization"], normalize_labels(doc["labels"]))


@dataclass(frozen=True)
class Condition:
    key: str
    op: str
    value: LabelValue

    def __post_init__(self) -> None:
        if not self.key:
            raise InvalidQuery("condition key must be non-empty")
        if self.op not in _ALL_OPS:
            raise InvalidQuery(f"unknown operator {self.op!r}")
        if self.op in _ORDER_OPS and _type_tag(self.value) != "float":
            raise InvalidQuery(
                f"operator {self.op!r} needs a numeric value, got {self.value!r}"
            )


@dataclass(frozen=True)
class LabelQuery:
    conditions: tuple[Condition, ...]

    def __post_init__(self) -> None:
        if not self.conditions:
            raise InvalidQuery("a label query needs at least one condition")


def parse_label_query(text: str) -> LabelQuery:
    """Parse the comma-conjunction query syntax, e.g. ``region=eu,cores>4``.

    Condition values parse as boolean for ``true``/``false``, as float when
    numeric, and as string otherwise.
    """
    conditions = []
    for part in text.split(","):
        part = part.strip()
        matched = _CONDITION.fullmatch(part)
        if not matched:
            raise InvalidQuery(f"cannot parse condition {part!r}")
        key, op, raw = matched.group(1).strip(), matched.group(2), matched.group(3).strip()
        value: LabelValue
        if raw in ("true", "false"):
            value = raw == "true"
        else:
            try:
                value = float(raw)
            except ValueError:
                value = raw
        conditions.append(Condition(key, op, value))
    return LabelQuery(tuple(conditions))


def _holds(condition: Condition, labels: Mapping[str, LabelValue]) -> bool:
    if condition.key not in labels:
        return False
    actual = labels[condition.key]
    if _type_tag(actual) != _type_tag(condition.value):
        return False
    if condition.op == "=":
        return actual == condition.value
    if condition.op == "!=":
        return actual != condition.value
    assert isinstance(actual, float) and isinstance(condition.value, float)
    if condition.op == ">":
        return actual > condition.value
    if condition.op == "<":
        return actual < condition.value
    if condition.op == ">=":
        return actual >= condition.value
    return actual <= condition.value


def match(query: LabelQuery, node: Node) -> bool:
    """True when every condition holds against the node's labels."""
    return all(_holds(condition, node.labels) for condition in query.conditions)


@dataclass(frozen=True)
class Placement:
    """Immutable record of one dissemination: which config went to which nodes."""

    config_id: ConfigId
    kind: str
    namespace: str
    node_ids: tuple[str, ...]
    placed_seq: int

    def to_json(self) -> dict[str, Any]:
        return {
            "configId": {
                "name": self.config_id.name,
                "organization": self.config_id.organization,
                "version": self.config_id.version,
            },
            "kind": self.kind,
            "namespace": self.namespace,
            "nodeIds": list(self.node_ids),
            "placedSeq": self.placed_seq,
        }

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "Placement":
        cid = doc["configId"]
        return cls(
            config_id=ConfigId(cid["organization"], cid["name"], cid["version"]),
            kind=doc["kind"],
            namespace=doc["namespace"],
            node_ids=tuple(doc["nodeIds"]),
            placed_seq=doc["placedSeq"],
        )


def _seq_key(seq: int) -> str:
    # zero-padded so key order equals sequence order under prefix scans
    return f"{seq:020d}"


class Dissemination:
    """Placement bookkeeping on top of the node registry and version store."""

    def __init__(self, kv: KVStore, versions: VersionStore):
        self._kv = kv
        self._versions = versions

    # -- node registry --------------------------------------------------------

    def register_node(
        self,
        node_id: str,
        organization: str,
        labels: Union[Mapping[str, Any], Iterable[tuple[str, Any]]] = (),
    ) -> Node:
        check_identifier(node_id, "node id")
        check_identifier(organization, "organization")
        node = Node(node_id, organization, normalize_labels(labels))
        with self._kv.transact() as txn:
            try:
                txn.insert(f"node/{node_id}", canonical_json(node.to_json()))
            except KeyExists:
                raise AlreadyRegistered(f"node {node_id!r} is already registered") from None
        return node

    def get_node(self, node_id: str) -> Node:
        raw = self._kv.get(f"node/{node_id}")
        if raw is None:
            raise NodeNotFound(f"node {node_id!r} is not registered")
        return Node.from_json(json.loads(raw))

    def set_labels(
        self, node_id: str, labels: Union[Mapping[str, Any], Iterable[tuple[str, Any]]]
    ) -> Node:
        """Replace a node's whole label set."""
        normalized = normalize_labels(labels)
        with self._kv.transact() as txn:
            raw = txn.get(f"node/{node_id}")
            if raw is None:
                raise NodeNotFound(f"node {node_id!r} is not registered")
            node = Node.from_json(json.loads(raw))
            updated = Node(node.node_id, node.organization, normalized)
            txn.put(f"node/{node_id}", canonical_json(updated.to_json()))
        return updated

    def select_nodes(
        self, organization: str, query: Optional[LabelQuery] = None
    ) -> list[Node]:
        """Organization's nodes matching the query (all of them when query is None)."""
        nodes = self._load_nodes(self._kv, organization)
        if query is not None:
            nodes = [node for node in nodes if match(query, node)]
        return nodes

    @staticmethod
    def _load_nodes(readable, organization: str) -> list[Node]:
        nodes = [
            Node.from_json(json.loads(value)) for _, value in readable.scan("node/")
        ]
        picked = [node for node in nodes if node.organization == organization]
        picked.sort(key=lambda node: node.node_id)
        return picked

    # -- placements -----------------------------------------------------------

    def disseminate(
        self,
        config_id: ConfigId,
        kind: str,
        namespace: str,
        query: Optional[LabelQuery] = None,
    ) -> Placement:
        """Snapshot the matching node set and record the placement.

        A query of None selects every node of the owning organization.
        Selection and recording happen in one write transaction, so a concurrent
        label change lands either entirely before or entirely after.
        """
        check_identifier(namespace, "namespace")
        try:
            self._versions.get_config(config_id, kind)
        except NotFound as exc:
            raise ConfigNotFound(str(exc)) from None
        with self._kv.transact() as txn:
            candidates = self._load_nodes(txn, config_id.organization)
            if query is None:
                matched = candidates
            else:
                matched = [node for node in candidates if match(query, node)]
            if not matched:
                raise NoMatchingNodes(
                    f"no nodes in {config_id.organization!r} match the query"
                )
            seq = txn.next_seq()
            placement = Placement(
                config_id=config_id,
                kind=kind,
                namespace=namespace,
                node_ids=tuple(node.node_id for node in matched),
                placed_seq=seq,
            )
            plc_key = f"plc/{_seq_key(seq)}"
            txn.insert(plc_key, canonical_json(placement.to_json()))
            for node in matched:
                txn.insert(f"plcidx/{node.node_id}/{namespace}/{_seq_key(seq)}", plc_key)
        return placement

    def fetch_config(
        self, node_id: str, namespace: str, name: Optional[str] = None
    ) -> list[VersionedRecord]:
        """Configs placed for one node in one namespace, in placement order.

        Placements outside the node's namespaces are invisible here; re-issued
        placements of the same version show up once per placement.
        """
        self.get_node(node_id)
        check_identifier(namespace, "namespace")
        records = []
        for _, plc_key in self._kv.scan(f"plcidx/{node_id}/{namespace}/"):
            placement = Placement.from_json(json.loads(self._kv.get(plc_key)))
            if name is not None and placement.config_id.name != name:
                continue
            records.append(
                self._versions.get_config(placement.config_id, placement.kind)
            )
        return records
