"""Immutable version store for configuration documents.

Each (organization, name, version) identity of a kind is written exactly once:
a second put of the same identity is refused rather than overwritten, so every
version that was ever acknowledged stays readable forever.  A store-assigned
monotonic sequence number orders versions within a timeline; version strings
themselves carry no ordering semantics.
"""

from __future__ import annotations

import datetime
import json
from dataclasses import dataclass
from typing import Any, Optional, Union

from confplane.diff import AtomicDiff, config_group_diff, param_set_diff
from confplane.errors import AlreadyExists, NotFound, ValidationFailed
from confplane.model import (
    KIND_GROUP,
    KIND_STANDALONE,
    Config,
    ConfigGroup,
    ConfigId,
    StandaloneConfig,
    canonical_json,
    to_validation_document,
)
from confplane.schemas import SchemaRegistry
from confplane.storage import KeyExists, KVStore

__all__ = ["VersionedRecord", "Timeline", "VersionStore"]

_KINDS = (KIND_STANDALONE, KIND_GROUP)


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


@dataclass(frozen=True)
class VersionedRecord:
    """One immutable stored config version."""

    config: Config
    created_seq: int
    created_at: str
    schema_ref: Optional[ConfigId]

    @property
    def id(self) -> ConfigId:
        return self.config.id

    @property
    def kind(self) -> str:
        return self.config.kind

    def to_json(self) -> dict[str, Any]:
        doc: dict[str, Any] = {
            "createdAt": self.created_at,
            "createdSeq": self.created_seq,
            "kind": self.kind,
            "name": self.id.name,
            "organization": self.id.organization,
            "schemaRef": None if self.schema_ref is None else str(self.schema_ref),
            "version": self.id.version,
        }
        if isinstance(self.config, StandaloneConfig):
            doc["params"] = dict(sorted(self.config.params.items()))
        else:
            doc["namedParamSets"] = [
                {"name": name, "params": dict(sorted(params.items()))}
                for name, params in sorted(self.config.sets.items())
            ]
        return doc

    @classmethod
    def from_json(cls, doc: dict[str, Any]) -> "VersionedRecord":
        config_id = ConfigId(doc["organization"], doc["name"], doc["version"])
        if doc["kind"] == KIND_STANDALONE:
            config: Config = StandaloneConfig(config_id, dict(doc["params"]))
        else:
            config = ConfigGroup(
                config_id,
                {entry["name"]: dict(entry["params"]) for entry in doc["namedParamSets"]},
            )
        ref = doc.get("schemaRef")
        return cls(
            config=config,
            created_seq=doc["createdSeq"],
            created_at=doc["createdAt"],
            schema_ref=None if ref is None else ConfigId.parse(ref),
        )


@dataclass(frozen=True)
class Timeline:
    organization: str
    name: str
    kind: str
    entries: list[VersionedRecord]  # ascending by created_seq

    def to_json(self) -> dict[str, Any]:
        return {
            "entries": [record.to_json() for record in self.entries],
            "kind": self.kind,
            "name": self.name,
            "organization": self.organization,
        }


class VersionStore:
    """Put-once storage with timelines and version-to-version diffs."""

    def __init__(self, kv: KVStore, schemas: SchemaRegistry):
        self._kv = kv
        self._schemas = schemas

    @staticmethod
    def _key(kind: str, config_id: ConfigId) -> str:
        return f"cfg/{kind}/{config_id.organization}/{config_id.name}/{config_id.version}"

    def put_config(
        self, config: Config, schema_ref: Optional[ConfigId] = None
    ) -> VersionedRecord:
        """Validate (when a schema is bound) and persist one config version.

        Nothing is written unless the gate passes and the identity is free, so
        a rejected put leaves the store byte-identical.
        """
        if schema_ref is not None:
            violations = self._schemas.validate(to_validation_document(config), schema_ref)
            if violations:
                raise ValidationFailed(
                    f"config {config.id} failed validation against {schema_ref}", violations
                )
        with self._kv.transact() as txn:
            seq = txn.next_seq()
            record = VersionedRecord(config, seq, _utc_now(), schema_ref)
            try:
                txn.insert(self._key(config.kind, config.id), canonical_json(record.to_json()))
            except KeyExists:
                raise AlreadyExists(
                    f"{config.kind} config {config.id} already exists; versions are immutable"
                ) from None
        return record

    def get_config(self, config_id: ConfigId, kind: str) -> VersionedRecord:
        _check_kind(kind)
        raw = self._kv.get(self._key(kind, config_id))
        if raw is None:
            raise NotFound(f"{kind} config {config_id} not found")
        return VersionedRecord.from_json(json.loads(raw))

    def timeline(self, organization: str, name: str, kind: str) -> Timeline:
        """Every stored version under (organization, name), in put order."""
        _check_kind(kind)
        rows = self._kv.scan(f"cfg/{kind}/{organization}/{name}/")
        entries = sorted(
            (VersionedRecord.from_json(json.loads(value)) for _, value in rows),
            key=lambda record: record.created_seq,
        )
        if not entries:
            raise NotFound(f"no {kind} config versions under {organization}/{name}")
        return Timeline(organization, name, kind, entries)

    def diff_versions(
        self, ref_id: ConfigId, target_id: ConfigId, kind: str
    ) -> Union[list[AtomicDiff], dict[str, list[AtomicDiff]]]:
        """Diff two stored versions of one kind; identities may differ."""
        ref = self.get_config(ref_id, kind)
        target = self.get_config(target_id, kind)
        if kind == KIND_STANDALONE:
            assert isinstance(ref.config, StandaloneConfig)
            assert isinstance(target.config, StandaloneConfig)
            return param_set_diff(ref.config.params, target.config.params)
        assert isinstance(ref.config, ConfigGroup)
        assert isinstance(target.config, ConfigGroup)
        return config_group_diff(ref.config.sets, target.config.sets)

    def list_names(self, organization: str, kind: str) -> list[str]:
        """Distinct config names stored under an organization, sorted."""
        _check_kind(kind)
        prefix = f"cfg/{kind}/{organization}/"
        names = {key[len(prefix):].split("/", 1)[0] for key, _ in self._kv.scan(prefix)}
        return sorted(names)


def _check_kind(kind: str) -> None:
    if kind not in _KINDS:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
