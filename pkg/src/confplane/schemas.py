"""Schema registry: YAML-authored JSON-Schema documents and the validation gate.

Schema sources are written in YAML for the same ergonomic reasons configs are,
then translated one-to-one into JSON documents with native scalar types kept
intact (unlike config payloads, which are string-canonicalized).  Stored schema
versions are immutable.  Validation runs under JSON-Schema draft 2020-12 and
reports every violation, not just the first.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any

import jsonschema
from jsonschema import Draft202012Validator

from confplane.errors import (
    AlreadyExists,
    DuplicateKey,
    InvalidSchema,
    MalformedYaml,
    NotFound,
    SchemaNotFound,
    UnsupportedYamlFeature,
)
from confplane.model import ConfigId, canonical_json, load_yaml
from confplane.storage import KeyExists, KVStore

__all__ = ["Violation", "SchemaRecord", "SchemaRegistry", "translate_schema_yaml"]

_REQUIRED_MSG = re.compile(r"'(.*)' is a required property")
_META = Draft202012Validator(Draft202012Validator.META_SCHEMA)


@dataclass(frozen=True)
class Violation:
    """One failed schema rule.

    ``path`` locates the offending value from the document root, slash-separated
    with "" meaning the root itself; for failed ``required`` rules it names the
    missing member instead.  ``rule`` is the JSON-Schema keyword that failed.
    """

    path: str
    rule: str
    message: str

    def to_json(self) -> dict[str, str]:
        return {"message": self.message, "path": self.path, "rule": self.rule}


@dataclass(frozen=True)
class SchemaRecord:
    id: ConfigId
    source_yaml: str
    compiled: Any
    created_seq: int

    def to_json(self) -> dict[str, Any]:
        return {
            "compiled": self.compiled,
            "createdSeq": self.created_seq,
            "name": self.id.name,
            "organization": self.id.organization,
            "sourceYaml": self.source_yaml,
            "version": self.id.version,
        }


def _check_json_shape(node: Any, path: str) -> None:
    if isinstance(node, dict):
        for key, value in node.items():
            if not isinstance(key, str):
                raise UnsupportedYamlFeature(
                    f"non-string mapping key {key!r} at {path or '/'}"
                )
            _check_json_shape(value, f"{path}/{key}")
    elif isinstance(node, list):
        for index, value in enumerate(node):
            _check_json_shape(value, f"{path}/{index}")
    elif not isinstance(node, (str, int, float, bool, type(None))):
        raise UnsupportedYamlFeature(
            f"value of type {type(node).__name__} at {path or '/'} is outside the schema dialect"
        )


def translate_schema_yaml(text: str) -> Any:
    """Translate schema YAML into the equivalent JSON document.

    Scalars keep their native types (``minimum: 0`` stays numeric).  Tags and
    non-string mapping keys fall outside the dialect; duplicate keys make the
    document malformed.
    """
    try:
        doc = load_yaml(text, UnsupportedYamlFeature)
    except DuplicateKey as exc:
        raise MalformedYaml(str(exc)) from exc
    _check_json_shape(doc, "")
    return doc


def _meta_violation(error: jsonschema.exceptions.ValidationError) -> Violation:
    path = "".join(f"/{part}" for part in error.absolute_path)
    return Violation(path=path, rule=str(error.validator), message=error.message)


def _find_remote_refs(node: Any, path: str, found: list[Violation]) -> None:
    if isinstance(node, dict):
        ref = node.get("$ref")
        if isinstance(ref, str) and not ref.startswith("#"):
            found.append(
                Violation(
                    path=f"{path}/$ref",
                    rule="$ref",
                    message=f"remote reference {ref!r} is not resolvable; only intra-document '#' references are supported",
                )
            )
        for key, value in node.items():
            _find_remote_refs(value, f"{path}/{key}", found)
    elif isinstance(node, list):
        for index, value in enumerate(node):
            _find_remote_refs(value, f"{path}/{index}", found)


class SchemaRegistry:
    """Immutable, versioned schema storage plus the validation gate."""

    def __init__(self, kv: KVStore):
        self._kv = kv
        self._validators: dict[str, Draft202012Validator] = {}

    @staticmethod
    def _key(schema_id: ConfigId) -> str:
        return f"sch/{schema_id.organization}/{schema_id.name}/{schema_id.version}"

    def store_schema(self, schema_id: ConfigId, source_yaml: str) -> SchemaRecord:
        """Translate, meta-validate and persist one schema version.

        Rejects documents that are not valid draft 2020-12 schemas before
        anything is written; a taken identity raises AlreadyExists.
        """
        compiled = translate_schema_yaml(source_yaml)
        problems = sorted(
            (_meta_violation(e) for e in _META.iter_errors(compiled)),
            key=lambda v: (v.path, v.rule, v.message),
        )
        _find_remote_refs(compiled, "", problems)
        if problems:
            raise InvalidSchema(
                f"not a valid 2020-12 schema: {problems[0].message}", problems
            )
        with self._kv.transact() as txn:
            seq = txn.next_seq()
            record = SchemaRecord(schema_id, source_yaml, compiled, seq)
            try:
                txn.insert(self._key(schema_id), canonical_json(record.to_json()))
            except KeyExists:
                raise AlreadyExists(
                    f"schema {schema_id} already exists; versions are immutable"
                ) from None
        return record

    def get_schema(self, schema_id: ConfigId) -> SchemaRecord:
        raw = self._kv.get(self._key(schema_id))
        if raw is None:
            raise SchemaNotFound(f"schema {schema_id} not found")
        return self._from_json(json.loads(raw))

    def schema_history(self, organization: str, name: str) -> list[SchemaRecord]:
        """All stored versions under (organization, name), oldest first."""
        rows = self._kv.scan(f"sch/{organization}/{name}/")
        records = sorted(
            (self._from_json(json.loads(value)) for _, value in rows),
            key=lambda r: r.created_seq,
        )
        if not records:
            raise NotFound(f"no schema versions under {organization}/{name}")
        return records

    def delete_schema(self, schema_id: ConfigId) -> None:
        with self._kv.transact() as txn:
            if not txn.delete(self._key(schema_id)):
                raise SchemaNotFound(f"schema {schema_id} not found")
        self._validators.pop(str(schema_id), None)

    def validate(self, document: Any, schema_id: ConfigId) -> list[Violation]:
        """Exhaustively check a document against a stored schema.

        Returns every violation found (empty list means valid); the document is
        never modified.
        """
        validator = self._validator(schema_id)
        violations = []
        for error in validator.iter_errors(document):
            path = "".join(f"/{part}" for part in error.absolute_path)
            rule = "schema" if error.validator is None else str(error.validator)
            if rule == "required":
                matched = _REQUIRED_MSG.fullmatch(error.message)
                if matched:
                    path = f"{path}/{matched.group(1)}"
            violations.append(Violation(path=path, rule=rule, message=error.message))
        return sorted(violations, key=lambda v: (v.path, v.rule, v.message))

    def _validator(self, schema_id: ConfigId) -> Draft202012Validator:
        cached = self._validators.get(str(schema_id))
        if cached is not None:
            return cached
        record = self.get_schema(schema_id)
        validator = Draft202012Validator(record.compiled)
        self._validators[str(schema_id)] = validator
        return validator

    @staticmethod
    def _from_json(doc: dict[str, Any]) -> SchemaRecord:
        return SchemaRecord(
            id=ConfigId(doc["organization"], doc["name"], doc["version"]),
            source_yaml=doc["sourceYaml"],
            compiled=doc["compiled"],
            created_seq=doc["createdSeq"],
        )
