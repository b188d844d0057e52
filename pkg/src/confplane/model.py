"""Configuration documents: identities, payloads, YAML parsing and rendering.

A standalone config is a flat string-to-string parameter collection; a config
group is a collection of named parameter sets.  Parameter values are strings by
definition, so scalars read from YAML are canonicalized to text at the parsing
boundary (``3`` becomes ``"3"``, ``true`` becomes ``"true"``).  Rendering always
double-quotes values, which keeps the canonicalization lossless: a rendered
document parses back to the identical payload.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Any, Mapping, Union

import yaml

from confplane.errors import (
    DuplicateKey,
    InvalidIdentifier,
    MalformedYaml,
    UnsupportedYamlFeature,
    WrongShape,
)

__all__ = [
    "KIND_STANDALONE",
    "KIND_GROUP",
    "ConfigId",
    "StandaloneConfig",
    "ConfigGroup",
    "Config",
    "canonical_json",
    "check_identifier",
    "parse_standalone_yaml",
    "parse_group_yaml",
    "render_standalone_yaml",
    "render_group_yaml",
    "render_config_yaml",
    "standalone_document",
    "group_document",
    "to_validation_document",
]

KIND_STANDALONE = "standalone"
KIND_GROUP = "group"


def canonical_json(document: Any) -> str:
    """Serialize a JSON document with lexicographic member order, no whitespace."""
    return json.dumps(document, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def check_identifier(value: object, what: str) -> str:
    """Reject empty identity components and ones containing '/'.

    Identity parts double as storage-key and URL segments, so the separator
    character is forbidden outright rather than escaped.
    """
    if not isinstance(value, str) or not value:
        raise InvalidIdentifier(f"{what} must be a non-empty string")
    if "/" in value:
        raise InvalidIdentifier(f"{what} must not contain '/': {value!r}")
    return value


@dataclass(frozen=True)
class ConfigId:
    """Identity triple for stored resources; equality is case-sensitive."""

    organization: str
    name: str
    version: str

    def __post_init__(self) -> None:
        check_identifier(self.organization, "organization")
        check_identifier(self.name, "name")
        check_identifier(self.version, "version")

    def __str__(self) -> str:
        return f"{self.organization}/{self.name}/{self.version}"

    @classmethod
    def parse(cls, text: str) -> "ConfigId":
        parts = text.split("/")
        if len(parts) != 3:
            raise InvalidIdentifier(
                f"expected organization/name/version, got {text!r}"
            )
        return cls(*parts)


@dataclass(frozen=True)
class StandaloneConfig:
    id: ConfigId
    params: dict[str, str]

    @property
    def kind(self) -> str:
        return KIND_STANDALONE


@dataclass(frozen=True)
class ConfigGroup:
    id: ConfigId
    # named param sets, unique by name
    sets: dict[str, dict[str, str]]

    @property
    def kind(self) -> str:
        return KIND_GROUP


Config = Union[StandaloneConfig, ConfigGroup]


# ---------------------------------------------------------------------------
# YAML loading

class _StrictLoader(yaml.SafeLoader):
    """SafeLoader that refuses duplicate mapping keys instead of last-wins."""

    def construct_mapping(self, node, deep=False):
        self.flatten_mapping(node)
        seen = set()
        for key_node, _ in node.value:
            key = self.construct_object(key_node, deep=True)
            try:
                fresh = key not in seen
            except TypeError as exc:  # unhashable composite key
                raise WrongShape(f"mapping key {key!r} is not a scalar") from exc
            if not fresh:
                raise DuplicateKey(f"duplicate mapping key {key!r}")
            seen.add(key)
        return super().construct_mapping(node, deep=deep)


def load_yaml(text: str, tag_error: type[Exception]) -> Any:
    """Parse one YAML document; anchors/aliases resolve, tags raise ``tag_error``."""
    try:
        return yaml.load(text, Loader=_StrictLoader)
    except (DuplicateKey, WrongShape):
        raise
    except yaml.constructor.ConstructorError as exc:
        raise tag_error(f"unsupported YAML construct: {exc.problem}") from exc
    except yaml.YAMLError as exc:
        raise MalformedYaml(f"not valid YAML: {exc}") from exc


def _canonical_scalar(value: Any, where: str, error: type[Exception]) -> str:
    """Canonical string form of a YAML scalar.

    Only the core scalar kinds are accepted; dates, binary blobs and anything
    tag-derived fall outside the supported dialect.
    """
    if isinstance(value, str):
        return value
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return str(value)
    raise error(f"{where} has unsupported YAML type {type(value).__name__}")


def _parse_flat_mapping(raw: Any, where: str) -> dict[str, str]:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise WrongShape(f"{where} must be a mapping of scalars, got {type(raw).__name__}")
    params: dict[str, str] = {}
    for key, value in raw.items():
        name = _canonical_scalar(key, f"key in {where}", WrongShape)
        if not name:
            raise WrongShape(f"empty parameter key in {where}")
        if isinstance(value, (dict, list)):
            raise WrongShape(f"parameter {name!r} in {where} must be a scalar")
        if name in params:
            # distinct raw keys can collapse to one canonical key (3 vs "3")
            raise DuplicateKey(f"duplicate parameter key {name!r} in {where}")
        params[name] = _canonical_scalar(value, f"parameter {name!r} in {where}", WrongShape)
    return params


def parse_standalone_yaml(text: str) -> dict[str, str]:
    """Parse a flat key/value YAML document into a standalone config payload.

    An empty document yields an empty payload.  Raises MalformedYaml, WrongShape
    or DuplicateKey.
    """
    raw = load_yaml(text, WrongShape)
    return _parse_flat_mapping(raw, "standalone config")


def parse_group_yaml(text: str) -> dict[str, dict[str, str]]:
    """Parse a two-level YAML document into named param sets.

    Top-level keys are set names; each value is a flat scalar mapping (or empty).
    """
    raw = load_yaml(text, WrongShape)
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise WrongShape(f"config group must be a mapping of named sets, got {type(raw).__name__}")
    sets: dict[str, dict[str, str]] = {}
    for key, value in raw.items():
        name = _canonical_scalar(key, "set name", WrongShape)
        if not name:
            raise WrongShape("empty set name in config group")
        if value is not None and not isinstance(value, dict):
            raise WrongShape(f"named set {name!r} must be a mapping of scalars")
        if name in sets:
            raise DuplicateKey(f"duplicate set name {name!r}")
        sets[name] = _parse_flat_mapping(value, f"set {name!r}")
    return sets


# ---------------------------------------------------------------------------
# Rendering

# keys that could be re-resolved as booleans or null must stay quoted
_AMBIGUOUS_PLAIN = frozenset(
    {"true", "false", "yes", "no", "on", "off", "null", "y", "n", "none"}
)
_PLAIN_KEY = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
# code points pyyaml's reader refuses even inside quotes
_UNPRINTABLE = re.compile("[\x7f-\xa0\ud800-\udfff￾￿]")


def _quote(text: str) -> str:
    out = json.dumps(text, ensure_ascii=False)
    return _UNPRINTABLE.sub(lambda m: "\\u%04x" % ord(m.group()), out)


def _render_key(key: str) -> str:
    if _PLAIN_KEY.fullmatch(key) and key.lower() not in _AMBIGUOUS_PLAIN:
        return key
    return _quote(key)


def render_standalone_yaml(params: Mapping[str, str]) -> str:
    """Render a standalone payload as YAML, keys lexicographic, values quoted."""
    if not params:
        return "{}\n"
    return "".join(f"{_render_key(k)}: {_quote(params[k])}\n" for k in sorted(params))


def render_group_yaml(sets: Mapping[str, Mapping[str, str]]) -> str:
    """Render a group payload as two-level YAML, names and keys lexicographic."""
    if not sets:
        return "{}\n"
    lines: list[str] = []
    for name in sorted(sets):
        params = sets[name]
        if not params:
            lines.append(f"{_render_key(name)}: {{}}\n")
            continue
        lines.append(f"{_render_key(name)}:\n")
        lines.extend(f"    {_render_key(k)}: {_quote(params[k])}\n" for k in sorted(params))
    return "".join(lines)


def render_config_yaml(config: Config) -> str:
    if isinstance(config, StandaloneConfig):
        return render_standalone_yaml(config.params)
    return render_group_yaml(config.sets)


# ---------------------------------------------------------------------------
# Validation documents

def standalone_document(params: Mapping[str, str]) -> dict[str, str]:
    """JSON object handed to the schema gate for a standalone payload."""
    return {k: params[k] for k in sorted(params)}


def group_document(sets: Mapping[str, Mapping[str, str]]) -> dict[str, dict[str, str]]:
    """Two-level JSON object handed to the schema gate for a group payload."""
    return {name: standalone_document(sets[name]) for name in sorted(sets)}


def to_validation_document(config: Config) -> dict:
    if isinstance(config, StandaloneConfig):
        return standalone_document(config.params)
    return group_document(config.sets)
