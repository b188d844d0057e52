"""Versioned configuration control plane.

Immutable config versions, parameter-level diffs, a YAML-authored JSON-Schema
gate, and label-based dissemination to registered nodes, usable as a library,
an HTTP service, or through the bundled CLI.
"""

from confplane.diff import (
    Addition,
    AtomicDiff,
    Deletion,
    Modification,
    apply_group_diff,
    apply_param_set_diff,
    config_group_diff,
    param_set_diff,
    render_diff_json,
)
from confplane.dissemination import (
    Condition,
    Dissemination,
    LabelQuery,
    Node,
    Placement,
    match,
    parse_label_query,
)
from confplane.errors import (
    AlreadyExists,
    AlreadyRegistered,
    BindFailure,
    ConfigNotFound,
    ConflictingDiff,
    ControlPlaneError,
    DuplicateKey,
    InvalidIdentifier,
    InvalidLabels,
    InvalidQuery,
    InvalidSchema,
    MalformedYaml,
    NoMatchingNodes,
    NodeNotFound,
    NotFound,
    SchemaNotFound,
    StoreOpenFailure,
    UnsupportedYamlFeature,
    ValidationFailed,
    WrongShape,
)
from confplane.model import (
    ConfigGroup,
    ConfigId,
    StandaloneConfig,
    parse_group_yaml,
    parse_standalone_yaml,
    render_config_yaml,
    render_group_yaml,
    render_standalone_yaml,
    to_validation_document,
)
from confplane.plane import ControlPlane
from confplane.schemas import SchemaRecord, SchemaRegistry, Violation, translate_schema_yaml
from confplane.storage import KVStore
from confplane.versions import Timeline, VersionedRecord, VersionStore

__all__ = [
    "Addition",
    "AlreadyExists",
    "AlreadyRegistered",
    "AtomicDiff",
    "BindFailure",
    "Condition",
    "ConfigGroup",
    "ConfigId",
    "ConfigNotFound",
    "ConflictingDiff",
    "ControlPlane",
    "ControlPlaneError",
    "Deletion",
    "Dissemination",
    "DuplicateKey",
    "InvalidIdentifier",
    "InvalidLabels",
    "InvalidQuery",
    "InvalidSchema",
    "KVStore",
    "LabelQuery",
    "MalformedYaml",
    "Modification",
    "NoMatchingNodes",
    "Node",
    "NodeNotFound",
    "NotFound",
    "Placement",
    "SchemaNotFound",
    "SchemaRecord",
    "SchemaRegistry",
    "StandaloneConfig",
    "StoreOpenFailure",
    "Timeline",
    "UnsupportedYamlFeature",
    "ValidationFailed",
    "VersionStore",
    "VersionedRecord",
    "Violation",
    "WrongShape",
    "apply_group_diff",
    "apply_param_set_diff",
    "config_group_diff",
    "match",
    "param_set_diff",
    "parse_group_yaml",
    "parse_label_query",
    "parse_standalone_yaml",
    "render_config_yaml",
    "render_diff_json",
    "render_group_yaml",
    "render_standalone_yaml",
    "to_validation_document",
    "translate_schema_yaml",
]
