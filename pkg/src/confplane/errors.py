"""Exception types shared across the control plane.

Every failure the library signals deliberately derives from ControlPlaneError so
callers (and the HTTP layer) can map the whole family in one place.  Anything
else escaping the package is a bug.
"""

from __future__ import annotations

__all__ = [
    "ControlPlaneError",
    "InvalidIdentifier",
    "MalformedYaml",
    "WrongShape",
    "DuplicateKey",
    "UnsupportedYamlFeature",
    "NotFound",
    "ConfigNotFound",
    "SchemaNotFound",
    "NodeNotFound",
    "AlreadyExists",
    "AlreadyRegistered",
    "InvalidSchema",
    "ValidationFailed",
    "ConflictingDiff",
    "InvalidLabels",
    "InvalidQuery",
    "NoMatchingNodes",
    "StoreOpenFailure",
    "BindFailure",
]


class ControlPlaneError(Exception):
    """Base class for every error raised on purpose by this package."""


class InvalidIdentifier(ControlPlaneError):
    """An identity component is empty or contains a path separator."""


class MalformedYaml(ControlPlaneError):
    """Input text does not parse as YAML at all."""


class WrongShape(ControlPlaneError):
    """YAML parsed, but its structure does not fit the requested config kind."""


class DuplicateKey(ControlPlaneError):
    """A mapping repeats a key, either verbatim or after canonicalization."""


class UnsupportedYamlFeature(ControlPlaneError):
    """Schema source uses a YAML construct outside the accepted dialect."""


class NotFound(ControlPlaneError):
    """The referenced resource does not exist."""


class ConfigNotFound(NotFound):
    pass


class SchemaNotFound(NotFound):
    pass


class NodeNotFound(NotFound):
    pass


class AlreadyExists(ControlPlaneError):
    """The identity is already taken; stored versions are immutable."""


class AlreadyRegistered(AlreadyExists):
    pass


class InvalidSchema(ControlPlaneError):
    """The document is not a usable JSON-Schema. Carries meta-schema violations."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class ValidationFailed(ControlPlaneError):
    """A config was rejected by its bound schema. Carries the violation list."""

    def __init__(self, message: str, violations):
        super().__init__(message)
        self.violations = list(violations)


class ConflictingDiff(ControlPlaneError):
    """A diff's recorded precondition does not hold against the payload."""


class InvalidLabels(ControlPlaneError):
    """A label collection repeats a key or uses an unsupported value type."""


class InvalidQuery(ControlPlaneError):
    """A label query is empty or structurally unusable."""


class NoMatchingNodes(ControlPlaneError):
    """A dissemination matched zero nodes; nothing was recorded."""


class StoreOpenFailure(ControlPlaneError):
    """The embedded store file could not be opened."""


class BindFailure(ControlPlaneError):
    """The service could not bind its listen address."""
