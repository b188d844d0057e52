"""Parameter-level diffs between configuration payloads.

A diff is a list of atomic changes, one per affected key: Addition, Deletion or
Modification.  Group diffs carry the same classification per named set.  Because
payloads are unordered key/value collections, diffing is purely set-based; two
documents that differ only in entry order produce an empty diff.

Apply functions invert a diff against a reference payload and refuse to proceed
when a change's recorded precondition no longer holds, so stale diffs fail loudly
instead of corrupting a payload.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from confplane.errors import ConflictingDiff

__all__ = [
    "Addition",
    "Deletion",
    "Modification",
    "AtomicDiff",
    "param_set_diff",
    "config_group_diff",
    "apply_param_set_diff",
    "apply_group_diff",
    "render_diff_json",
]


@dataclass(frozen=True)
class Addition:
    """Key present in the target but not in the reference."""

    key: str
    value: str


@dataclass(frozen=True)
class Deletion:
    """Key present in the reference but not in the target."""

    key: str
    value: str


@dataclass(frozen=True)
class Modification:
    """Key present in both sides with different values."""

    key: str
    old_value: str
    new_value: str

    def __post_init__(self) -> None:
        if self.old_value == self.new_value:
            raise ValueError(f"modification of {self.key!r} must change the value")


AtomicDiff = Union[Addition, Deletion, Modification]


def param_set_diff(
    ref: Mapping[str, str], target: Mapping[str, str]
) -> list[AtomicDiff]:
    """Classify every changed key between two parameter collections.

    Result order: additions and modifications sorted lexicographically by key,
    then deletions sorted lexicographically by key.  Unchanged keys produce
    nothing; identical payloads produce an empty list.
    """
    changes: list[AtomicDiff] = []
    for key in sorted(target):
        if key not in ref:
            changes.append(Addition(key, target[key]))
        elif ref[key] != target[key]:
            changes.append(Modification(key, ref[key], target[key]))
    for key in sorted(ref):
        if key not in target:
            changes.append(Deletion(key, ref[key]))
    return changes


def config_group_diff(
    ref: Mapping[str, Mapping[str, str]], target: Mapping[str, Mapping[str, str]]
) -> dict[str, list[AtomicDiff]]:
    """Diff two groups set by set, keyed by set name.

    A set only in the target contributes all its params as Additions; a set only
    in the reference contributes all its params as Deletions; a shared set
    contributes its param_set_diff.  Names with no changes are omitted, so
    identical groups produce an empty mapping.  Names appear in lexicographic
    order.
    """
    per_set: dict[str, list[AtomicDiff]] = {}
    for name in sorted(set(ref) | set(target)):
        if name not in ref:
            entry: list[AtomicDiff] = [
                Addition(k, v) for k, v in sorted(target[name].items())
            ]
        elif name not in target:
            entry = [Deletion(k, v) for k, v in sorted(ref[name].items())]
        else:
            entry = param_set_diff(ref[name], target[name])
        if entry:
            per_set[name] = entry
    return per_set


def apply_param_set_diff(
    ref: Mapping[str, str], changes: Iterable[AtomicDiff]
) -> dict[str, str]:
    """Apply atomic changes to a payload, checking each one's precondition.

    Additions require the key absent; deletions and modifications require the
    key present with the recorded stored value.  Raises ConflictingDiff on the
    first violated precondition, leaving the input untouched.
    """
    result = dict(ref)
    for change in changes:
        if isinstance(change, Addition):
            if change.key in result:
                raise ConflictingDiff(f"cannot add {change.key!r}: key already present")
            result[change.key] = change.value
        elif isinstance(change, Deletion):
            if change.key not in result:
                raise ConflictingDiff(f"cannot delete {change.key!r}: key absent")
            if result[change.key] != change.value:
                raise ConflictingDiff(
                    f"cannot delete {change.key!r}: stored value differs from recorded one"
                )
            del result[change.key]
        elif isinstance(change, Modification):
            if change.key not in result:
                raise ConflictingDiff(f"cannot modify {change.key!r}: key absent")
            if result[change.key] != change.old_value:
                raise ConflictingDiff(
                    f"cannot modify {change.key!r}: stored value differs from recorded one"
                )
            result[change.key] = change.new_value
        else:
            raise TypeError(f"not an atomic diff: {change!r}")
    return result


def apply_group_diff(
    ref: Mapping[str, Mapping[str, str]],
    changes: Mapping[str, Iterable[AtomicDiff]],
) -> dict[str, dict[str, str]]:
    """Apply a per-set diff mapping to a group payload.

    A named set springs into existence when additions target an absent name and
    disappears when its last parameter is deleted; sets without an entry pass
    through unchanged.
    """
    result = {name: dict(params) for name, params in ref.items()}
    for name, entry in changes.items():
        updated = apply_param_set_diff(result.get(name, {}), entry)
        if updated:
            result[name] = updated
        else:
            result.pop(name, None)
    return result


# ---------------------------------------------------------------------------
# JSON rendering

DiffResult = Union[Iterable[AtomicDiff], Mapping[str, Iterable[AtomicDiff]]]


def _fields(change: AtomicDiff) -> list[tuple[str, str]]:
    # wire field order is fixed: type, key, then the value fields
    if isinstance(change, Addition):
        return [("type", "Addition"), ("key", change.key), ("value", change.value)]
    if isinstance(change, Deletion):
        return [("type", "Deletion"), ("key", change.key), ("value", change.value)]
    if isinstance(change, Modification):
        return [
            ("type", "Modification"),
            ("key", change.key),
            ("oldValue", change.old_value),
            ("newValue", change.new_value),
        ]
    raise TypeError(f"not an atomic diff: {change!r}")


def _json_str(value: str) -> str:
    return json.dumps(value, ensure_ascii=False)


def _pretty_object(change: AtomicDiff, pad: str) -> str:
    rows = ",\n".join(
        f'{pad}    {_json_str(name)}: {_json_str(value)}' for name, value in _fields(change)
    )
    return f"{pad}{{\n{rows}\n{pad}}}"


def _pretty_array(changes: list[AtomicDiff], pad: str) -> str:
    # the closing bracket hugs the last object's brace
    body = ",\n".join(_pretty_object(c, pad) for c in changes)
    return f"[\n{body}]"


def render_diff_json(result: DiffResult, pretty: bool = True) -> str:
    """Render a diff result as JSON text.

    Pretty mode indents four spaces and keeps set names in lexicographic order;
    compact mode emits the same structure without any whitespace.  Atomic diff
    objects always carry their fields in the order type, key, value fields.
    """
    if isinstance(result, Mapping):
        named = {name: list(result[name]) for name in sorted(result)}
        if not pretty:
            doc = {name: [dict(_fields(c)) for c in entry] for name, entry in named.items()}
            return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)
        if not named:
            return "{}"
        parts = []
        for name, entry in named.items():
            rendered = "[]" if not entry else _pretty_array(entry, " " * 8)
            parts.append(f"    {_json_str(name)}: {rendered}")
        return "{\n" + ",\n".join(parts) + "\n}"

    changes = list(result)
    if not pretty:
        return json.dumps(
            [dict(_fields(c)) for c in changes], separators=(",", ":"), ensure_ascii=False
        )
    if not changes:
        return "[]"
    return _pretty_array(changes, " " * 4)
