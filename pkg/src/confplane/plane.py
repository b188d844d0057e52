"""Single-process composition of the store-backed modules.

Embedders open a ControlPlane on a store file and get the schema registry,
version store and dissemination surfaces wired to one shared embedded store;
the HTTP service is a thin facade over exactly this object.
"""

from __future__ import annotations

from confplane.dissemination import Dissemination
from confplane.schemas import SchemaRegistry
from confplane.storage import KVStore
from confplane.versions import VersionStore

__all__ = ["ControlPlane"]


class ControlPlane:
    def __init__(self, store_path: str):
        self.kv = KVStore(store_path)
        self.schemas = SchemaRegistry(self.kv)
        self.configs = VersionStore(self.kv, self.schemas)
        self.fleet = Dissemination(self.kv, self.configs)

    def close(self) -> None:
        self.kv.close()

    def __enter__(self) -> "ControlPlane":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
