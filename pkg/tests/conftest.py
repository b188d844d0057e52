from __future__ import annotations

import pytest

from confplane.plane import ControlPlane


@pytest.fixture()
def store_path(tmp_path):
    return str(tmp_path / "store.db")


@pytest.fixture()
def plane(store_path):
    plane = ControlPlane(store_path)
    yield plane
    plane.close()
