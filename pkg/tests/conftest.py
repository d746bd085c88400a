"""Session fixtures: the materialized offline test world."""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

import fixture_world  # noqa: E402


@pytest.fixture(scope="session")
def world(tmp_path_factory) -> dict[str, Path]:
    """Corpus files, recorded replay store, and run configs on disk."""
    root = tmp_path_factory.mktemp("world")
    return fixture_world.build_world(root)


@pytest.fixture()
def entail_provider():
    return fixture_world.fixture_entailment()


@pytest.fixture()
def check_provider():
    return fixture_world.fixture_check()
