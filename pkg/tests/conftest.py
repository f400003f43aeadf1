"""Shared fixtures: one synthetic workspace built once per session.

The full pipeline over the 1,391-entry corpus takes a few seconds, so
suites that only read share `built_workspace`; anything that mutates
takes a `workspace_copy` (the state directory is small, copying is
cheap).
"""

import shutil

import pytest

from kevtriage import cli
from kevtriage.fixtures import write_workspace_inputs


@pytest.fixture(scope="session")
def fixture_inputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("inputs")
    return write_workspace_inputs(root)


@pytest.fixture(scope="session")
def built_workspace(tmp_path_factory, fixture_inputs):
    ws = str(tmp_path_factory.mktemp("pipeline") / "ws")
    paths = fixture_inputs
    steps = [
        ["ingest", "--feed", str(paths.feed), "--records", str(paths.records_dir)],
        ["enrich"],
        ["classify"],
        ["advisories", "--manifest", str(paths.advisories)],
        ["map"],
        ["score"],
    ]
    for step in steps:
        assert cli.main([step[0], "--workspace", ws, *step[1:]]) == 0
    return ws


@pytest.fixture
def workspace_copy(built_workspace, tmp_path):
    target = tmp_path / "ws"
    shutil.copytree(built_workspace, target)
    return str(target)
