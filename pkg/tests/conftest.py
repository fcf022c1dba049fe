from pathlib import Path

import pytest

from lightattack.fixtures import write_fixture_tree

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory) -> Path:
    """The bundled fixture tree, generated once per session."""
    return write_fixture_tree(tmp_path_factory.mktemp("fixtures"))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR
