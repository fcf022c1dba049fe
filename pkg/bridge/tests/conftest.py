from pathlib import Path

import pytest

BRIDGE_ROOT = Path(__file__).resolve().parents[1]
REPO_ROOT = BRIDGE_ROOT.parent


@pytest.fixture(scope="session")
def checkpoint_path() -> Path:
    path = BRIDGE_ROOT / "checkpoints" / "simcnn.pt"
    if not path.exists():
        pytest.skip("no checkpoint; run bridge/scripts/train_checkpoint.py")
    return path


@pytest.fixture(scope="session")
def conformance_dir() -> Path:
    return REPO_ROOT / "tests" / "data"
