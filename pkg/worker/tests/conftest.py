from __future__ import annotations

from pathlib import Path

import pytest

from serverproc import ServerProc

FIXTURES = Path(__file__).resolve().parents[2] / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def seed_sources() -> dict[str, str]:
    out = {}
    for path in sorted((FIXTURES / "seeds").glob("*.py")):
        out[path.stem] = path.read_text()
    return out


@pytest.fixture
def server():
    proc = ServerProc()
    yield proc
    proc.close()
