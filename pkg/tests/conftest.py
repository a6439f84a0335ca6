from __future__ import annotations

from pathlib import Path

import pytest

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def seed_sources() -> dict[str, str]:
    out = {}
    for path in sorted((FIXTURES / "seeds").glob("*.py")):
        out[path.stem] = path.read_text()
    return out
