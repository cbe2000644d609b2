from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def mybox_source() -> str:
    return (FIXTURES / "mybox.cal").read_text()


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES
