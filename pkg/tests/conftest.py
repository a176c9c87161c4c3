from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "finnews", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("finnews")

DATA_DIR = Path(__file__).parent / "data"
RESPONSES_DIR = DATA_DIR / "sample_responses"


@pytest.fixture
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture
def responses_dir() -> Path:
    return RESPONSES_DIR


def load_response(name: str) -> str:
    return (RESPONSES_DIR / f"{name}.txt").read_text(encoding="utf-8")
