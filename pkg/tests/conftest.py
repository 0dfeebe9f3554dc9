import json
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

# every property suite runs at least 100 cases; derandomized so CI is repeatable
settings.register_profile(
    "default",
    max_examples=100,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

FROZEN = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def frozen():
    return {k: float(v) for k, v in json.loads(FROZEN.read_text()).items()}
