import json
from pathlib import Path

import numpy as np
import pytest

from src.core.model import RelayParams

SCENARIO_DIR = Path(__file__).resolve().parents[1] / "scenarios"


@pytest.fixture
def relay():
    return RelayParams(f=0.3, l=0.6, C=1.0, K=20)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def scenario_dir():
    return SCENARIO_DIR


@pytest.fixture
def small_scenario():
    """Two stable relays, short horizon; fast enough for end-to-end runs"""
    return {
        "name": "small",
        "T": 300,
        "buffer": 8,
        "relays": [
            {"f": 0.2, "l": 0.65, "C": 60},
            {"f": 0.2, "l": 0.63, "C": 59.7},
        ],
        "policies": ["random", "load", "mmrs", "mlrs", "whittle"],
        "seeds": [1, 2, 3],
    }


@pytest.fixture
def write_scenario(tmp_path):
    def _write(data, name="scenario.json"):
        path = tmp_path / name
        path.write_text(json.dumps(data, indent=2))
        return path

    return _write
