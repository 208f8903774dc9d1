from pathlib import Path

import pytest

from gridpop.synthetic import SynthConfig, generate_synthetic
from gridpop.trace import import_trace

DATA = Path(__file__).parent / "data"


@pytest.fixture
def fixture_paths():
    return DATA / "fixture_events.csv", DATA / "fixture_metas.csv"


@pytest.fixture
def fixture_trace(fixture_paths):
    return import_trace(*fixture_paths)


@pytest.fixture(scope="session")
def small_trace():
    return generate_synthetic(SynthConfig(n_datasets=600), seed=7)


@pytest.fixture(scope="session")
def default_trace():
    return generate_synthetic(SynthConfig(), seed=42)
