import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent
sys.path.insert(0, str(HERE))

from prcause.model import load_model  # noqa: E402

MODELS = HERE / "models"


def model_path(name):
    return str(MODELS / f"{name}.json")


def load(name):
    return load_model(model_path(name))


@pytest.fixture
def chain2():
    return load("two_causes")


@pytest.fixture
def certain():
    return load("certain_effect")


@pytest.fixture
def gap():
    return load("strict_gap")


@pytest.fixture
def mixed():
    return load("mixed_witness")


@pytest.fixture
def subopt():
    return load("canonical_suboptimal")
