import json
import random

import pytest

from helpers import FIXTURES


@pytest.fixture
def rng():
    return random.Random(20261019)


@pytest.fixture
def fixture_doc():
    def load(name):
        return json.loads((FIXTURES / f"{name}.json").read_text())
    return load
