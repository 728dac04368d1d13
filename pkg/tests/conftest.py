import pytest

from provsumm import parse_question
from provsumm.fixtures import load_fixture


@pytest.fixture(scope="session")
def running():
    return load_fixture("running_example")


@pytest.fixture(scope="session")
def airbnb():
    return load_fixture("airbnb")


@pytest.fixture(scope="session")
def q_x4():
    return parse_question("WHYNOT Q(X,4)")


@pytest.fixture(scope="session")
def q_shared():
    return parse_question("WHYNOT AL(N,'shared')")
