import os
import pathlib

import pytest

FIXTURES = pathlib.Path(os.environ.get("SPECLOOP_FIXTURES", pathlib.Path(__file__).parents[1] / "fixtures"))


@pytest.fixture
def fixtures():
    return FIXTURES
