import pytest

from cmrt import build_tables
from cmrt.phantoms import AnalyticField, reference_phantom


@pytest.fixture(scope="session")
def tables12():
    return build_tables(12)


@pytest.fixture(scope="session")
def ref_phantom():
    return reference_phantom()


@pytest.fixture(scope="session")
def ref_field(ref_phantom):
    return AnalyticField(ref_phantom)


@pytest.fixture
def report(capsys):
    """Print one line straight to the terminal, bypassing capture."""

    def emit(line: str) -> None:
        with capsys.disabled():
            print(line)

    return emit
