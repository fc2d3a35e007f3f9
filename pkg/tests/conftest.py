import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from samples import ALL_RYBU, TWO_SEM_DEDAN  # noqa: E402

from rybu import dedan  # noqa: E402
from rybu.lower import lower_program  # noqa: E402
from rybu.rybu_check import errors_of, typecheck  # noqa: E402
from rybu.rybu_parser import parse_program  # noqa: E402


def compile_source(text: str):
    """Parse, check and lower, failing the test on any diagnostic."""
    program = parse_program(text)
    bad = errors_of(typecheck(program))
    assert not bad, f"unexpected diagnostics: {bad}"
    return lower_program(program)


@pytest.fixture(scope="session")
def dedan_two_sem():
    """The hand-written two-semaphore model, expanded."""
    return dedan.expand(dedan.parse_dedan(TWO_SEM_DEDAN))


@pytest.fixture(scope="session")
def lowered():
    """name -> LowerResult for every sample program."""
    return {name: compile_source(src) for name, src in ALL_RYBU.items()}
