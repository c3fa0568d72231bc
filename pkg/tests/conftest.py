import functools

import pytest

from cdq.cdcore import cd_exhaustive
from cdq.families import FamilyParams, build_family


@functools.lru_cache(maxsize=None)
def family_form(family, p, a, r):
    return build_family(FamilyParams(family, p, a, r))[0]


@functools.lru_cache(maxsize=None)
def exhaustive_cd(family, p, a, r):
    return cd_exhaustive(family_form(family, p, a, r))


@pytest.fixture
def form_factory():
    return family_form


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
