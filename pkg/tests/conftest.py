import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cxr_regions import synthgen  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def corpus():
    """The 30-case AP/LAT phantom corpus used across the suite."""
    return synthgen.make_corpus(30, base_seed=2023)


@pytest.fixture(scope="session")
def cases(corpus):
    return synthgen.paired_cases(corpus)


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    from cxr_regions.cli import write_phantom_corpus

    out = tmp_path_factory.mktemp("corpus")
    write_phantom_corpus(30, 2023, out)
    return out


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
