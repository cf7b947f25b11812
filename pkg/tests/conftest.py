import os
from pathlib import Path

import pytest

ML100K = Path(os.environ.get("COLDSTART_CRBM_DATA", "/root/data")) / "ml-100k"

# filled by test_acceptance; printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def write(tmp_path):
    def _write(name, text):
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return p

    return _write


@pytest.fixture(scope="session")
def movielens():
    if not (ML100K / "u.data").is_file():
        pytest.fail(f"MovieLens-100K not found under {ML100K}; run scripts/fetch_movielens.py")
    return ML100K
