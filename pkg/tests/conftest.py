from pathlib import Path

import pytest

from caption_transfer.textnorm import NormalizationConfig

DATA = Path(__file__).parent / "data"

ACCEPTANCE_MODULE = "test_acceptance.py"
_acceptance_results: dict[str, str] = {}


@pytest.fixture
def data_dir():
    return DATA


@pytest.fixture
def bare_cfg():
    """No stopwords, no merges: normalization is the identity."""
    return NormalizationConfig(frozenset(), frozenset(), {}, frozenset())


def pytest_runtest_logreport(report):
    if ACCEPTANCE_MODULE not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        outcome = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        _acceptance_results[name] = outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in sorted(_acceptance_results.items()):
        terminalreporter.write_line(f"{outcome}  {name}")
