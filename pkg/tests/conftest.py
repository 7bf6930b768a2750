import re

import pytest

_RESULTS = pytest.StashKey[dict]()
_NOTES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS] = {}
    config.stash[_NOTES] = []


@pytest.fixture
def acceptance_note(request):
    """Attach an informational line to the acceptance summary."""
    notes = request.config.stash[_NOTES]
    return lambda text: notes.append(text)


def pytest_runtest_logreport(report):
    m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", report.nodeid)
    if not m:
        return
    key = (int(m.group(1)), m.group(2).replace("_", " "))
    results = _config.stash[_RESULTS]
    if report.when == "call" or report.outcome != "passed":
        if results.get(key) != "FAIL":
            results[key] = "PASS" if report.outcome == "passed" else "FAIL"


_config = None


@pytest.hookimpl(tryfirst=True)
def pytest_sessionstart(session):
    global _config
    _config = session.config


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[_RESULTS]
    if not results:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for (num, name), status in sorted(results.items()):
        tr.write_line(f"criterion {num:>2} {status}  {name}")
    for note in config.stash[_NOTES]:
        tr.write_line(f"  note: {note}")
