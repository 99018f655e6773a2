import pytest

from verbmem.models import EventInput
from verbmem.substrate import append_event, open_store

T0 = 1_700_000_000
HOUR = 3600

# filled by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def store(tmp_path):
    s = open_store(tmp_path / "mem.db")
    yield s
    s.close()


@pytest.fixture
def add(store):
    def _add(text, sender="", ts=None, **kw):
        return append_event(store, EventInput(text=text, sender=sender, timestamp=T0 if ts is None else ts, **kw))
    return _add
