"""Shared fixtures and the acceptance-criteria summary hook."""

import pytest

from _liveserver import LiveServer


@pytest.fixture()
def live_server(tmp_path):
    server = LiveServer(tmp_path / "inbox-server").start()
    yield server
    server.stop()


def pytest_terminal_summary(terminalreporter):
    import _acceptance_log

    if not _acceptance_log.has_results():
        return
    terminalreporter.section("acceptance criteria")
    for line in _acceptance_log.report():
        terminalreporter.write_line(line)
