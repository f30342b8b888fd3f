import pytest

# --- acceptance reporting ---------------------------------------------------------

_criteria = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(name): acceptance criterion reported in the summary")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if call.when == "call" or (call.when == "setup" and call.excinfo is not None):
        _criteria.append((marker.args[0], item.name, call.excinfo is None))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    by_name = {}
    for name, test, ok in _criteria:
        by_name.setdefault(name, []).append((test, ok))
    for name, results in by_name.items():
        ok = all(r for _, r in results)
        failed = [t for t, r in results if not r]
        suffix = f"  (failed: {', '.join(failed)})" if failed else f"  ({len(results)} check{'s' if len(results) != 1 else ''})"
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}{suffix}")


@pytest.fixture
def demo_dir():
    from pathlib import Path

    return Path(__file__).parent / "fixtures" / "demo"


# --- no live network anywhere in the suite -----------------------------------------

class NetworkBlocked(RuntimeError):
    pass


@pytest.fixture(autouse=True)
def _no_network(monkeypatch):
    import socket

    def refuse(*args, **kwargs):
        raise NetworkBlocked("tests must not open network connections")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket.socket, "connect_ex", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)
