import contextlib
import time

import pytest

_RESULTS: dict = {}


@contextlib.contextmanager
def _criterion(number: int, title: str):
    info: dict = {}
    t0 = time.perf_counter()
    try:
        yield info
    except BaseException as exc:
        info.setdefault("error", f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        _RESULTS[number] = (False, title, info, time.perf_counter() - t0)
        raise
    _RESULTS[number] = (True, title, info, time.perf_counter() - t0)


@pytest.fixture
def criterion():
    """``with criterion(k, title) as info:`` records a pass/fail line for the summary."""
    return _criterion


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_RESULTS):
        ok, title, info, secs = _RESULTS[k]
        detail = ", ".join(f"{key}={val}" for key, val in info.items())
        terminalreporter.write_line(
            f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}  [{secs:.1f} s]  {detail}")
