import pytest

_RESULTS = pytest.StashKey[dict]()


@pytest.fixture
def criterion(request):
    """Record the outcome of one acceptance criterion for the end-of-run summary.

    Usage: ``criterion(3, ok, "detail")``; the call also asserts ``ok``.
    """
    store = request.config.stash.setdefault(_RESULTS, {})

    def record(number: int, ok: bool, detail: str) -> None:
        prev = store.get(number)
        if prev is not None:
            ok = ok and prev[0]
            detail = f"{prev[1]}; {detail}"
        store[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    store = config.stash.get(_RESULTS, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        ok, detail = store[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
