from collections import OrderedDict

import pytest

# criterion number -> list of (part, ok, detail); filled by tests/test_acceptance.py
_ACCEPTANCE: "OrderedDict[int, list]" = OrderedDict()


@pytest.fixture(scope="session")
def accept():
    def record(criterion: int, part: str, ok: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(criterion, []).append((part, bool(ok), detail))
        line = f"criterion {criterion} [{part}]: {'PASS' if ok else 'FAIL'} {detail}".rstrip()
        print(line)
        return bool(ok)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[crit]
        ok = all(p[1] for p in parts)
        failed = [p[0] for p in parts if not p[1]]
        tail = f" (failing: {', '.join(failed)})" if failed else ""
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}{tail}")
        for part, pok, detail in parts:
            terminalreporter.write_line(f"    {part}: {'PASS' if pok else 'FAIL'} {detail}".rstrip())
