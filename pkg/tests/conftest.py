import pytest

ACCEPTANCE: dict[str, str] = {}


@pytest.fixture
def record():
    def _record(key: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[key] = f"{key}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE[key])
    return _record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[1].rstrip("abcdefgh")), k)):
        terminalreporter.write_line(ACCEPTANCE[key])
