import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

VERDICTS: dict[int, tuple[str, str, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        word, name, note = VERDICTS[n]
        terminalreporter.write_line(f"criterion {n:2d} {word}: {name}{' | ' + note if note else ''}")
