import sys
from pathlib import Path

# make the shared oracle helpers importable as `oracles`
sys.path.insert(0, str(Path(__file__).parent))

# pass/fail lines collected by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
