import sys
import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    verdicts = getattr(mod, "VERDICTS", None)
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    keys = sorted(verdicts, key=lambda k: (float(str(k).split("-")[0]), str(k)))
    for k in keys:
        terminalreporter.write_line(verdicts[k])
