import os
import time

from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

SUITE_LIMIT_S = 120.0
_start = {}


def pytest_sessionstart(session):
    _start["t"] = time.perf_counter()


def pytest_sessionfinish(session, exitstatus):
    elapsed = time.perf_counter() - _start["t"]
    _start["elapsed"] = elapsed
    if elapsed > SUITE_LIMIT_S and exitstatus == 0:
        session.exitstatus = 1


def pytest_terminal_summary(terminalreporter):
    elapsed = _start.get("elapsed", time.perf_counter() - _start["t"])
    ok = elapsed <= SUITE_LIMIT_S
    terminalreporter.write_line(f"AC12  {'PASS' if ok else 'FAIL'}  full test suite runtime {elapsed:.1f} s "
                                f"(limit {SUITE_LIMIT_S:.0f} s)")
