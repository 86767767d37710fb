import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from divstab.sysfile import read_system

ROOT = Path(__file__).resolve().parent.parent
SYSTEMS = ROOT / "systems"

settings.register_profile("default", max_examples=50, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def load(name):
    return read_system(str(SYSTEMS / f"{name}.sys"))


@pytest.fixture(scope="session")
def spiral():
    return load("spiral").field()


@pytest.fixture(scope="session")
def quadratic():
    return load("quadratic").field()


@pytest.fixture(scope="session")
def cubic():
    return load("cubic").field()


ACCEPTANCE: dict[int, tuple[bool, float, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, elapsed, desc = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} ({elapsed:.2f} s) {desc}")
