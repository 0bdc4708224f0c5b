import sys

import pytest

from schwinger_qke.config import PulseConfig


@pytest.fixture
def fig1_config():
    """Strong 5-cycle pulse plus a weak tenfold-frequency component."""
    return PulseConfig("bifreq", E0=0.2, omega=0.02, sigma=5.0, kE=0.25, kOmega=10.0)


@pytest.fixture
def one_photon_config():
    """Short pulse above the pair threshold; cheap to integrate."""
    return PulseConfig("single", E0=0.01, omega=2.5, sigma=5.0)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        passed, detail = results[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}: {detail}")
