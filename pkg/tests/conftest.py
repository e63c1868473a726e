import mpmath
import pytest

mpmath.mp.dps = 40


@pytest.fixture
def mp_ive():
    """e^{-z} I_nu(z) at 40 digits."""
    def f(nu, z):
        return float(mpmath.besseli(nu, z) * mpmath.exp(-z))
    return f


_CRITERIA = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion with a pass/fail summary line")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    failed_setup = rep.when == "setup" and not rep.passed
    if rep.when == "call" or failed_setup:
        number, title = mark.args
        _CRITERIA.append((number, title, "PASS" if rep.passed else "FAIL", rep.duration))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, status, seconds in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {number:2d}  {status}  {title}  ({seconds:.1f} s)")
