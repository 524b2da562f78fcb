import math

import numpy as np
import pytest
from scipy import special

from stochshape import _backend, _pykernels

try:
    from stochshape import _ckernels
except ImportError:  # pragma: no cover - extension not built
    _ckernels = None

BACKENDS = ["python"] + (["cython"] if _ckernels is not None else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run a test once per available kernel backend."""
    monkeypatch.setattr(_backend, "kernels", _pykernels if request.param == "python" else _ckernels)
    return request.param


def legendre_closed_form(l, m, x):
    """Explicit alternating sum for P_l^m, Condon-Shortley phase included.

    Independent of the recurrence used by the package; only trustworthy for
    small l.
    """
    total = 0.0
    for k in range(m, l + 1):
        total += (
            math.factorial(k) / math.factorial(k - m) * x ** (k - m)
            * special.binom(l, k) * special.binom((l + k - 1) / 2.0, l)
        )
    return (-1) ** m * 2**l * (1.0 - x * x) ** (m / 2.0) * total


def real_sh_oracle(l, m, theta, phi):
    """Real harmonic built from scipy's complex one."""
    y = special.sph_harm_y(l, abs(m), theta, phi)
    if m > 0:
        return math.sqrt(2.0) * np.real(y)
    if m < 0:
        return math.sqrt(2.0) * np.imag(y)
    return np.real(y)


def standard_error_of_variance(samples):
    """SE of the sample variance from the fourth central moment."""
    x = np.asarray(samples) - np.mean(samples)
    n = x.size
    m4 = np.mean(x**4)
    v = np.var(x, ddof=1)
    return math.sqrt(max(m4 - v * v * (n - 3) / (n - 1), 0.0) / n)


# -- acceptance reporting --------------------------------------------------------------

_ACCEPTANCE = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): numbered acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark is not None:
            item.user_properties.append(("criterion", mark.args))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _ACCEPTANCE[props["criterion"]] = (report.outcome, props.get("measured", ""))


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for (number, title), (outcome, measured) in sorted(_ACCEPTANCE.items()):
        verdict = "PASS" if outcome == "passed" else "FAIL"
        line = f"[{verdict}] criterion {number:2d}: {title}"
        if measured:
            line += f"  ({measured})"
        terminalreporter.write_line(line)
