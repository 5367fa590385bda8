from __future__ import annotations

import pytest

from discstrain.constitutive import MaterialParams

# opening-mode beam material (E, nu, sigma_y, a, b)
TABLE1 = dict(E=28e9, nu=0.2, sigma_y=3.8e6, a=80.0, b=70.0)


@pytest.fixture
def params():
    return MaterialParams(**TABLE1, d_cr=0.45)


@pytest.fixture
def params_conventional():
    return MaterialParams(**TABLE1, d_cr=1.0)


def table1(d_cr: float) -> MaterialParams:
    return MaterialParams(**TABLE1, d_cr=d_cr)


def pytest_terminal_summary(terminalreporter):
    """Repeat the acceptance verdicts, one line per criterion."""
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(results):
        ok, detail = results[n]
        terminalreporter.write_line(f"[criterion {n}] {'PASS' if ok else 'FAIL'}: {detail}")
