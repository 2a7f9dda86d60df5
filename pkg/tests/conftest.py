import numpy as np
import pytest

from oscillospec import EnvelopeProfile, Term, TwoScalePotential, default_potential, solve_cell
from oscillospec.potential import zero_potential


def two_harmonic():
    return TwoScalePotential((Term(1, EnvelopeProfile("gaussian", 4.0, 8.0)),
                              Term(2, EnvelopeProfile("gaussian", 1.0, 4.0))))


def twisted():
    """One harmonic, two envelopes out of phase: the simplest case with V1 != 0."""
    return TwoScalePotential((Term(1, EnvelopeProfile("gaussian", 4.0, 8.0), 0.0),
                              Term(1, EnvelopeProfile("sech2", 2.0, 2.0), np.pi / 2)))


@pytest.fixture(scope="session")
def pot():
    return default_potential()


@pytest.fixture(scope="session")
def cell(pot):
    return solve_cell(pot)


@pytest.fixture(scope="session")
def cell2():
    return solve_cell(two_harmonic())


@pytest.fixture(scope="session")
def zero_cell():
    return solve_cell(zero_potential())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance report -------------------------------------------------------

_ACCEPTANCE = []


@pytest.fixture
def record():
    """record(k, ok, detail): one line in the end-of-run acceptance table."""

    def rec(k, ok, detail=""):
        _ACCEPTANCE.append((k, bool(ok), detail))
        print(f"criterion {k}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return rec


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k, ok, detail in sorted(_ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {k:>2}: {detail}")
