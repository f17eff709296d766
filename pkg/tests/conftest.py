import numpy as np
import pytest

from lvunbalance.netmodel import Bus, Feeder, Line, Load, bundled_path, load_feeder


@pytest.fixture(scope="session")
def feeder2():
    return load_feeder(bundled_path("feeder_2bus.json"))


@pytest.fixture(scope="session")
def feeder41():
    return load_feeder(bundled_path("feeder_41bus.json"))


@pytest.fixture(scope="session")
def feeder_bal():
    return load_feeder(bundled_path("feeder_balanced.json"))


def two_bus(z, kw_per_phase, pf=1.0, connection="abc", T=1, s_base=1000.0, v_base=230.0):
    """Head bus plus one load bus; ``kw_per_phase`` is per phase for abc loads."""
    n = 3 if connection == "abc" else 1
    prof = np.full(T, kw_per_phase * n)
    return Feeder("two", [Bus("s", True), Bus("l")], [Line("s", "l", np.asarray(z))],
                  [Load("l", connection, prof, pf)], v_base, s_base)


def chain(n, z, loads, T=1):
    """Radial chain ``b0 - b1 - ... - b{n-1}`` with identical line impedance."""
    buses = [Bus(f"b{k}", k == 0) for k in range(n)]
    lines = [Line(f"b{k}", f"b{k + 1}", z) for k in range(n - 1)]
    return Feeder("chain", buses, lines, loads)


# one line per acceptance criterion, printed again in the terminal summary
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
