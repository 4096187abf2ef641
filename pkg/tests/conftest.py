import numpy as np
import pytest

from isacsec.central import run_algorithm1
from isacsec.decentral import run_algorithm2
from isacsec.scenario import GeometrySpec, SystemConfig, build_scenario

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log(pytestconfig):
    """Record one PASS/FAIL line per acceptance criterion."""

    def report(number, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
        print(line)
        pytestconfig.stash[ACCEPTANCE_KEY].append(line)
        return ok

    return report


@pytest.fixture(scope="session")
def desk_scn():
    return build_scenario(SystemConfig.desk())


@pytest.fixture(scope="session")
def paper_scn():
    return build_scenario(SystemConfig.paper(), GeometrySpec.paper(3))


@pytest.fixture(scope="session")
def central_run(desk_scn):
    return run_algorithm1(desk_scn)


@pytest.fixture(scope="session")
def decentral_run(desk_scn):
    return run_algorithm2(desk_scn)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_psd(rng, n, rank=None, scale=1.0):
    rank = n if rank is None else rank
    A = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return scale * (A @ A.conj().T) / n
