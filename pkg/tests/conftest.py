import numpy as np
import pytest

from latentedit.generator import LinearGenerator, MLPGenerator, PatchFeatures


@pytest.fixture(scope="session")
def lin():
    return LinearGenerator(7)


@pytest.fixture(scope="session")
def mlp():
    return MLPGenerator(11)


@pytest.fixture(scope="session")
def small_lin():
    return LinearGenerator(3, latent_shape=(2, 4), out_size=16)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(1234))


@pytest.fixture(scope="session")
def ext():
    return PatchFeatures(4)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
