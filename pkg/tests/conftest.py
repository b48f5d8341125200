import numpy as np
import pytest

from blenderlab.model import AffineHorseshoe, BlenderModel, Box, default_instance


@pytest.fixture(scope="session")
def model():
    return default_instance()


def make_model(lam=1.2, mu=0.02, delta=0.125, u1=3.0, u2=4.0):
    """Default horseshoe with the unstable expansions replaced."""
    lo2 = 0.85 - 2 / u2
    a_u = 0.8 if lo2 < 0.8 else 0.5 * (lo2 + 0.85)
    h = AffineHorseshoe(S1=[[1 / 3]], S2=[[1 / 3]], U1=[[u1]], U2=[[u2]],
                        dom1=Box([-1 / u1], [1 / u1]), dom2=Box([lo2], [0.85]),
                        a_s=[0.6], a_u=[a_u])
    return BlenderModel(h, lam, mu, delta)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod is not None and getattr(mod, "RESULTS", None):
        terminalreporter.section("acceptance criteria")
        for n in sorted(mod.RESULTS):
            terminalreporter.write_line(mod.RESULTS[n])
