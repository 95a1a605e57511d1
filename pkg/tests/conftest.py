import numpy as np
import pytest

from devicedr.config import model_from_dict, model_to_dict
from devicedr.instances import paper_default_instance, tiny_instance
from devicedr.model import (
    DeviceModel,
    DeviceParams,
    DissatisfactionTables,
    PriceChain,
    RequestModel,
)


@pytest.fixture(scope="session")
def default_model():
    return paper_default_instance()


@pytest.fixture(scope="session")
def tiny():
    return tiny_instance()


@pytest.fixture
def tiny_dict():
    return model_to_dict(tiny_instance())


def make_minimal(price=10.0, C=1.0, alpha=0.9, gamma=1.0, u_e=2.0):
    """Single price, W = W_hat = 0, g_max = 1: two states, (s=0, g=0) and (s=0, g=1).

    From g = 0 a request arrives with probability 0.5 and must be served at
    once; ON in the request state completes it at zero dissatisfaction.
    """
    return DeviceModel(
        price_chain=PriceChain(prices=[price], transition=[[1.0]]),
        params=DeviceParams(W=0, W_hat=0, g_max=1, C=C, alpha=alpha, gamma=gamma),
        dissatisfaction=DissatisfactionTables(u_r=[[0.0]], u_c=[[5.0]], u_e=[u_e]),
        requests=RequestModel(arrival=[[[0.5]]], continuation=[[0.0]], regen={(0, 0): 1.0}),
        name="minimal",
    )


@pytest.fixture
def minimal():
    return make_minimal()


@pytest.fixture
def rebuild():
    return model_from_dict


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance report -----------------------------------------------------------

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance(request):
    """Record one ``PASS``/``FAIL`` line per criterion; printed at session end."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(name, passed, detail=""):
        line = f"{'PASS' if passed else 'FAIL'}  {name}  {detail}".rstrip()
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
