import numpy as np
import pytest

from steadywaves.vorticity import FlowParameters, two_layer, zero_vorticity


# gravity making the k=1 wave mode neutral at the mean-zero laminar flow of
# the standard two-layer profile (d=1, p0=-1, A=3, jump -1/2); steady
# 2pi-periodic waves of small amplitude exist only near such critical data
G_CRITICAL_TWO_LAYER = 0.9643897689026288


@pytest.fixture(scope="session")
def params():
    return FlowParameters(d=1.0, g=9.8, c=1.0, p0=-1.0, P_atm=0.0)


@pytest.fixture(scope="session")
def params_critical():
    return FlowParameters(d=1.0, g=G_CRITICAL_TWO_LAYER, c=1.0, p0=-1.0,
                          P_atm=0.0)


@pytest.fixture(scope="session")
def v_zero():
    return zero_vorticity()


@pytest.fixture(scope="session")
def v_two_layer():
    return two_layer(3.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260809)
