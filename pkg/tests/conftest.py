import math

import numpy as np
import pytest

from homgrad import (IntegratorConfig, ParameterSignal, PESettings, ScenarioConfig, certify,
                     vector)

# (name, passed, detail) lines from the acceptance suite, printed in the summary
ACCEPTANCE_LINES = []


def scalar_scenario(estimators, theta=5.0, theta_hat0=0.0, horizon=20.0, step=1e-4, stride=10,
                    t0_offset=0.0, conv_dwell=None, u=((2.0, 2.0),), name="scalar"):
    """Scalar problem with a constant parameter and a sinusoidal regressor."""
    return ScenarioConfig(
        name=name,
        regressor=vector(list(u)),
        parameter=ParameterSignal(constant=np.array([theta])),
        estimators=tuple(estimators),
        theta_hat0=(theta_hat0,),
        horizon=horizon,
        integrator=IntegratorConfig(step=step, record_stride=stride, conv_dwell=conv_dwell),
        pe=PESettings(T=math.pi / 2, window_step=math.pi / 32, horizon=math.pi),
        t0_offset=t0_offset,
    )


@pytest.fixture(scope="session")
def scalar_signal():
    return vector([(2.0, 2.0)])


@pytest.fixture(scope="session")
def scalar_cert(scalar_signal):
    return certify(scalar_signal, math.pi / 2, math.pi, 16, math.pi / 32)


@pytest.fixture(scope="session")
def vector_signal():
    return vector([(2.0, 2.0)], [(-1.0, 3.0)], [(5.0, 5.0)])


@pytest.fixture(scope="session")
def vector_cert(vector_signal):
    return certify(vector_signal, 2 * math.pi, 4 * math.pi, 16, math.pi / 16)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}: {detail}")
