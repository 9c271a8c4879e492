import numpy as np
import pytest

from rrw import EnvironmentSpec, UrnState, parse_function

# canonical parameterizations used throughout the suite
BUILTINS = ("const(0.5)", "linear(0.4)", "polya", "quartic(2)", "mix")


@pytest.fixture
def f_half():
    return parse_function("const(0.5)")


@pytest.fixture
def f_quartic():
    return parse_function("quartic(2)")


@pytest.fixture
def f_mix():
    return parse_function("mix")


@pytest.fixture
def f_linear():
    return parse_function("linear(0.4)")


@pytest.fixture
def init_half_two():
    return UrnState(0.5, 2.0)


@pytest.fixture
def env_half_two():
    return EnvironmentSpec.homogeneous(UrnState(0.5, 2.0))


def assert_close(actual, expected, atol=0.0, rtol=0.0, msg=""):
    ok = abs(actual - expected) <= atol + rtol * abs(expected)
    assert ok, f"{msg} actual={actual} expected={expected} atol={atol} rtol={rtol}"


def grid(n=1001):
    return np.linspace(0.0, 1.0, n)
