"""
Pytest configuration and fixtures for the cone-kernel tests.

Provides the registered test functions, a default QuadratureSpec and the
closed-form values used as oracles across modules.
"""
import math

import pytest

from cone_kernel.quad import QuadratureSpec
from cone_kernel.registry import test_function_registry

SQRT_PI = math.sqrt(math.pi)
# (i/2pi) * PV integral of xi1 exp(-xi1^2) / xi1
LEADING_XI1_GAUSSIAN = 1j * SQRT_PI / (2 * math.pi)


def signed_exact(a: float) -> complex:
    """Closed form of the signed-prescription pairing for xi1 * exp(-xi1^2 - xi2^2)."""
    return LEADING_XI1_GAUSSIAN / math.sqrt(1.0 + a ** -2)


@pytest.fixture
def spec():
    return QuadratureSpec()


@pytest.fixture
def gaussian():
    return test_function_registry.get("gaussian")


@pytest.fixture
def xi1_gaussian():
    return test_function_registry.get("xi1_gaussian")


@pytest.fixture
def shifted_gaussian():
    return test_function_registry.get("shifted_gaussian")


@pytest.fixture
def xi2_gaussian():
    return test_function_registry.get("xi2_gaussian")


@pytest.fixture
def offaxis_gaussian():
    return test_function_registry.get("offaxis_gaussian")


@pytest.fixture
def bump():
    return test_function_registry.get("bump")

