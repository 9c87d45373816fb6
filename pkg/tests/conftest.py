"""Shared test fixtures: small model families with known closed forms."""

import numpy as np
import pytest

from sepident.models import ParameterState, SeparableModel


class ScalarExpModel(SeparableModel):
    """y = c * exp(-a*x): one nonlinear, one linear parameter."""

    k = 1
    n = 1
    state_dim = 1
    descriptor = "scalar-exp"

    def _basis(self, a, x):
        return np.array([np.exp(-a[0] * x[0])])

    def _basis_jacobian(self, a, x):
        return np.array([[-x[0] * np.exp(-a[0] * x[0])]])


class InertNonlinearModel(SeparableModel):
    """Purely linear regression y = c . x with one inert nonlinear parameter.

    The basis ignores a entirely (zero Jacobian column), which is how a
    k=0 model is represented given that parameter states require k >= 1.
    """

    k = 1
    descriptor = "inert-linear"

    def __init__(self, n: int):
        self.n = n
        self.state_dim = n

    def _basis(self, a, x):
        return np.asarray(x, dtype=np.float64)

    def _basis_jacobian(self, a, x):
        return np.zeros((self.n, 1))


class ConstantBasisModel(SeparableModel):
    """Single basis function identically 1 (intercept-only model)."""

    k = 1
    n = 1
    state_dim = 1
    descriptor = "constant-basis"

    def _basis(self, a, x):
        return np.ones(1)

    def _basis_jacobian(self, a, x):
        return np.zeros((1, 1))


@pytest.fixture
def scalar_exp_model():
    return ScalarExpModel()


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def random_state(rng, k=4, n=3, a_scale=2.0, c_scale=3.0) -> ParameterState:
    return ParameterState(rng.uniform(0.3, a_scale, k), rng.uniform(-c_scale, c_scale, n))
