import numpy as np
import pytest

from porophase import ModelParams


@pytest.fixture
def coex_params():
    """Coexistence-pressure parameter set from the reference experiments."""
    return ModelParams(a=0.5, b=1.0, p=0.24221, alpha=100.0)


@pytest.fixture
def fig_params():
    """Figure parameter set: p=0.24, k1=k2=k3=1e-3."""
    return ModelParams(a=0.5, b=1.0, p=0.24, alpha=100.0, k1=1e-3, k2=1e-3, k3=1e-3)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
