import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=30, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def gaussian_pair(rho, T, seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal(T)
    y = rho * x + np.sqrt(1 - rho**2) * r.standard_normal(T)
    return np.column_stack([x, y])
