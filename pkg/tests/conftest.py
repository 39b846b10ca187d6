import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from elmmkit._accel import HAVE_NUMBA, backend
from elmmkit.simgen import SceneSpec, generate_scene

settings.register_profile(
    "default", deadline=None, max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

BACKENDS = ["numba", "numpy"] if HAVE_NUMBA else ["numpy"]


@pytest.fixture(params=BACKENDS)
def kernel_backend(request):
    with backend(request.param):
        yield request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_scene():
    spec = SceneSpec(bands=40, lines=15, samples=20, classes=3, seed=3)
    return generate_scene(spec)


def random_refs(rng, L, p, unit=True):
    S = np.abs(rng.standard_normal((L, p))) + 0.05
    return S / np.linalg.norm(S, axis=0) if unit else S
