import os

import pytest
from hypothesis import HealthCheck, settings

from cwpir.backend import TransparentBackend, expansion_galois_elements
from cwpir.bfv import BfvBackend

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("thorough", deadline=None, max_examples=500)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def toy_client():
    """toy-1024 client with keys for expansion up to c = 10 and a few extra automorphisms."""
    galois = set(expansion_galois_elements(1024, 10)) | {3, 5, 2047}
    return BfvBackend.client("toy-1024", galois, seed=11)


@pytest.fixture
def transparent_64():
    return TransparentBackend(degree=64, plain_modulus=65537)
