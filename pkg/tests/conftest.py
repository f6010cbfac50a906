import numpy as np
import pytest

from bangbang_ipeps.ipeps import IPepsState, init_product_x
from bangbang_ipeps.ntu import evolve
from bangbang_ipeps.oracle import random_sequence
from bangbang_ipeps.settings import BoundaryOptions


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def product_state():
    return init_product_x()


@pytest.fixture
def random_state(rng):
    """Unphysical D=2/3 state with distinct extents on every bond class."""
    def site(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    # A: top 2, left 3, bottom 2, right 3
    return IPepsState(site(2, 2, 3, 2, 3), site(2, 2, 3, 2, 3))


@pytest.fixture(scope="session")
def boundary_opts():
    return BoundaryOptions(max_iter=300)


@pytest.fixture(scope="session")
def depth_one():
    """A seeded depth-1 BB sequence and its exact (untruncated) iPEPS."""
    seq = random_sequence(np.random.default_rng(7), 1)
    state, report = evolve(init_product_x(), seq, D_max=8)
    return seq, state, report


@pytest.fixture
def clean_env(monkeypatch, tmp_path):
    """No BANGBANG_* variables and no stray .env file."""
    import os

    for name in list(os.environ):
        if name.startswith("BANGBANG_"):
            monkeypatch.delenv(name)
    monkeypatch.chdir(tmp_path)
    return tmp_path
