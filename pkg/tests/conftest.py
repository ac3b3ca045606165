import functools

import numpy as np
import pytest

from qdouble.groups import build_group
from qdouble.lattice import TorusLattice
from qdouble.operators import ground_state

BUILTINS = ["Z1", "Z2", "Z3", "S3", "D4", "Q8", "D5"]


@functools.lru_cache(maxsize=None)
def group(name):
    return build_group(name)


@functools.lru_cache(maxsize=None)
def lattice(lx, ly):
    return TorusLattice(lx, ly)


@functools.lru_cache(maxsize=None)
def gs(name, lx, ly, a=0, b=0):
    return ground_state(lattice(lx, ly), group(name), (a, b))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


SESSION = {}


def pytest_sessionstart(session):
    import time

    SESSION["start"] = time.perf_counter()


def pytest_collection_modifyitems(items):
    # the wall-clock criterion has to run after everything else
    last = [it for it in items if it.name == "test_criterion_14_wallclock"]
    rest = [it for it in items if it.name != "test_criterion_14_wallclock"]
    items[:] = rest + last
