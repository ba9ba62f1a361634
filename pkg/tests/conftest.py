import numpy as np
import pytest

import lppgeo as L


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)


def make_fields(seed, count):
    return [L.field(seed, rep) for rep in range(count)]
