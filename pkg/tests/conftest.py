import numpy as np
import pytest

from rwre import env


@pytest.fixture(scope="session")
def two_point():
    return env.make_spec("two-point", {"a": 0.25})


@pytest.fixture(scope="session")
def uniform():
    return env.make_spec("uniform")


def se_mean(x):
    x = np.asarray(x, dtype=float)
    return x.mean(), x.std(ddof=1) / np.sqrt(len(x))
