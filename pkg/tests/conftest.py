import numpy as np
import pytest

from treeboundary import TreeModel


@pytest.fixture(scope="session")
def model2():
    return TreeModel(2)


@pytest.fixture(scope="session")
def model3():
    return TreeModel(3)


@pytest.fixture()
def rng():
    return np.random.Generator(np.random.Philox(key=20240817))


def random_word(rng, model, max_len=8):
    letters = model.letters
    length = int(rng.integers(0, max_len + 1))
    out = []
    while len(out) < length:
        a = letters[int(rng.integers(0, len(letters)))]
        if out and out[-1] == -a:
            continue
        out.append(a)
    return tuple(out)
