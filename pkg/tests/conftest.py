import random

import pytest

from learnwsat.generate import DistributionSpec, gen_random_ksat


def random_formula(seed, n=8, m=None, k=3):
    spec = DistributionSpec.make(k, n, m)
    return gen_random_ksat(spec, random.Random(seed))


@pytest.fixture
def formula_factory():
    return random_formula
