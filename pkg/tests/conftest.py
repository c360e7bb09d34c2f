import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

BENCH_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "lyapcert",
                         "benchmarks")


def bench_path(name: str) -> str:
    return os.path.join(BENCH_DIR, name)


def bench_text(name: str) -> str:
    with open(bench_path(name)) as fh:
        return fh.read()


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def random_polynomial(rng, n, max_degree, coeff_range=(-2.0, 2.0),
                      density=0.7):
    """Random sparse polynomial with componentwise degree <= max_degree."""
    from lyapcert.poly import Polynomial, monomial_basis
    terms = {}
    for index in monomial_basis(n, tuple([max_degree] * n)):
        if rng.random() < density:
            terms[index] = float(rng.uniform(*coeff_range))
    if not terms:
        terms[tuple([0] * n)] = 1.0
    return Polynomial(n, terms)
