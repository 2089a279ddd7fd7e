import itertools

import numpy as np
import pytest

from lyapbound.core import validate_family
from lyapbound.corpus import make_derham, make_random, make_sigma6, make_swap_pair


def brute_force_products(family, k):
    """All (prob, B) pairs by explicit enumeration of words; B = A_{w_k} ... A_{w_1}."""
    out = []
    for word in itertools.product(range(family.m), repeat=k):
        B = np.eye(family.dim)
        prob = 1.0
        for j in word:
            B = family.matrices[j] @ B
            prob *= family.probs[j]
        out.append((prob, B))
    return out


def nonneg_corpus():
    fams = {
        "sigma6": make_sigma6(),
        "derham_1/3": make_derham(1 / 3),
        "derham_1/5": make_derham(1 / 5),
        "derham_1/7": make_derham(1 / 7),
        "swap": make_swap_pair(),
    }
    for i, d in enumerate([5] * 5 + [10] * 5):
        fams[f"random_d{d}_s{i}"] = make_random(d, seed=100 + i)
    return fams


@pytest.fixture(scope="session")
def corpus():
    return nonneg_corpus()


@pytest.fixture
def scalar_pair():
    return validate_family([[[2.0]], [[8.0]]], [0.5, 0.5])


# PASS/FAIL lines recorded by the acceptance suite, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
