import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lyapbound.bounds import (
    AlphaObjective,
    alpha_eval,
    alpha_optimize,
    alpha_tilde_eval,
    alpha_tilde_optimize,
    beta_eval,
    beta_optimize,
    beta_tilde_eval,
    beta_tilde_support,
    euclidean_upper,
    gamma_orthant_eval,
    transpose_family,
)
from lyapbound.core import monte_carlo_lambda, validate_family
from lyapbound.corpus import make_sigma6, make_swap_pair
from lyapbound.structure import NotNonnegative, PartitionStructure, positive_product_or_partition

from conftest import brute_force_products

LOG2 = math.log(2)
PERRON = validate_family([[[2.0, 1.0], [1.0, 2.0]]])


def alpha_oracle(fam, k, x):
    return sum(p * math.log(max((B @ x) / x)) for p, B in brute_force_products(fam, k)) / k


def beta_oracle(fam, k, v):
    prods = brute_force_products(fam, k)
    return min(-math.log(v[j]) + sum(p * math.log(v @ B[:, j]) for p, B in prods) for j in range(fam.dim)) / k


# --- alpha -----------------------------------------------------------------


def test_alpha_identity():
    fam = validate_family([np.eye(3)])
    for k in (1, 3):
        assert alpha_eval(fam, k).value == 0.0


def test_alpha_scalar(scalar_pair):
    assert alpha_eval(scalar_pair, 1, [1.0]).value == pytest.approx(2 * LOG2, abs=1e-15)


def test_alpha_sigma6_row_sums():
    fam = make_sigma6()
    row_sums = fam.matrices.sum(axis=2)
    assert row_sums.tolist() == [[4, 0, 3, 4, 0, 0], [3, 1, 3, 3, 1, 1]]
    rep = alpha_eval(fam, 1)
    assert rep.value == pytest.approx(0.5 * math.log(12), abs=1e-14)
    assert rep.value == pytest.approx(1.24245, abs=1e-5)
    assert rep.kind == "alpha" and rep.certificate == "valid-for-any-parameter"


def test_alpha_rejects_bad_input():
    with pytest.raises(ValueError, match="strictly positive"):
        alpha_eval(PERRON, 1, [1.0, 0.0])
    with pytest.raises(NotNonnegative):
        alpha_eval(validate_family([[[1.0, -1.0], [0.0, 1.0]]]), 1)


def test_alpha_matches_enumeration():
    rng = np.random.default_rng(3)
    fam = validate_family(rng.random((2, 3, 3)) * (rng.random((2, 3, 3)) < 0.7) + 0.01 * np.eye(3))
    x = rng.random(3) + 0.2
    for k in (1, 2, 5):
        assert alpha_eval(fam, k, x).value == pytest.approx(alpha_oracle(fam, k, x), rel=1e-12)


def test_alpha_optimize_examples(scalar_pair):
    assert alpha_optimize(scalar_pair, 1).value == pytest.approx(2 * LOG2, abs=1e-15)
    rep = alpha_optimize(PERRON, 1, u0=[0.7, -0.4])
    assert rep.value == pytest.approx(math.log(3), abs=1e-6)
    assert rep.optimized and rep.parameter[0] == pytest.approx(rep.parameter[1], rel=1e-3)


def test_alpha_optimize_never_worse(corpus):
    for name in ("sigma6", "derham_1/5", "random_d5_s0"):
        fam = corpus[name]
        assert alpha_optimize(fam, 2).value <= alpha_eval(fam, 2).value + 1e-9


# --- beta ------------------------------------------------------------------


def test_beta_examples(scalar_pair):
    assert beta_eval(scalar_pair, 1, [1.0]).value == pytest.approx(2 * LOG2, abs=1e-15)
    for k in (1, 4):
        assert beta_eval(validate_family([np.eye(2)]), k, [0.3, 2.0]).value == 0.0


def test_beta_sigma6_column_sums():
    fam = make_sigma6()
    col_sums = fam.matrices.sum(axis=1)
    assert col_sums.tolist() == [[1, 2, 2, 2, 2, 2], [2, 2, 2, 2, 2, 2]]
    assert beta_eval(fam, 1).value == pytest.approx(0.5 * LOG2, abs=1e-15)
    assert beta_eval(fam, 1).value == pytest.approx(0.34657, abs=1e-5)


def test_beta_matches_enumeration():
    rng = np.random.default_rng(4)
    fam = validate_family(rng.random((3, 3, 3)), [0.2, 0.5, 0.3])
    v = rng.random(3) + 0.1
    for k in (1, 3):
        assert beta_eval(fam, k, v).value == pytest.approx(beta_oracle(fam, k, v), rel=1e-12)


def test_beta_zero_column_flagged():
    fam = validate_family([[[2.0, 0.0], [1.0, 0.0]], [[3.0, 0.0], [1.0, 0.0]]])
    rep = beta_eval(fam, 1)
    assert rep.value == -math.inf and not rep.is_finite
    assert "beta_tilde" in rep.flag and "transposed" in rep.flag
    assert rep.csv_row()["value"] == "-inf"


def test_beta_optimize_examples(scalar_pair):
    assert beta_optimize(scalar_pair, 1).value == pytest.approx(2 * LOG2, abs=1e-15)
    assert beta_optimize(PERRON, 1, w0=[1.0, 0.0]).value == pytest.approx(math.log(3), abs=1e-6)


def test_beta_optimize_never_worse(corpus):
    for name in ("sigma6", "derham_1/7", "random_d5_s1"):
        fam = corpus[name]
        assert beta_optimize(fam, 2).value >= beta_eval(fam, 2).value - 1e-9


# --- alpha tilde / beta tilde ----------------------------------------------


def test_alpha_tilde_single_class_is_alpha(corpus):
    for name in ("sigma6", "derham_1/3", "random_d5_s2"):
        fam = corpus[name]
        one = PartitionStructure((tuple(range(fam.dim)),), tuple((0,) for _ in range(fam.m)))
        for k in (1, 3):
            assert alpha_tilde_eval(fam, one, k).value == alpha_eval(fam, k).value


def test_alpha_tilde_swap():
    fam = validate_family([[[0.0, 2.0], [2.0, 0.0]]])
    part = positive_product_or_partition(fam).structure
    assert alpha_tilde_eval(fam, part, 1, [1.0, 1.0]).value == pytest.approx(LOG2, abs=1e-15)


def test_alpha_tilde_swap_pair_closed_form():
    fam = make_swap_pair()
    part = positive_product_or_partition(fam).structure
    target = 0.25 * math.log(30)
    for k in (2, 4, 8):
        a = alpha_tilde_eval(fam, part, k).value
        b = beta_eval(fam, k).value
        assert b - 1e-12 <= target <= a + 1e-12
        assert a == pytest.approx(target, abs=1e-12)
    assert alpha_tilde_optimize(fam, part, 3).value >= target - 1e-12


def test_alpha_tilde_rejects_bad_partition():
    fam = make_swap_pair()
    wrong = PartitionStructure(((0,), (1,)), ((0, 1), (0, 1)))
    with pytest.raises(ValueError, match="inconsistent"):
        alpha_tilde_eval(fam, wrong, 1)


def test_beta_tilde_positive_v_is_beta(corpus):
    fam = corpus["random_d5_s3"]
    v = np.linspace(0.5, 2.0, 5)
    assert beta_tilde_eval(fam, 2, v).value == pytest.approx(beta_eval(fam, 2, v).value, abs=1e-15)


def test_beta_tilde_examples():
    single = validate_family([[[1.0, 0.0], [1.0, 0.0]]])
    for k in (1, 2, 5):
        assert beta_tilde_eval(single, k, [1.0, 0.0]).value == pytest.approx(0.0, abs=1e-15)
    pair = validate_family([[[2.0, 0.0], [1.0, 0.0]], [[3.0, 0.0], [1.0, 0.0]]])
    assert beta_tilde_eval(pair, 1, [1.0, 0.0]).value == pytest.approx(0.5 * math.log(6), abs=1e-12)
    assert beta_tilde_support(pair, 1).tolist() == [1.0, 0.0]


def test_beta_tilde_bad_support_flagged():
    pair = validate_family([[[2.0, 0.0], [1.0, 0.0]], [[3.0, 0.0], [1.0, 0.0]]])
    rep = beta_tilde_eval(pair, 1, [0.0, 1.0])
    assert rep.value == -math.inf and rep.flag
    with pytest.raises(ValueError):
        beta_tilde_eval(pair, 1, [0.0, 0.0])


# --- transpose, euclid, gamma ------------------------------------------------


def test_transpose_family():
    sym = validate_family([[[1.0, 2.0], [2.0, 1.0]], np.eye(2)])
    assert transpose_family(sym) == sym
    rng = np.random.default_rng(0)
    fam = validate_family(rng.random((3, 4, 4)), [0.2, 0.3, 0.5])
    assert transpose_family(transpose_family(fam)) == fam
    # zero rows become zero columns
    s6 = make_sigma6()
    assert beta_eval(s6, 1).is_finite
    assert not beta_eval(transpose_family(s6), 1).is_finite


def test_euclid_examples():
    assert euclidean_upper(validate_family([np.eye(3)]), 2).value == 0.0
    fib = validate_family([[[0.0, 1.0], [1.0, 1.0]]])
    top = max(np.linalg.eigvalsh(fib.matrices[0].T @ fib.matrices[0]))
    assert top == pytest.approx((3 + math.sqrt(5)) / 2, rel=1e-14)
    assert euclidean_upper(fib, 1).value == pytest.approx(0.5 * math.log(top), rel=1e-10)
    rots = [[[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]] for t in (0.3, 1.1, 2.0)]
    for k in (1, 2, 3):
        assert euclidean_upper(validate_family(rots), k).value == pytest.approx(0.0, abs=1e-14)


def test_euclid_zero_product():
    nil = validate_family([[[0.0, 1.0], [0.0, 0.0]]])
    rep = euclidean_upper(nil, 2)
    assert rep.value == -math.inf and "zero" in rep.flag


def test_gamma_orthant_examples(scalar_pair):
    assert gamma_orthant_eval(validate_family([np.eye(2)]), 1, [1.0, 1.0]).value == pytest.approx(0.0, abs=1e-15)
    assert gamma_orthant_eval(scalar_pair, 2).value == pytest.approx(2 * LOG2, abs=1e-12)
    rep = gamma_orthant_eval(PERRON, 1, [1.0, 1.0])
    assert rep.value == pytest.approx(math.log(3), abs=1e-12)
    assert rep.certificate.startswith("frank-wolfe-gap")


def test_gamma_orthant_upper_bounds_mc(corpus):
    fam = corpus["sigma6"]
    mc = monte_carlo_lambda(fam, 3000, 30, seed=9)
    for k in (1, 3):
        g = gamma_orthant_eval(fam, k)
        assert g.value >= mc.mean - 3 * mc.stderr
        assert g.value >= beta_eval(fam, k).value - 1e-9


# --- invariants ---------------------------------------------------------------

positive_vectors = st.lists(st.floats(0.05, 20.0), min_size=5, max_size=5).map(np.array)


def test_sandwich_and_doubling(corpus):
    for name, fam in corpus.items():
        ones = np.ones(fam.dim)
        for k in (1, 2, 4):
            a, a2 = alpha_eval(fam, k, ones).value, alpha_eval(fam, 2 * k, ones).value
            b, b2 = beta_eval(fam, k, ones).value, beta_eval(fam, 2 * k, ones).value
            assert b <= a + 1e-9, name
            assert a2 <= a + 1e-9, name
            assert b2 >= b - 1e-9, name


@settings(max_examples=25, deadline=None)
@given(x=positive_vectors, v=positive_vectors, c=st.floats(0.01, 100.0), k=st.integers(1, 4))
def test_sandwich_any_parameters(x, v, c, k):
    fam = validate_family(np.random.default_rng(5).random((2, 5, 5)))
    a = alpha_eval(fam, k, x).value
    b = beta_eval(fam, k, v).value
    assert b <= a + 1e-9
    assert alpha_eval(fam, k, c * x).value == pytest.approx(a, abs=1e-12)
    assert beta_eval(fam, k, c * v).value == pytest.approx(b, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000), k=st.integers(1, 3))
def test_permutation_equivariance(seed, k):
    rng = np.random.default_rng(seed)
    fam = validate_family(rng.random((2, 4, 4)) * (rng.random((2, 4, 4)) < 0.8) + 0.05 * np.eye(4))
    perm = rng.permutation(4)
    pf = fam.conjugate_by_permutation(perm)
    x, v = rng.random(4) + 0.1, rng.random(4) + 0.1
    assert alpha_eval(pf, k, x[perm]).value == pytest.approx(alpha_eval(fam, k, x).value, abs=1e-12)
    assert beta_eval(pf, k, v[perm]).value == pytest.approx(beta_eval(fam, k, v).value, abs=1e-12)
    assert euclidean_upper(pf, k).value == pytest.approx(euclidean_upper(fam, k).value, abs=1e-12)


def test_gap_decay_monitor(corpus):
    # families with a positive product and no zero rows/columns: k * gap stays bounded
    for name in ("derham_1/3", "random_d5_s0", "random_d10_s5"):
        fam = corpus[name]
        scaled = [k * (alpha_eval(fam, k).value - beta_eval(fam, k).value) for k in (1, 2, 4, 8)]
        assert all(math.isfinite(s) and s >= -1e-9 for s in scaled)
        assert max(scaled) <= 2 * scaled[0] + 1e-9, (name, scaled)


def test_report_serialisation():
    rep = alpha_eval(PERRON, 1)
    row = rep.csv_row()
    assert list(row) == ["kind", "k", "value", "optimized", "certificate", "wall_time_ms"]
    assert float(row["value"]) == rep.value
    assert rep.sidecar()["parameter"] == [1.0, 1.0]


def test_alpha_objective_exact_matches_eval(corpus):
    fam = corpus["random_d5_s4"]
    u = np.random.default_rng(1).normal(size=5)
    obj = AlphaObjective(fam, 3)
    assert obj.exact(u) == pytest.approx(alpha_eval(fam, 3, np.exp(u)).value, rel=1e-12)
