import math

import numpy as np
import pytest

from lrpr.oracle import (
    davis_kahan_check,
    expected_upsilon_rank1_check,
    expected_upsilon_rankr_check,
    flat_index,
    fourth_moment_check,
    fourth_moment_tensor,
    gauss_product_tail_bound,
    gauss_product_tail_check,
    octa_moment_check,
    octa_moment_tensor,
    quad_form_check,
    random_dk_instance,
)
from lrpr.rng import RngSpec

from conftest import unit


def test_fourth_moment_closed_form():
    assert fourth_moment_tensor(1)[0, 0, 0, 0] == 3
    T = fourth_moment_tensor(2)
    assert T[0, 0, 1, 1] == 1 and T[0, 1, 0, 1] == 1 and T[0, 1, 1, 0] == 1
    assert T[0, 0, 0, 1] == 0
    rep = fourth_moment_check(2, N=20_000, rng=1, tol=None)
    assert rep.analytic[flat_index((0, 0, 1, 1), 2)] == 1
    assert rep.analytic.shape == (16,)


def test_flat_index_layout():
    T = np.arange(3**4).reshape(3, 3, 3, 3)
    flat = np.ravel(T, order="F")
    assert flat[flat_index((1, 2, 0, 1), 3)] == T[1, 2, 0, 1]


def test_quad_form_closed_form():
    e1, e2 = np.eye(2)
    rep = quad_form_check(e1, e1, N=1000, rng=0)
    assert np.allclose(rep.analytic, np.diag([3.0, 1.0]))
    rep = quad_form_check(e1, e2, N=1000, rng=0)
    assert np.allclose(rep.analytic, np.outer(e1, e2) + np.outer(e2, e1))
    with pytest.raises(ValueError):
        quad_form_check(np.ones(2), np.ones(3), N=10)


def test_octa_closed_form():
    assert octa_moment_tensor(np.array([1.0]))[0, 0, 0, 0] == 105
    T = octa_moment_tensor(np.array([1.0, 0.0]))
    assert T[1, 1, 1, 1] == 9
    # direct pairing count for (x^T g)^4 g1^2 g2^2 with x = e1: E g1^6 E g2^2 = 15
    assert T[0, 0, 1, 1] == 15
    with pytest.raises(ValueError):
        octa_moment_check(np.array([1.0, 1.0]), N=10)


def test_octa_pairing_oracle(gen):
    # independent oracle: sum over all 105 pairings of 8 slots (Isserlis)
    x = unit(gen.standard_normal(2))

    def pairings(items):
        if not items:
            yield []
            return
        a = items[0]
        for k in range(1, len(items)):
            rest = items[1:k] + items[k + 1:]
            for p in pairings(rest):
                yield [(a, items[k])] + p

    def cov(s, t):
        # slots 0..3 are x^T g, slots 4..7 are g_i, g_j, g_k, g_l
        vs = [x] * 4 + [np.eye(2)[i] for i in idx]
        return vs[s] @ vs[t]

    T = octa_moment_tensor(x)
    for idx in [(0, 0, 0, 0), (0, 1, 0, 1), (1, 1, 1, 0), (1, 1, 1, 1)]:
        total = sum(np.prod([cov(s, t) for s, t in p]) for p in pairings(list(range(8))))
        assert T[idx] == pytest.approx(total, abs=1e-12)


def test_moment_error_shrinks_with_samples():
    def mean_err(N):
        return np.mean([fourth_moment_check(2, N, RngSpec(s)).max_abs_err for s in range(6)])

    ratio = mean_err(20_000) / mean_err(80_000)
    assert 1.0 <= ratio <= 4.0


def test_checks_deterministic():
    a = fourth_moment_check(2, 30_000, 5)
    b = fourth_moment_check(2, 30_000, 5)
    assert np.array_equal(a.empirical, b.empirical)


def test_upsilon_rank1_closed_forms(gen):
    u = unit(gen.standard_normal(3) + 1j * gen.standard_normal(3))
    v = unit(gen.standard_normal(3) + 1j * gen.standard_normal(3))
    rep = expected_upsilon_rank1_check(u, v, 0.0, 0.5, 3, M=100, rng=0)
    assert np.allclose(rep.analytic, 0.5 * np.eye(3))
    rep = expected_upsilon_rank1_check(u, v, 1.0, 1.0, 3, M=100, rng=0)
    assert np.allclose(rep.analytic, np.outer(u, u.conj()) + 2 * np.eye(3))
    with pytest.raises(ValueError):
        expected_upsilon_rank1_check(2 * u, v, 1.0, 0.0, 3, M=10)


def test_upsilon_rankr_closed_forms():
    e = np.eye(3)
    X = np.outer(e[0], e[0])
    rep = expected_upsilon_rankr_check(X, e[:, :1], 0.0, M=100, rng=0)
    assert np.allclose(rep.analytic, 2 * np.outer(e[0], e[0]) + np.eye(3))
    rep = expected_upsilon_rankr_check(X, e[:, 1:], 0.5, M=100, rng=0)
    assert np.allclose(rep.analytic, (2 * 1.0 + 2 * 0.5) * np.eye(3))


def test_upsilon_rank1_small_check_passes(gen):
    u = unit(gen.standard_normal(4) + 0j)
    v = unit(gen.standard_normal(4) + 0j)
    rep = expected_upsilon_rank1_check(u, v, 1.0, 0.3, 4, M=100_000, rng=2)
    assert rep.passed


def test_tail_bound_values():
    assert gauss_product_tail_bound(1.0, 1.0) == pytest.approx(0.5 * math.exp(-1))
    exact = math.erfc(1 / math.sqrt(2))  # P(|g| > 1)
    assert exact == pytest.approx(0.3173, abs=1e-4)
    assert exact >= gauss_product_tail_bound(1.0, 1.0)
    assert gauss_product_tail_bound(0.0, 1e-12) == pytest.approx(1 / 3, abs=1e-9)
    rep = gauss_product_tail_check(0.5, 0.5, N=200_000, rng=0)
    assert rep.passed and rep.lhs >= rep.rhs
    with pytest.raises(ValueError):
        gauss_product_tail_check(-1.0, 1.0, N=10)


def test_davis_kahan_cases(gen):
    A = np.diag([2.0, 1.0])
    r = davis_kahan_check(A, np.zeros((2, 2)), 1)
    assert r.passed and r.lhs == 0
    D = 0.1 * np.array([[0.0, 1.0], [1.0, 0.0]])
    r = davis_kahan_check(A, D, 1)
    assert r.passed and r.rhs == pytest.approx(0.4)
    # exact angle for the 2x2 case: tan(2 theta) = 2 * 0.1 / 1
    assert r.lhs == pytest.approx(math.sin(0.5 * math.atan(0.2)), abs=1e-12)
    assert davis_kahan_check(np.eye(2), D, 1).skipped
    # negative spectra are shifted, not rejected
    A2, D2 = random_dk_instance(gen, 5, 2)
    assert davis_kahan_check(A2 - 10 * np.eye(5), D2, 2).passed
    with pytest.raises(ValueError):
        davis_kahan_check(np.array([[1.0, 2.0], [0.0, 1.0]]), np.zeros((2, 2)), 1)
