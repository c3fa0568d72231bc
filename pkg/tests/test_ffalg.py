import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdq.errors import ValidationError
from cdq.ffalg import (
    Fp,
    FpMatrix,
    FpPoly,
    batch_rank,
    batch_rank_generic,
    companion_matrix,
    find_primitive_polynomial,
    gaussian_binomial,
    inverse_table,
    is_prime,
    matrix_order,
    minimal_polynomial,
    projective_points,
    subspace_count,
)


def span_size(rows, p):
    """Number of distinct vectors in the row span, by listing all combinations."""
    rows = np.asarray(rows) % p
    seen = set()
    for coeffs in itertools.product(range(p), repeat=rows.shape[0]):
        seen.add(tuple((np.array(coeffs) @ rows) % p))
    return len(seen)


def brute_rank(rows, p):
    size, r = span_size(rows, p), 0
    while p**r < size:
        r += 1
    return r


def matrices(p, max_rows=5, max_cols=6):
    return st.integers(1, max_rows).flatmap(
        lambda r: st.integers(1, max_cols).flatmap(
            lambda c: st.lists(
                st.lists(st.integers(0, p - 1), min_size=c, max_size=c), min_size=r, max_size=r
            )
        )
    )


def test_primes():
    assert [q for q in range(30) if is_prime(q)] == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    with pytest.raises(ValidationError):
        Fp(4, 1)


def test_inverse_table():
    for p in (2, 3, 5, 7, 65521):
        inv = inverse_table(p)
        xs = np.arange(1, min(p, 2000))
        assert np.all(xs * inv[xs] % p == 1)


def test_fp_scalar():
    a = Fp(7, 3)
    assert int(a * a.inverse()) == 1
    assert int(a - 5) == 5
    assert Fp(7, 2).is_square() and not Fp(7, 3).is_square()


@settings(max_examples=60, deadline=None)
@given(matrices(3, max_rows=6, max_cols=6))
def test_rank_matches_span_count_f3(rows):
    m = FpMatrix(rows, 3)
    assert m.rank == brute_rank(rows, 3)


@settings(max_examples=60, deadline=None)
@given(matrices(2, max_rows=6, max_cols=8))
def test_rank_matches_span_count_f2(rows):
    assert FpMatrix(rows, 2).rank == brute_rank(rows, 2)


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([2, 3, 5, 7]), st.data())
def test_kernel_and_rank_nullity(p, data):
    rows = data.draw(matrices(p, 5, 7))
    m = FpMatrix(rows, p)
    ker = m.kernel()
    for v in ker:
        assert not ((m.array @ v) % p).any()
    assert m.rank + len(ker) == m.cols
    assert m.rank == m.T.rank


def test_kernel_of_identity_and_zero():
    assert FpMatrix.identity(4, 5).kernel() == []
    assert len(FpMatrix.zeros(2, 4, 5).kernel()) == 4


def test_rref_canonical():
    m = FpMatrix([[2, 4, 1], [1, 2, 0]], 5)
    r, piv, rk = m.rref()
    assert rk == 2 and piv == (0, 2)
    assert r.tolist() == [[1, 2, 0], [0, 0, 1]]


@settings(max_examples=50, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 5), st.data())
def test_inverse(p, n, data):
    rows = data.draw(st.lists(st.lists(st.integers(0, p - 1), min_size=n, max_size=n), min_size=n, max_size=n))
    m = FpMatrix(rows, p)
    if m.is_invertible():
        assert (m @ m.inverse()).is_identity()
        assert (m ** -2 @ m @ m).is_identity()
    else:
        with pytest.raises(ZeroDivisionError):
            m.inverse()


def test_solve_left():
    a = FpMatrix([[1, 1], [0, 1], [1, 0]], 2)
    t = FpMatrix([[1, 0]], 2)
    x = a.solve_left(t)
    assert x is not None and x @ a == t
    assert FpMatrix([[1, 0]], 2).solve_left(FpMatrix([[0, 1]], 2)) is None


def test_immutable_and_shape_checks():
    m = FpMatrix([[1, 2], [3, 4]], 5)
    with pytest.raises(ValueError):
        m.array[0, 0] = 3
    with pytest.raises(ValidationError):
        m @ FpMatrix([[1, 2, 3]], 5)
    with pytest.raises(ValidationError):
        m + FpMatrix([[1, 2], [3, 4]], 7)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 6), st.integers(1, 9), st.integers(0, 2**31))
def test_batch_rank_matches_single(p, r, c, seed):
    rng = np.random.default_rng(seed)
    mats = rng.integers(0, p, size=(25, r, c))
    mats[::3, 0] = 0
    expect = [FpMatrix(x, p).rank for x in mats]
    assert batch_rank(mats, p).tolist() == expect
    assert batch_rank_generic(mats, p).tolist() == expect


def test_gf2_packed_against_generic():
    rng = np.random.default_rng(7)
    for c in (1, 5, 17, 64):
        mats = rng.integers(0, 2, size=(300, 12, c))
        assert np.array_equal(batch_rank(mats, 2), batch_rank_generic(mats, 2))


def test_poly_basics():
    f = FpPoly.from_k(2, [1, 1])  # x^2 - x - 1 = x^2 + x + 1 over F_2
    assert f.coeffs == (1, 1, 1) and f.degree == 2 and f.is_monic()
    assert f.ks == (1, 1)
    assert f(1) == 1
    assert f.is_irreducible()
    assert not FpPoly(2, (1, 0, 1)).is_irreducible()  # (x+1)^2
    assert str(FpPoly(3, (2, 0, 1))).startswith("x^2")


def _monic(p, deg):
    for lower in itertools.product(range(p), repeat=deg):
        yield FpPoly(p, tuple(lower) + (1,))


def _product(f, g):
    p = f.p
    out = [0] * (len(f.coeffs) + len(g.coeffs) - 1)
    for i, x in enumerate(f.coeffs):
        for j, y in enumerate(g.coeffs):
            out[i + j] = (out[i + j] + x * y) % p
    return FpPoly(p, tuple(out))


@pytest.mark.parametrize("p,deg", [(2, 2), (2, 3), (2, 4), (3, 2), (3, 3), (5, 2)])
def test_irreducible_against_products(p, deg):
    reducible = set()
    for k in range(1, deg // 2 + 1):
        for f in _monic(p, k):
            for g in _monic(p, deg - k):
                reducible.add(_product(f, g).coeffs)
    for f in _monic(p, deg):
        assert f.is_irreducible() == (f.coeffs not in reducible)


def test_companion_matrix_layout():
    poly = FpPoly.from_k(3, [1, 2, 0])
    b = companion_matrix(poly)
    assert b.tolist() == [[0, 0, 1], [1, 0, 2], [0, 1, 0]]
    assert poly(b).is_zero()
    with pytest.raises(ValidationError):
        companion_matrix(FpPoly(3, (1, 2)))


def _order_by_iteration(m):
    acc, k = m, 1
    while not acc.is_identity():
        acc, k = acc @ m, k + 1
    return k


@pytest.mark.parametrize("p", [2, 3, 5])
@pytest.mark.parametrize("a", [1, 2, 3, 4])
def test_primitive_polynomial_order(p, a):
    poly = find_primitive_polynomial(p, a)
    b = companion_matrix(poly)
    assert poly.degree == a and poly.is_irreducible()
    assert _order_by_iteration(b) == p**a - 1
    assert matrix_order(b) == p**a - 1


def test_primitive_polynomials_known():
    # first in k_0-fastest order, found by scanning all candidates by hand
    assert find_primitive_polynomial(2, 2).coeffs == (1, 1, 1)
    assert find_primitive_polynomial(2, 3).coeffs == (1, 1, 0, 1)
    assert find_primitive_polynomial(2, 4).coeffs == (1, 1, 0, 0, 1)
    assert find_primitive_polynomial(3, 1).coeffs == (1, 1)  # x - 2


def test_primitive_is_lexicographically_first():
    for p, a in [(2, 3), (3, 2), (5, 2)]:
        best = find_primitive_polynomial(p, a)
        for ks_rev in itertools.product(range(p), repeat=a):
            ks = tuple(reversed(ks_rev))
            cand = FpPoly.from_k(p, ks)
            if cand == best:
                break
            if ks[0]:
                assert matrix_order(companion_matrix(cand)) != p**a - 1


def test_matrix_order_singular():
    assert matrix_order(FpMatrix([[1, 1], [1, 1]], 2)) is None
    assert matrix_order(FpMatrix.identity(3, 5)) == 1


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([2, 3, 5]), st.integers(1, 4), st.integers(0, 2**31))
def test_minimal_polynomial(p, n, seed):
    rng = np.random.default_rng(seed)
    m = FpMatrix(rng.integers(0, p, size=(n, n)), p)
    mp = minimal_polynomial(m)
    assert mp.is_monic() and 1 <= mp.degree <= n
    assert mp(m).is_zero()
    # nothing of lower degree kills m
    for deg in range(1, mp.degree):
        for f in _monic(p, deg):
            assert not f(m).is_zero()


def test_minpoly_of_companion():
    poly = find_primitive_polynomial(3, 3)
    assert minimal_polynomial(companion_matrix(poly)) == poly


def test_subspace_counts():
    assert gaussian_binomial(4, 2, 2) == 35
    assert subspace_count(2, 6) == 2825
    # by dimension over F_3^6: 1, 364, 11011, 33880, 11011, 364, 1
    assert [gaussian_binomial(6, k, 3) for k in range(7)] == [1, 364, 11011, 33880, 11011, 364, 1]
    assert subspace_count(3, 6) == 56632
    assert len(projective_points(3, 3)) == 13


def _det(rows, p):
    """Leibniz expansion."""
    n = len(rows)
    total = 0
    for perm in itertools.permutations(range(n)):
        inversions = sum(perm[i] > perm[j] for i in range(n) for j in range(i + 1, n))
        term = -1 if inversions % 2 else 1
        for i in range(n):
            term *= rows[i][perm[i]]
        total += term
    return total % p


def minor_rank(m, p):
    m = np.asarray(m)
    r, c = m.shape
    for k in range(min(r, c), 0, -1):
        for ri in itertools.combinations(range(r), k):
            for ci in itertools.combinations(range(c), k):
                if _det(m[np.ix_(ri, ci)].tolist(), p):
                    return k
    return 0


def test_rank_against_minor_expansion_6x6_f3():
    rng = np.random.default_rng(3)
    for k in range(12):
        m = rng.integers(0, 3, size=(6, 6))
        # force some rank deficiency in half the cases
        if k % 2:
            m[5] = (m[0] + 2 * m[1]) % 3
            m[4] = (m[2] + m[3]) % 3
        assert FpMatrix(m, 3).rank == minor_rank(m, 3)
