import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from rank2ops.diffop import (
    BandedOp,
    Seq,
    Window,
    apply,
    band_residual_norm,
    commutator,
    compose,
    diag,
    from_bands,
    identity,
    lincomb,
    restrict_valid,
    shift,
    symmetrizable_weights,
    to_dense,
    trim_bands,
    zero_op,
)
from rank2ops.errors import NotSquareBands, WindowMismatch, WindowTooSmall

W = Window(0, 29)


def rand_op(rng, M, N, w=W):
    c = rng.normal(size=(M + N + 1, w.size)) + 1j * rng.normal(size=(M + N + 1, w.size))
    return BandedOp(w, M, N, c)


def rand_seq(rng, w=W):
    return Seq(w, rng.normal(size=w.size) + 1j * rng.normal(size=w.size))


def L2(v, c):
    return from_bands(W, {1: 1.0, 0: v, -1: c})


def test_shift_moves_delta():
    s = Seq(W, np.eye(W.size)[5])
    out = apply(shift(W, 1), s)
    assert out.window == Window(0, 28)
    assert out[4] == 1
    assert np.count_nonzero(out.values) == 1


def test_identity_apply():
    s = rand_seq(np.random.default_rng(0))
    out = apply(identity(W), s)
    assert out.window == W
    np.testing.assert_array_equal(out.values, s.values)


def test_geometric_eigenvector():
    x = 1.3 + 0.2j
    s = Seq(W, x ** W.sites())
    out = apply(L2(0.0, 1.0), s)
    np.testing.assert_allclose(out.values, (x + 1 / x) * s.restrict(out.window).values, rtol=1e-13)


def test_compose_shift_inverse():
    P = compose(shift(W, 1), shift(W, -1))
    assert P.valid == Window(0, 28)
    assert band_residual_norm(lincomb([(1, P), (-1, restrict_valid(identity(W), P.valid))])) == 0


def test_l2_squared_symbolic():
    rng = np.random.default_rng(1)
    v = rng.normal(size=W.size) + 1j * rng.normal(size=W.size)
    c = rng.normal(size=W.size) + 1j * rng.normal(size=W.size)
    sq = compose(L2(v, c), L2(v, c))
    assert (sq.m_lower, sq.n_upper) == (2, 2)
    for n in sq.valid.sites():
        assert sq.coeff(2, n) == 1
        assert np.isclose(sq.coeff(1, n), v[n + 1] + v[n], rtol=1e-14)
        assert np.isclose(sq.coeff(0, n), c[n + 1] + v[n] ** 2 + c[n], rtol=1e-14)
        assert np.isclose(sq.coeff(-1, n), v[n] * c[n] + c[n] * v[n - 1], rtol=1e-14)
        assert np.isclose(sq.coeff(-2, n), c[n] * c[n - 1], rtol=1e-14)


def test_shift_multiplication_exchange():
    v = np.arange(W.size, dtype=float) ** 2
    a = compose(diag(Seq(W, v)), shift(W))
    b = compose(shift(W), diag(Seq(W, v)))
    n = 10
    assert a.coeff(1, n) == v[n]
    assert b.coeff(1, n) == v[n + 1]


def test_commutator_examples():
    rng = np.random.default_rng(2)
    A = rand_op(rng, 2, 1)
    assert band_residual_norm(commutator(A, A)) == 0
    v = rng.normal(size=W.size)
    C = commutator(shift(W), diag(Seq(W, v)))
    for n in C.valid.sites():
        assert np.isclose(C.coeff(1, n), v[n + 1] - v[n], rtol=0, atol=1e-15)
    ramp = commutator(shift(W), diag(Seq(W, W.sites().astype(float))))
    assert band_residual_norm(ramp) == 1


def test_lincomb_examples():
    rng = np.random.default_rng(3)
    A = rand_op(rng, 1, 2)
    assert band_residual_norm(lincomb([(1, A), (-1, A)])) == 0
    two = lincomb([(2, identity(W))])
    assert (two.m_lower, two.n_upper) == (0, 0)
    assert np.all(two.band(0) == 2)


def test_norm_trivial():
    assert band_residual_norm(zero_op(W, 1, 1)) == 0
    assert band_residual_norm(identity(W)) == 1


def test_window_errors():
    with pytest.raises(WindowTooSmall):
        Window(3, 2)
    with pytest.raises(WindowMismatch):
        compose(identity(W), identity(Window(0, 10)))
    with pytest.raises(WindowTooSmall):
        apply(from_bands(Window(0, 2), {-2: 1.0, 2: 1.0}), Seq(Window(0, 2), np.ones(3)))
    with pytest.raises(WindowMismatch):
        band_residual_norm(compose(shift(W), shift(W, -1)), W)


@settings(max_examples=30, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    ma=st.integers(0, 3), na=st.integers(0, 3),
    mb=st.integers(0, 3), nb=st.integers(0, 3),
    mc=st.integers(0, 2), nc=st.integers(0, 2),
)
def test_associativity(seed, ma, na, mb, nb, mc, nc):
    rng = np.random.default_rng(seed)
    A, B, C = rand_op(rng, ma, na), rand_op(rng, mb, nb), rand_op(rng, mc, nc)
    l = compose(compose(A, B), C)
    r = compose(A, compose(B, C))
    sub = l.valid.intersect(r.valid)
    diff = lincomb([(1, l), (-1, r)])
    scale = max(band_residual_norm(l, sub), 1.0)
    assert band_residual_norm(diff, sub) < 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(0, 3), n=st.integers(0, 3))
def test_commutator_bilinear_exact(seed, m, n):
    rng = np.random.default_rng(seed)
    A, B, C = rand_op(rng, m, n), rand_op(rng, 1, 2), rand_op(rng, 2, 1)
    lhs = commutator(A, lincomb([(1, B), (1, C)]))
    rhs = lincomb([(1, commutator(A, B)), (1, commutator(A, C))])
    sub = lhs.valid.intersect(rhs.valid)
    scale = band_residual_norm(lhs, sub)
    assert band_residual_norm(lincomb([(1, lhs), (-1, rhs)]), sub) <= 1e-14 * scale


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), ma=st.integers(0, 3), na=st.integers(0, 3), mb=st.integers(0, 3), nb=st.integers(0, 3))
def test_apply_compose_consistency(seed, ma, na, mb, nb):
    rng = np.random.default_rng(seed)
    A, B = rand_op(rng, ma, na), rand_op(rng, mb, nb)
    s = rand_seq(rng)
    lhs = apply(compose(A, B), s)
    rhs = apply(A, apply(B, s))
    assert lhs.window == rhs.window
    np.testing.assert_allclose(lhs.values, rhs.values, rtol=1e-12, atol=1e-12 * np.abs(rhs.values).max())


@settings(max_examples=30, deadline=None)
@given(ma=st.integers(0, 4), na=st.integers(0, 4), mb=st.integers(0, 4), nb=st.integers(0, 4))
def test_window_bookkeeping(ma, na, mb, nb):
    rng = np.random.default_rng(0)
    A, B = rand_op(rng, ma, na), rand_op(rng, mb, nb)
    AB = compose(A, B)
    # composition only loses the left factor's stencil
    assert AB.valid == Window(W.lo + ma, W.hi - na)
    assert (AB.m_lower, AB.n_upper) == (ma + mb, na + nb)
    assert apply(A, rand_seq(rng)).window == Window(W.lo + ma, W.hi - na)
    C = commutator(A, B)
    assert C.valid == Window(W.lo + max(ma, mb), W.hi - max(na, nb))
    ABC = compose(AB, B)
    assert ABC.valid == Window(W.lo + ma + mb, W.hi - na - nb)


def test_dense_matches_apply():
    rng = np.random.default_rng(4)
    A = rand_op(rng, 2, 1)
    A = restrict_valid(A, Window(2, W.hi - 1))
    s = rand_seq(rng)
    np.testing.assert_allclose(to_dense(A) @ s.values, apply(A, s).values, rtol=1e-13)


@settings(max_examples=20, deadline=None)
@given(arr=hnp.arrays(np.float64, (4, 12), elements=st.floats(-1e3, 1e3)), im=st.floats(-1, 1))
def test_json_round_trip_bit_exact(arr, im):
    op = BandedOp(Window(-3, 8), 1, 2, arr + 1j * im * arr[::-1], Window(-2, 6))
    back = BandedOp.from_json(json.loads(json.dumps(op.to_json())))
    assert back.window == op.window and back.valid == op.valid
    assert (back.m_lower, back.n_upper) == (1, 2)
    assert np.array_equal(back.coeffs, op.coeffs)


def test_symmetrizable_l2_positive_c():
    rng = np.random.default_rng(5)
    v = rng.normal(size=W.size)
    c = rng.uniform(0.5, 2.0, size=W.size)
    op = L2(v, c)
    d = symmetrizable_weights(op)
    assert d is not None
    assert d.values[0] == 1
    # oracle: d_n * 1 = d_{n+1} * c_{n+1}, solved forward
    ref = np.ones(W.size)
    for n in range(W.size - 1):
        ref[n + 1] = ref[n] / c[n + 1]
    np.testing.assert_allclose(d.values.real, ref, rtol=1e-13)


def test_symmetrizable_constant_symmetric():
    op = from_bands(W, {-2: 0.3, -1: 1.5, 0: 2.0, 1: 1.5, 2: 0.3})
    d = symmetrizable_weights(op)
    np.testing.assert_array_equal(d.values, np.ones(W.size))


def test_symmetrizable_rejects():
    with pytest.raises(NotSquareBands):
        symmetrizable_weights(shift(W))
    assert symmetrizable_weights(L2(0.0, -1.0)) is None
    assert symmetrizable_weights(from_bands(W, {-2: 0.1, -1: 1.0, 0: 0.0, 1: 1.0, 2: 0.7})) is None


def test_trim_bands():
    op = from_bands(W, {-2: 0.0, 1: 2.0})
    t = trim_bands(op, 0, 1)
    assert (t.m_lower, t.n_upper) == (0, 1)
    with pytest.raises(ValueError):
        trim_bands(op, 0, 0)
