import numpy as np
import pytest

from sasdeconv.conv import (
    OpCounter,
    cconv,
    cconv2d,
    ccorr,
    ccorr2d,
    flip2d,
    naive_cconv,
    naive_cconv2d,
    naive_ccorr,
    restrict,
    shift_cyclic,
    zero_pad,
)


def delta(n, i=0):
    e = np.zeros(n)
    e[i] = 1.0
    return e


class TestCconv:
    def test_delta_is_identity(self):
        u = np.array([1.0, 2.0, 3.0, 4.0])
        assert np.allclose(cconv(u, delta(1)), u)

    def test_shift_by_delta(self):
        u = np.array([1.0, 2.0, 3.0, 4.0])
        assert np.allclose(cconv(u, delta(2, 1)), [4.0, 1.0, 2.0, 3.0])

    def test_matches_naive(self):
        rng = np.random.default_rng(0)
        u = rng.uniform(-1, 1, 37)
        v = rng.uniform(-1, 1, 8)
        got = cconv(u, v)
        want = naive_cconv(u, v)
        assert np.linalg.norm(got - want) <= 1e-12 * np.linalg.norm(want)

    def test_delta_shift_sweep(self):
        rng = np.random.default_rng(1)
        u = rng.normal(size=23)
        for ell in range(1, 9):
            assert np.allclose(cconv(u, delta(9, ell - 1)),
                               shift_cyclic(u, ell - 1), atol=1e-12)

    def test_linearity(self):
        rng = np.random.default_rng(2)
        u, w = rng.normal(size=(2, 31))
        v = rng.normal(size=6)
        lhs = cconv(2.5 * u + w, v)
        rhs = 2.5 * cconv(u, v) + cconv(w, v)
        assert np.allclose(lhs, rhs, atol=1e-12)

    def test_kernel_longer_than_signal_rejected(self):
        with pytest.raises(ValueError):
            cconv(np.ones(4), np.ones(5))


class TestCcorr:
    def test_delta_is_identity(self):
        u = np.array([0.5, -1.0, 2.0])
        assert np.allclose(ccorr(delta(1), u), u)

    def test_inverse_of_shift_example(self):
        assert np.allclose(ccorr(delta(2, 1), np.array([4.0, 1.0, 2.0, 3.0])),
                           [1.0, 2.0, 3.0, 4.0])

    def test_adjoint_identity(self):
        rng = np.random.default_rng(3)
        x, u = rng.normal(size=(2, 41))
        v = rng.normal(size=7)
        lhs = float(np.dot(cconv(x, v), u))
        rhs = float(np.dot(x, ccorr(v, u)))
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)

    def test_matches_naive(self):
        rng = np.random.default_rng(4)
        u = rng.normal(size=29)
        v = rng.normal(size=5)
        assert np.allclose(ccorr(v, u), naive_ccorr(v, u), atol=1e-12)


class TestShiftPadRestrict:
    def test_shift_examples(self):
        v = np.array([1.0, 2.0, 3.0])
        assert np.array_equal(shift_cyclic(v, 0), v)
        assert np.array_equal(shift_cyclic(v, 3), v)
        assert np.array_equal(shift_cyclic(v, 1), [3.0, 1.0, 2.0])

    def test_pad_restrict_roundtrip(self):
        v = np.array([1.0, 2.0])
        assert np.array_equal(zero_pad(v, 4), [1.0, 2.0, 0.0, 0.0])
        rng = np.random.default_rng(5)
        w = rng.normal(size=9)
        assert np.array_equal(restrict(zero_pad(w, 20), 9), w)

    def test_pad_restrict_adjoint(self):
        rng = np.random.default_rng(6)
        v = rng.normal(size=11)
        u = rng.normal(size=30)
        lhs = float(np.dot(zero_pad(v, 30), u))
        rhs = float(np.dot(v, restrict(u, 11)))
        assert abs(lhs - rhs) <= 1e-12 * max(1.0, abs(lhs))

    def test_dimension_errors(self):
        with pytest.raises(ValueError):
            zero_pad(np.ones(5), 3)
        with pytest.raises(ValueError):
            restrict(np.ones(3), 5)


class TestConv2d:
    def test_delta_identity(self):
        rng = np.random.default_rng(7)
        u = rng.normal(size=(6, 7))
        d = np.zeros((1, 1))
        d[0, 0] = 1.0
        assert np.allclose(cconv2d(u, d), u)

    def test_flip_involution(self):
        rng = np.random.default_rng(8)
        z = rng.normal(size=(5, 9))
        assert np.array_equal(flip2d(flip2d(z)), z)
        assert flip2d(z)[0, 0] == z[-1, -1]

    def test_matches_naive(self):
        rng = np.random.default_rng(9)
        u = rng.uniform(-1, 1, (16, 16))
        v = rng.uniform(-1, 1, (4, 5))
        got = cconv2d(u, v)
        want = naive_cconv2d(u, v)
        assert np.linalg.norm(got - want) <= 1e-12 * np.linalg.norm(want)

    def test_adjoint_identity(self):
        rng = np.random.default_rng(10)
        x, u = rng.normal(size=(2, 12, 13))
        v = rng.normal(size=(3, 4))
        lhs = float(np.vdot(cconv2d(x, v), u))
        rhs = float(np.vdot(x, ccorr2d(v, u)))
        assert abs(lhs - rhs) <= 1e-12 * abs(lhs)

    def test_rank_errors(self):
        with pytest.raises(ValueError):
            cconv2d(np.ones(4), np.ones((2, 2)))
        with pytest.raises(ValueError):
            cconv(np.ones((4, 4)), np.ones(2))


class TestNaive:
    def test_all_ones(self):
        m, n = 12, 5
        assert np.allclose(naive_cconv(np.ones(m), np.ones(n)), n * np.ones(m))

    def test_agrees_with_fft_sweep(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            m = int(rng.integers(4, 80))
            n = int(rng.integers(1, m + 1))
            u = rng.uniform(-1, 1, m)
            v = rng.uniform(-1, 1, n)
            assert np.allclose(cconv(u, v), naive_cconv(u, v), atol=1e-11)


def test_op_counter_three_per_call():
    c = OpCounter()
    u = np.ones(8)
    cconv(u, np.ones(3), counter=c)
    assert c.fft_ops == 3
    ccorr(np.ones(3), u, counter=c)
    assert c.fft_ops == 6
    cconv2d(np.ones((4, 4)), np.ones((2, 2)), counter=c)
    assert c.fft_ops == 9
