"""Cyclic convolution/correlation operators and shift/pad primitives.

All solver-facing convolutions are cyclic with the short factor zero-padded
to the long factor's shape, so a single FFT code path serves 1D signals and
2D images alike.  Naive O(mn) oracles are provided for testing.
"""

import numpy as np

__all__ = [
    "OpCounter",
    "cconv",
    "ccorr",
    "cconv2d",
    "ccorr2d",
    "flip2d",
    "shift_cyclic",
    "zero_pad",
    "restrict",
    "naive_cconv",
    "naive_ccorr",
    "naive_cconv2d",
]


class OpCounter:
    """Running count of FFT transforms, in units of single transforms.

    Each convolution/correlation call costs 3 transforms (two forward, one
    inverse); callers that take a bare transform add 1.  A solver run owns
    its counter, so concurrent runs never share state.
    """

    def __init__(self):
        self.fft_ops = 0

    def add(self, n=3):
        self.fft_ops += n

    def __repr__(self):
        return f"OpCounter(fft_ops={self.fft_ops})"


def _check_embeddable(small, big):
    if small.ndim != big.ndim:
        raise ValueError(
            f"rank mismatch: {small.ndim}D kernel vs {big.ndim}D signal"
        )
    for ns, nb in zip(small.shape, big.shape):
        if ns > nb:
            raise ValueError(
                f"kernel shape {small.shape} exceeds signal shape {big.shape}"
            )


def zero_pad(v, shape):
    """Zero-pad ``v`` at the end of each axis to ``shape`` (int for 1D)."""
    v = np.asarray(v, dtype=float)
    if np.isscalar(shape) or isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    shape = tuple(int(s) for s in shape)
    if len(shape) != v.ndim:
        raise ValueError(f"target rank {len(shape)} != input rank {v.ndim}")
    for ns, nb in zip(v.shape, shape):
        if ns > nb:
            raise ValueError(f"cannot pad shape {v.shape} down to {shape}")
    out = np.zeros(shape, dtype=float)
    out[tuple(slice(0, s) for s in v.shape)] = v
    return out


def restrict(u, shape):
    """Keep the leading ``shape`` block of ``u``; adjoint of :func:`zero_pad`."""
    u = np.asarray(u, dtype=float)
    if np.isscalar(shape) or isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    shape = tuple(int(s) for s in shape)
    if len(shape) != u.ndim:
        raise ValueError(f"target rank {len(shape)} != input rank {u.ndim}")
    for ns, nb in zip(shape, u.shape):
        if ns > nb:
            raise ValueError(f"cannot restrict shape {u.shape} to {shape}")
    return u[tuple(slice(0, s) for s in shape)].copy()


def shift_cyclic(v, ell):
    """Cyclic shift: entry ``i`` of the output is entry ``(i - ell) mod m``."""
    v = np.asarray(v)
    return np.roll(v, int(ell))


def flip2d(z):
    """Reverse a matrix both vertically and horizontally (an involution)."""
    z = np.asarray(z)
    if z.ndim != 2:
        raise ValueError(f"flip2d expects a matrix, got {z.ndim}D input")
    return z[::-1, ::-1].copy()


def _fft_mul(u, v, conjugate, counter):
    """Cyclic convolution (or correlation for ``conjugate=True``) via FFT."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    _check_embeddable(v, u)
    fv = np.fft.rfftn(zero_pad(v, u.shape))
    if conjugate:
        fv = np.conj(fv)
    axes = tuple(range(u.ndim))
    out = np.fft.irfftn(np.fft.rfftn(u) * fv, s=u.shape, axes=axes)
    if counter is not None:
        counter.add(3)
    return out


def cconv(u, v, counter=None):
    """Cyclic convolution of signal ``u`` with ``v`` zero-padded to match.

    Computed with a full-length real FFT.  ``counter``, when given, is
    charged 3 transforms.
    """
    return _fft_mul(u, v, conjugate=False, counter=counter)


def ccorr(v, u, counter=None):
    """Adjoint of ``w -> cconv(w, v)``.

    Equals the cyclic convolution of ``u`` with the cyclic reversal of the
    zero-padded ``v`` (conjugation in the Fourier domain).
    """
    return _fft_mul(u, v, conjugate=True, counter=counter)


def cconv2d(u, v, counter=None):
    """2D cyclic convolution via 2D FFT of the zero-padded kernel."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 2 or v.ndim != 2:
        raise ValueError("cconv2d expects matrices")
    return cconv(u, v, counter=counter)


def ccorr2d(v, u, counter=None):
    """Adjoint of ``w -> cconv2d(w, v)``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 2 or v.ndim != 2:
        raise ValueError("ccorr2d expects matrices")
    return ccorr(v, u, counter=counter)


def naive_cconv(u, v):
    """Direct O(mn) summation of the cyclic-convolution definition."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 1 or v.ndim != 1:
        raise ValueError("naive_cconv expects vectors")
    _check_embeddable(v, u)
    out = np.zeros_like(u)
    for j in range(v.shape[0]):
        out += v[j] * np.roll(u, j)
    return out


def naive_ccorr(v, u):
    """Direct summation matching :func:`ccorr`."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 1 or v.ndim != 1:
        raise ValueError("naive_ccorr expects vectors")
    _check_embeddable(v, u)
    out = np.zeros_like(u)
    for j in range(v.shape[0]):
        out += v[j] * np.roll(u, -j)
    return out


def naive_cconv2d(u, v):
    """Direct double-loop summation of the 2D cyclic convolution."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.ndim != 2 or v.ndim != 2:
        raise ValueError("naive_cconv2d expects matrices")
    _check_embeddable(v, u)
    out = np.zeros_like(u)
    for j1 in range(v.shape[0]):
        for j2 in range(v.shape[1]):
            out += v[j1, j2] * np.roll(u, (j1, j2), axis=(0, 1))
    return out
