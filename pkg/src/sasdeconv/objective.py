"""Bilinear Lasso values and gradients, plus coherence measures.

The state is a stack of unit-norm kernels and a stack of activation maps;
the single-kernel problem is the ``n_kernels == 1`` special case of the
multi-kernel objective throughout.
"""

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .conv import cconv, ccorr, restrict
from .manifold import tangent_project

__all__ = [
    "GroundTruth",
    "Problem",
    "BilinearState",
    "PenaltyConfig",
    "kernel_length",
    "window_length",
    "residual",
    "psi_value",
    "obj_value",
    "grad_x",
    "grad_x_all",
    "rgrad_a",
    "rgrad_a_all",
    "shift_coherence",
    "mutual_coherence",
    "marginal_phi",
    "MarginalResult",
]


def kernel_length(n0):
    """Solver kernel extent 3*n0 - 2 (per axis for 2D windows)."""
    if np.isscalar(n0) or isinstance(n0, (int, np.integer)):
        return 3 * int(n0) - 2
    return tuple(3 * int(v) - 2 for v in n0)


def window_length(n):
    """Invert :func:`kernel_length`; rejects extents not of the form 3*n0-2."""
    if not (np.isscalar(n) or isinstance(n, (int, np.integer))):
        return tuple(window_length(v) for v in n)
    n = int(n)
    if n < 1 or (n + 2) % 3:
        raise ValueError(f"kernel extent {n} is not of the form 3*n0 - 2")
    return (n + 2) // 3


@dataclass
class GroundTruth:
    """Planted factors kept alongside synthetic problems for scoring."""

    kernels: np.ndarray      # (N, n0) or (N, n01, n02), unit norm
    maps: np.ndarray         # (N,) + y.shape
    bias: float = 0.0


@dataclass
class Problem:
    """Observed signal plus the structural knobs of the formulation."""

    y: np.ndarray
    window: object           # n0, or (n01, n02) for images
    n_kernels: int = 1
    nonneg: bool = False
    fit_bias: bool = False
    truth: Optional[GroundTruth] = None

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if not np.all(np.isfinite(self.y)):
            raise ValueError("observation contains non-finite entries")
        if self.n_kernels < 1:
            raise ValueError("n_kernels must be >= 1")

    @property
    def kernel_shape(self):
        n = kernel_length(self.window)
        return (n,) if isinstance(n, int) else n


@dataclass
class BilinearState:
    """Solver iterate: kernel stack, activation-map stack, scalar bias."""

    kernels: np.ndarray
    maps: np.ndarray
    bias: float = 0.0

    def __post_init__(self):
        self.kernels = np.asarray(self.kernels, dtype=float)
        self.maps = np.asarray(self.maps, dtype=float)
        if self.kernels.shape[0] != self.maps.shape[0]:
            raise ValueError(
                f"{self.kernels.shape[0]} kernels vs {self.maps.shape[0]} maps"
            )

    @property
    def n_kernels(self):
        return self.kernels.shape[0]

    def copy(self):
        return BilinearState(self.kernels.copy(), self.maps.copy(), self.bias)


@dataclass
class PenaltyConfig:
    """Sparsity penalty: scale, optional per-entry weights, sign constraint."""

    lam: float
    weights: Optional[np.ndarray] = None   # same shape as the map stack
    nonnegative: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("penalty must be nonnegative")
        if self.weights is not None:
            self.weights = np.asarray(self.weights, dtype=float)
            if np.any(self.weights <= 0):
                raise ValueError("weights must be strictly positive")


def _check_shapes(state, y):
    if state.maps.shape[1:] != y.shape:
        raise ValueError(
            f"map shape {state.maps.shape[1:]} vs observation shape {y.shape}"
        )
    for ns, nb in zip(state.kernels.shape[1:], y.shape):
        if ns > nb:
            raise ValueError("kernel does not fit inside the observation")


def residual(state, y, counter=None):
    """Model-minus-data: sum_k x_k (*) a_k + bias - y."""
    y = np.asarray(y, dtype=float)
    _check_shapes(state, y)
    r = np.full(y.shape, state.bias) - y
    for k in range(state.n_kernels):
        r += cconv(state.maps[k], state.kernels[k], counter=counter)
    return r


def psi_value(state, y, counter=None):
    """Smooth data-fidelity term 0.5 * ||residual||^2."""
    r = residual(state, y, counter=counter)
    return 0.5 * float(np.vdot(r, r))


def penalty_value(state, pen):
    """lam * sum_k ||w_k .* x_k||_1."""
    w = pen.weights
    total = float(np.abs(state.maps if w is None else w * state.maps).sum())
    return pen.lam * total


def obj_value(state, y, pen, counter=None):
    """Full objective: data fidelity plus weighted l1 penalty."""
    return psi_value(state, y, counter=counter) + penalty_value(state, pen)


def grad_x_all(state, y, res=None, counter=None):
    """Gradient of psi w.r.t. every activation map, stacked like ``maps``."""
    if res is None:
        res = residual(state, y, counter=counter)
    return np.stack([
        ccorr(state.kernels[k], res, counter=counter)
        for k in range(state.n_kernels)
    ])


def grad_x(state, y, k, counter=None):
    """Gradient of psi w.r.t. map ``k``: correlate the kernel with the residual."""
    if not 0 <= k < state.n_kernels:
        raise IndexError(f"atom index {k} out of range")
    res = residual(state, y, counter=counter)
    return ccorr(state.kernels[k], res, counter=counter)


def rgrad_a_all(state, y, res=None, counter=None):
    """Riemannian gradient of psi w.r.t. every kernel, stacked."""
    if res is None:
        res = residual(state, y, counter=counter)
    kshape = state.kernels.shape[1:]
    out = []
    for k in range(state.n_kernels):
        full = ccorr(state.maps[k], res, counter=counter)
        out.append(tangent_project(state.kernels[k], restrict(full, kshape)))
    return np.stack(out)


def rgrad_a(state, y, k, counter=None):
    """Riemannian gradient of psi w.r.t. kernel ``k`` (tangent at that kernel)."""
    if not 0 <= k < state.n_kernels:
        raise IndexError(f"atom index {k} out of range")
    res = residual(state, y, counter=counter)
    full = ccorr(state.maps[k], res, counter=counter)
    return tangent_project(state.kernels[k], restrict(full, state.kernels.shape[1:]))


def shift_coherence(a0, cyclic=False):
    """Largest normalized overlap between a kernel and its nonzero shifts.

    Defaults to zero-padded (linear) shifts of the length-n0 window; pass
    ``cyclic=True`` for wrap-around shifts within the window.
    """
    a0 = np.asarray(a0, dtype=float).ravel()
    nrm2 = float(np.vdot(a0, a0))
    if nrm2 == 0.0:
        raise ValueError("shift coherence of the zero vector is undefined")
    n0 = a0.shape[0]
    if n0 == 1:
        return 0.0
    if cyclic:
        overlaps = [abs(float(np.vdot(a0, np.roll(a0, ell)))) for ell in range(1, n0)]
    else:
        full = np.correlate(a0, a0, mode="full")
        overlaps = np.abs(np.delete(full, n0 - 1))
    return float(np.max(overlaps) / nrm2)


def mutual_coherence(kernels, cyclic=False):
    """Largest cross-correlation magnitude between distinct unit kernels."""
    kernels = np.asarray(kernels, dtype=float)
    if kernels.ndim != 2:
        raise ValueError("expected a stack of 1D kernels")
    n_atoms = kernels.shape[0]
    if n_atoms < 2:
        raise ValueError("mutual coherence needs at least two kernels")
    unit = kernels / np.linalg.norm(kernels, axis=1, keepdims=True)
    best = 0.0
    for i in range(n_atoms):
        for j in range(i + 1, n_atoms):
            if cyclic:
                vals = [abs(float(np.vdot(np.roll(unit[i], ell), unit[j])))
                        for ell in range(unit.shape[1])]
                best = max(best, max(vals))
            else:
                best = max(best, float(np.max(np.abs(
                    np.correlate(unit[i], unit[j], mode="full")))))
    return best


class MarginalResult(NamedTuple):
    value: float
    converged: bool
    iterations: int


def marginal_phi(a, y, lam, inner_budget=2000, grad_tol=1e-8, counter=None):
    """Marginalized objective: minimize the convex Lasso in x at fixed ``a``.

    Runs the proximal-gradient inner solver from ``x = 0`` until the
    composite-gradient-mapping norm drops below ``grad_tol`` or the
    iteration budget is exhausted (the flag reports which).
    """
    from .solvers import lasso_minimize

    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    x, converged, iters = lasso_minimize(
        a[None], y, lam, max_iters=inner_budget, grad_tol=grad_tol,
        counter=counter,
    )
    state = BilinearState(a[None], x)
    value = obj_value(state, y, PenaltyConfig(lam), counter=counter)
    return MarginalResult(value, converged, iters)
