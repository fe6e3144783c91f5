"""Scikit-learn style estimator for blind short-and-sparse deconvolution."""

import numbers

import numpy as np
from sklearn.base import BaseEstimator

from .conv import cconv
from .objective import Problem
from .pipeline import deconvolve, shift_correct, shift_correct2d
from .solvers import lasso_minimize

__all__ = ["SparseDeconvolver"]


def check_signal(X, ndim=(1, 2)):
    """Validate a deconvolution input: finite float array of supported rank."""
    X = np.asarray(X, dtype=float)
    if X.ndim not in ndim:
        raise ValueError(f"expected a {' or '.join(map(str, ndim))}D signal, "
                         f"got {X.ndim}D")
    if X.size == 0:
        raise ValueError("signal is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError("signal contains non-finite entries")
    return X


def _resolve_seed(random_state):
    if random_state is None:
        return int(np.random.SeedSequence().generate_state(1)[0])
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    raise ValueError("random_state must be an int or None")


class SparseDeconvolver(BaseEstimator):
    """Recover short kernels and sparse activation maps from one signal.

    Fits the sphere-constrained bilinear Lasso by inertial alternating
    descent, optionally with homotopy continuation in the penalty and
    iterative reweighting, starting from a data-driven initialization.
    Works on 1D signals and 2D images; ``n_kernels > 1`` learns a
    convolutional dictionary whose atoms superpose to explain the signal.

    Parameters
    ----------
    window_length : int or (int, int)
        Length n0 of the kernel to recover (per axis for images).  The
        solver iterates on the zero-padded extent 3*n0 - 2.
    n_kernels : int
        Number of dictionary atoms.
    lam : float, optional
        Final sparsity penalty; defaults to 0.1/sqrt(n) for solver extent n.
    solver : {"iadm", "adm"}
        Inner solver; ``iadm`` adds momentum ``beta``.
    beta : float
        Momentum in [0, 1); ignored by ``adm``.
    homotopy : bool or "auto"
        Decay the penalty geometrically from ``lambda0`` down to ``lam``.
        ``"auto"`` enables it for single-kernel problems and disables it
        for dictionaries (continuation can duplicate atoms).
    lambda0, eta, delta, eps_star :
        Continuation schedule knobs; ``lambda0`` defaults to the Lasso
        null threshold of the initialization.
    reweight : int
        Outer reweighting rounds after continuation (0 disables).
    nonneg : bool
        Constrain activations to the nonnegative orthant.
    fit_bias : bool
        Model a constant offset alongside the convolutional part.
    max_iter : int
        Iteration cap per solve (per stage under homotopy).
    tol : float
        Iterate-distance stopping tolerance.
    random_state : int, optional
        Seed for the data-driven initialization windows.

    Attributes
    ----------
    kernels_ : ndarray, (n_kernels, n0) or (n_kernels, n01, n02)
        Shift-corrected unit-norm kernels.
    activations_ : ndarray, (n_kernels,) + signal shape
        Correspondingly aligned sparse maps.
    kernels_full_ : ndarray
        Uncorrected solver iterates on the padded extent.
    bias_ : float
        Fitted constant offset (0 when ``fit_bias`` is off).
    """

    def __init__(self, window_length=None, n_kernels=1, lam=None,
                 solver="iadm", beta=0.9, homotopy="auto", lambda0=None,
                 eta=0.9, delta=0.1, eps_star=None, reweight=0, nonneg=False,
                 fit_bias=False, max_iter=500, tol=1e-6, random_state=None):
        self.window_length = window_length
        self.n_kernels = n_kernels
        self.lam = lam
        self.solver = solver
        self.beta = beta
        self.homotopy = homotopy
        self.lambda0 = lambda0
        self.eta = eta
        self.delta = delta
        self.eps_star = eps_star
        self.reweight = reweight
        self.nonneg = nonneg
        self.fit_bias = fit_bias
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _validate(self, X):
        X = check_signal(X)
        if self.window_length is None:
            raise ValueError("window_length must be set before fitting")
        window = self.window_length
        if X.ndim == 2 and np.isscalar(window):
            window = (int(window), int(window))
        if X.ndim == 1 and not np.isscalar(window):
            raise ValueError("1D signals need a scalar window_length")
        if self.solver not in ("adm", "iadm"):
            raise ValueError(f"unknown solver {self.solver!r}")
        return X, window

    def fit(self, X, y=None):
        """Deconvolve the signal ``X``; ``y`` is ignored (present for API)."""
        X, window = self._validate(X)
        seed = _resolve_seed(self.random_state)
        problem = Problem(y=X, window=window, n_kernels=self.n_kernels,
                          nonneg=self.nonneg, fit_bias=self.fit_bias)
        use_homotopy = self.homotopy
        if use_homotopy == "auto":
            use_homotopy = self.n_kernels == 1
        result = deconvolve(
            problem, seed=seed, solver=self.solver, beta=self.beta,
            lam=self.lam, homotopy=use_homotopy, lambda0=self.lambda0,
            eta=self.eta, delta=self.delta, eps_star=self.eps_star,
            reweight=self.reweight, max_iters=self.max_iter,
            stage_max_iters=self.max_iter, iterate_tol=self.tol)

        state = result.state
        correct = shift_correct if X.ndim == 1 else shift_correct2d
        kernels, activations = [], []
        for k in range(self.n_kernels):
            component = cconv(state.maps[k], state.kernels[k])
            fixed = correct(component, state.kernels[k], state.maps[k])
            kernels.append(fixed.kernel)
            activations.append(fixed.map)
        self.kernels_ = np.stack(kernels)
        self.activations_ = np.stack(activations)
        self.kernels_full_ = state.kernels
        self.maps_full_ = state.maps
        self.bias_ = state.bias
        self.lambda_ = result.lam
        self.lambda0_ = result.lambda0
        self.traces_ = result.traces
        self.n_iter_ = sum(t.n_iters for t in result.traces)
        self.fft_ops_ = result.counter.fft_ops
        self.seed_ = seed
        return self

    def fit_transform(self, X, y=None):
        return self.fit(X).activations_

    def transform(self, X):
        """Sparse-code a signal against the learned kernels (convex Lasso)."""
        self._check_fitted()
        X = check_signal(X, ndim=(self.kernels_full_.ndim - 1,))
        if X.shape != self.maps_full_.shape[1:]:
            raise ValueError("signal shape differs from the fitted signal")
        maps, _, _ = lasso_minimize(
            self.kernels_full_, X - self.bias_, self.lambda_,
            nonneg=self.nonneg)
        return maps

    def reconstruct(self):
        """Reassemble the fitted signal from the corrected factors."""
        self._check_fitted()
        out = np.full(self.activations_.shape[1:], self.bias_)
        for k in range(self.kernels_.shape[0]):
            out += cconv(self.activations_[k], self.kernels_[k])
        return out

    def predict(self, X):
        """Denoise a signal: sparse-code it, then reconvolve."""
        maps = self.transform(X)
        out = np.full(maps.shape[1:], self.bias_)
        for k in range(self.kernels_full_.shape[0]):
            out += cconv(maps[k], self.kernels_full_[k])
        return out

    def _check_fitted(self):
        if not hasattr(self, "kernels_"):
            raise RuntimeError("estimator is not fitted")
