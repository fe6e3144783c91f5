"""Data-driven initialization, shift correction, recovery metrics, and the
end-to-end solve driver that composes them with the solver stack."""

from typing import NamedTuple, Optional

import numpy as np

from .conv import OpCounter, cconv, restrict, shift_cyclic
from .objective import BilinearState, window_length
from .rng import substream

__all__ = [
    "init_kernel",
    "init_multi",
    "initial_state",
    "random_kernel_init",
    "shift_correct",
    "shift_correct2d",
    "ShiftCorrection",
    "recovery_error",
    "RecoveryResult",
    "align_map",
    "deconvolve",
    "DeconvolveResult",
]


def _window_slices(start, width):
    return tuple(slice(s, s + w) for s, w in zip(start, width))


def _init_one(y, n0, rng):
    """One data window, zero-padded on both sides of each axis, normalized."""
    shape = y.shape
    widths = (n0,) * y.ndim if np.isscalar(n0) else tuple(n0)
    for ms, ws in zip(shape, widths):
        if ws > ms:
            raise ValueError("window does not fit inside the observation")
    # FFT-synthesized signals carry ~1e-17 junk where the signal vanishes;
    # such windows count as zero or the init would be normalized noise.
    floor = 1e-12 * float(np.max(np.abs(y)))
    for _ in range(10):
        start = tuple(int(rng.integers(0, ms - ws + 1))
                      for ms, ws in zip(shape, widths))
        window = y[_window_slices(start, widths)]
        nrm = float(np.linalg.norm(window))
        if nrm > floor:
            pad = [(w - 1, w - 1) for w in widths]
            return np.pad(window, pad) / nrm
    raise ValueError("could not find a usable data window in 10 draws")


def init_kernel(y, n0, seed):
    """Kernel start: a random length-n0 window of the data, padded and normalized.

    The window start is drawn uniformly from the ``init`` substream of
    ``seed``; all-zero windows are redrawn up to ten times.
    """
    y = np.asarray(y, dtype=float)
    return _init_one(y, n0, substream(seed, "init", 0))


def init_multi(y, n0, n_kernels, seed):
    """Stack of kernel starts from independent windows (distinct sub-seeds)."""
    y = np.asarray(y, dtype=float)
    return np.stack([
        _init_one(y, n0, substream(seed, "init", k)) for k in range(n_kernels)
    ])


def random_kernel_init(n, n_kernels, seed):
    """Kernels drawn uniformly from the sphere (baseline for ablations)."""
    rng = substream(seed, "init", 0)
    shape = (n,) if np.isscalar(n) else tuple(n)
    out = []
    for _ in range(n_kernels):
        v = rng.standard_normal(shape)
        out.append(v / np.linalg.norm(v))
    return np.stack(out)


def initial_state(problem, kernels=None, seed=0):
    """Fresh solver state: data-driven kernels, zero maps, mean bias."""
    if kernels is None:
        kernels = init_multi(problem.y, problem.window, problem.n_kernels, seed)
    kernels = np.asarray(kernels, dtype=float)
    maps = np.zeros((problem.n_kernels,) + problem.y.shape)
    bias = float(np.mean(problem.y)) if problem.fit_bias else 0.0
    return BilinearState(kernels, maps, bias)


class ShiftCorrection(NamedTuple):
    kernel: np.ndarray
    map: np.ndarray
    offset: int
    error: float


def shift_correct(y, a_star, x_star, criterion="reconstruction", counter=None):
    """Undo the shift ambiguity of a solved pair (1D).

    Sweeps window offsets 0..2*n0 of the solution kernel, pairing each
    truncation with the oppositely shifted map, and keeps the pair with the
    smallest reconstruction error (ties break to the smallest offset).
    ``criterion="energy"`` instead keeps the window with the largest norm,
    which is cheaper but less reliable under noise.
    """
    y = np.asarray(y, dtype=float)
    a_star = np.asarray(a_star, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    if a_star.ndim != 1:
        raise ValueError("shift_correct expects a 1D kernel; see shift_correct2d")
    n0 = window_length(a_star.shape[0])
    best = None
    for i in range(1, 2 * n0 + 2):
        a_hat = restrict(shift_cyclic(a_star, -(i - 1)), n0)
        if criterion == "reconstruction":
            x_hat = shift_cyclic(x_star, i - 1)
            err = float(np.linalg.norm(
                cconv(x_hat, a_hat, counter=counter) - y))
            score = err
        elif criterion == "energy":
            score = -float(np.linalg.norm(a_hat))
            err = np.nan
        else:
            raise ValueError(f"unknown criterion {criterion!r}")
        if best is None or score < best[0]:
            best = (score, i, a_hat, err)
    _, i_star, a_hat, err = best
    x_hat = shift_cyclic(x_star, i_star - 1)
    if criterion == "energy":
        err = float(np.linalg.norm(cconv(x_hat, a_hat, counter=counter) - y))
    return ShiftCorrection(a_hat, x_hat, i_star - 1, err)


def shift_correct2d(y, a_star, x_star, counter=None):
    """2D analogue of :func:`shift_correct`, sweeping both axes."""
    y = np.asarray(y, dtype=float)
    a_star = np.asarray(a_star, dtype=float)
    x_star = np.asarray(x_star, dtype=float)
    n0 = window_length(a_star.shape)
    best = None
    for i1 in range(2 * n0[0] + 1):
        for i2 in range(2 * n0[1] + 1):
            a_hat = restrict(np.roll(a_star, (-i1, -i2), axis=(0, 1)), n0)
            x_hat = np.roll(x_star, (i1, i2), axis=(0, 1))
            err = float(np.linalg.norm(
                cconv(x_hat, a_hat, counter=counter) - y))
            if best is None or err < best[0]:
                best = (err, (i1, i2), a_hat, x_hat)
    err, offset, a_hat, x_hat = best
    return ShiftCorrection(a_hat, x_hat, offset, err)


class RecoveryResult(NamedTuple):
    error: float
    success: bool
    offset: int


def recovery_error(a0, a_star, threshold=1e-2):
    """Shift- and sign-invariant kernel recovery error in [0, 1].

    Minimum over the 2*n0 leading window offsets of
    ``1 - |<a0, window(a_star)>|`` with both vectors normalized; the
    success flag compares against the recovery threshold.
    """
    a0 = np.asarray(a0, dtype=float).ravel()
    a_star = np.asarray(a_star, dtype=float).ravel()
    n0 = a0.shape[0]
    a0 = a0 / np.linalg.norm(a0)
    best = (1.0, 0)
    for ell in range(2 * n0):
        window = np.roll(a_star, -ell)[:n0]
        nrm = float(np.linalg.norm(window))
        if nrm == 0.0:
            continue
        err = 1.0 - abs(float(np.vdot(a0, window))) / nrm
        if err < best[0]:
            best = (err, ell)
    return RecoveryResult(best[0], best[0] <= threshold, best[1])


def align_map(x_star, offset):
    """Shift the map opposite to a kernel shift correction by ``offset``."""
    return shift_cyclic(np.asarray(x_star, dtype=float), -int(offset))


class DeconvolveResult(NamedTuple):
    state: BilinearState
    traces: list
    counter: OpCounter
    lam: float
    lambda0: Optional[float]


def deconvolve(problem, seed=0, init=None, solver="iadm", beta=0.9, lam=None,
               homotopy=True, lambda0=None, eta=0.9, delta=0.1, eps_star=None,
               reweight=0, max_iters=500, stage_max_iters=500, iterate_tol=1e-6,
               max_fft_ops=None, counter=None, trace_fn=None):
    """Full solve: data-driven init, optional continuation, optional reweighting.

    ``lam`` is the final (or fixed) penalty, defaulting to 0.1/sqrt(n); with
    ``homotopy`` the penalty decays geometrically from ``lambda0`` (default:
    the Lasso null threshold of the initialization) down to ``lam``.
    ``reweight`` outer rounds, when positive, re-solve with magnitude-inverse
    weights starting from the continuation output.
    """
    from .continuation import (
        HomotopySchedule,
        default_lambda0,
        default_lambda_star,
        homotopy_solve,
        reweight_solve,
    )
    from .solvers import SolverConfig, StopRule, adm_solve, iadm_solve

    counter = counter if counter is not None else OpCounter()
    if init is None:
        init = initial_state(problem, seed=seed)
    if lam is None:
        lam = default_lambda_star(problem.kernel_shape)

    state = init
    traces = []
    lam0 = None
    if homotopy:
        if lambda0 is None:
            lam0 = max(default_lambda0(init.kernels[k], problem.y, counter=counter)
                       for k in range(problem.n_kernels))
        else:
            lam0 = lambda0
        lam0 = max(lam0, lam)
        schedule = HomotopySchedule(lambda0=lam0, lambda_star=lam, eta=eta,
                                    delta=delta, eps_star=eps_star)
        state, stage_traces = homotopy_solve(
            problem, state, schedule, beta=beta, solver=solver,
            stage_max_iters=stage_max_iters, counter=counter,
            trace_fn=trace_fn, max_fft_ops=max_fft_ops)
        traces.extend(stage_traces)
    elif reweight == 0:
        config = SolverConfig(lam=lam, beta=beta)
        stop = StopRule(max_iters=max_iters, iterate_tol=iterate_tol,
                        max_fft_ops=max_fft_ops)
        inner = iadm_solve if solver == "iadm" else adm_solve
        state, trace = inner(problem, state, config, stop, counter=counter,
                             trace_fn=trace_fn)
        traces.append(trace)

    if reweight > 0:
        stop = StopRule(max_iters=max_iters, iterate_tol=iterate_tol,
                        max_fft_ops=max_fft_ops)
        state, round_traces = reweight_solve(
            problem, state, lam, beta=beta, solver=solver,
            outer_rounds=reweight, stop=stop, counter=counter,
            trace_fn=trace_fn)
        traces.extend(round_traces)

    return DeconvolveResult(state, traces, counter, lam, lam0)
