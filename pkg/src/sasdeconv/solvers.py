"""Proximal operators, stepsize searches, and the alternating solvers.

``adm_solve`` alternates a proximal-gradient step on the activation maps
with a Riemannian gradient step on the sphere-constrained kernels, both
with backtracking.  ``iadm_solve`` adds inertial extrapolation to the two
blocks and reduces to ADM exactly at momentum zero.
"""

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .conv import OpCounter, zero_pad
from .manifold import (
    AntipodalPointError,
    retract_exp,
    retract_inverse,
    tangent_project,
)
from .objective import (
    BilinearState,
    PenaltyConfig,
    grad_x_all,
    penalty_value,
    residual,
    rgrad_a_all,
)

__all__ = [
    "StepSizeError",
    "SolverConfig",
    "StopRule",
    "Trace",
    "prox_l1",
    "backtrack_x",
    "linesearch_a",
    "adm_solve",
    "iadm_solve",
    "bias_update",
    "lasso_minimize",
]

# Stepsizes below this are treated as a line-search failure.
_STEP_FLOOR = 1e-20
# Relative slack for the quadratic-majorization acceptance test, so steps at
# the exact Lipschitz constant (majorization with equality) are accepted.
_BT_SLACK = 1e-12


class StepSizeError(RuntimeError):
    """Backtracking or linesearch shrank the stepsize below the floor."""


@dataclass
class SolverConfig:
    """Penalty and stepsize knobs for one solver run.

    ``t0``/``tau0`` seed the backtracking searches; left as ``None``, the
    x-stepsize starts at 0.99 over the exact Lipschitz constant of the map
    gradient and the kernel stepsize warm-starts from the previous accepted
    value.  ``weights`` is an optional positive array shaped like the map
    stack (reweighted subproblems).
    """

    lam: float
    beta: float = 0.9
    t0: Optional[float] = None
    tau0: Optional[float] = None
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("penalty must be nonnegative")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("momentum must lie in [0, 1)")


@dataclass
class StopRule:
    """Termination tests; any unset test is skipped.

    ``iterate_tol`` bounds the scale-balanced iterate distance
    max_k(||da_k||, ||dx_k||/sqrt(m)); ``grad_tol`` bounds the sum of the
    composite-gradient-mapping norm and the Riemannian gradient norm;
    ``max_fft_ops`` bounds the cumulative transform count.
    """

    max_iters: int = 500
    iterate_tol: Optional[float] = 1e-6
    grad_tol: Optional[float] = None
    max_fft_ops: Optional[int] = None

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


class Trace:
    """Per-iteration history of a solver run."""

    def __init__(self):
        self.rows = []
        self.stop_reason = None
        self.converged = False

    def append(self, **row):
        self.rows.append(row)

    def column(self, key):
        return np.array([row[key] for row in self.rows])

    @property
    def n_iters(self):
        return len(self.rows)

    @property
    def fft_ops(self):
        return self.rows[-1]["fft_ops"] if self.rows else 0


def prox_l1(z, rho, weights=None, nonneg=False):
    """Entrywise soft threshold sign(z) * max(|z| - rho*w, 0).

    With ``nonneg`` the result is additionally clamped to the nonnegative
    orthant after thresholding.
    """
    z = np.asarray(z, dtype=float)
    if rho < 0:
        raise ValueError("threshold must be nonnegative")
    if weights is None:
        thr = rho
    else:
        weights = np.asarray(weights, dtype=float)
        if np.any(weights <= 0):
            raise ValueError("weights must be strictly positive")
        thr = rho * weights
    out = np.sign(z) * np.maximum(np.abs(z) - thr, 0.0)
    if nonneg:
        out = np.maximum(out, 0.0)
    return out


def lipschitz_bound(kernels, yshape, counter=None):
    """Exact Lipschitz constant of the stacked map gradient.

    The per-frequency Gram matrix of the convolution operators is rank one,
    so the constant is the max over frequencies of sum_k |a_k-hat|^2.
    """
    total = None
    for k in range(kernels.shape[0]):
        spec = np.abs(np.fft.rfftn(zero_pad(kernels[k], yshape))) ** 2
        if counter is not None:
            counter.add(1)
        total = spec if total is None else total + spec
    return float(total.max())


class BacktrackResult(NamedTuple):
    t: float
    x: np.ndarray
    shrinks: int
    res: np.ndarray        # residual at the accepted point


class LinesearchResult(NamedTuple):
    tau: float
    kernels: np.ndarray
    shrinks: int
    grad_norm: float
    res: np.ndarray        # residual at the accepted point


def _residual(kernels, maps, bias, y, counter):
    return residual(BilinearState(kernels, maps, bias), y, counter=counter)


def _backtrack_maps(kernels, base, bias, y, pen, t0, shrink=0.5, counter=None,
                    res0=None):
    """Shrink t until the proximal point passes the quadratic-majorization test.

    ``res0``, when given, must be the residual at the base point and saves
    recomputing it.
    """
    if t0 <= 0:
        raise ValueError("initial stepsize must be positive")
    state = BilinearState(kernels, base, bias)
    res = res0 if res0 is not None else residual(state, y, counter=counter)
    psi0 = 0.5 * float(np.vdot(res, res))
    grads = grad_x_all(state, y, res=res, counter=counter)
    slack = _BT_SLACK * max(1.0, abs(psi0))
    t = float(t0)
    shrinks = 0
    while True:
        cand = prox_l1(base - t * grads, pen.lam * t, pen.weights, pen.nonnegative)
        diff = cand - base
        quad = psi0 + float(np.vdot(diff, grads)) + float(np.vdot(diff, diff)) / (2 * t)
        res_cand = _residual(kernels, cand, bias, y, counter)
        if 0.5 * float(np.vdot(res_cand, res_cand)) <= quad + slack:
            return BacktrackResult(t, cand, shrinks, res_cand)
        t *= shrink
        shrinks += 1
        if t < _STEP_FLOOR:
            raise StepSizeError("proximal backtracking underflowed the stepsize floor")


def backtrack_x(a, x, y, lam, t0, weights=None, nonneg=False, counter=None):
    """Single-kernel backtracking step on the activation map.

    Returns the accepted stepsize, the proximal point, and the shrink count.
    """
    pen = PenaltyConfig(lam, None if weights is None else np.asarray(weights)[None],
                        nonneg)
    result = _backtrack_maps(
        np.asarray(a, dtype=float)[None], np.asarray(x, dtype=float)[None],
        0.0, np.asarray(y, dtype=float), pen, t0, counter=counter)
    return BacktrackResult(result.t, result.x[0], result.shrinks, result.res)


def _linesearch_kernels(base, maps, bias, y, tau0, eta=0.8, shrink=0.5,
                        counter=None, res0=None):
    """Armijo search along the retracted negative Riemannian gradient."""
    if tau0 <= 0:
        raise ValueError("initial stepsize must be positive")
    state = BilinearState(base, maps, bias)
    res = res0 if res0 is not None else residual(state, y, counter=counter)
    psi0 = 0.5 * float(np.vdot(res, res))
    rgrads = rgrad_a_all(state, y, res=res, counter=counter)
    gradsq = float(np.vdot(rgrads, rgrads))
    grad_norm = np.sqrt(gradsq)
    if grad_norm <= 1e-12:
        return LinesearchResult(float(tau0), base.copy(), 0, grad_norm, res)
    tau = float(tau0)
    shrinks = 0
    while True:
        cand = np.stack([retract_exp(base[k], -tau * rgrads[k])
                         for k in range(base.shape[0])])
        res_cand = _residual(cand, maps, bias, y, counter)
        if 0.5 * float(np.vdot(res_cand, res_cand)) < psi0 - tau * eta * gradsq:
            return LinesearchResult(tau, cand, shrinks, grad_norm, res_cand)
        tau *= shrink
        shrinks += 1
        if tau < _STEP_FLOOR:
            raise StepSizeError("Riemannian linesearch underflowed the stepsize floor")


def linesearch_a(a, x, y, tau0, eta=0.8, counter=None):
    """Single-kernel Riemannian linesearch; returns stepsize and new kernel."""
    result = _linesearch_kernels(
        np.asarray(a, dtype=float)[None], np.asarray(x, dtype=float)[None],
        0.0, np.asarray(y, dtype=float), tau0, eta=eta, counter=counter)
    return LinesearchResult(result.tau, result.kernels[0], result.shrinks,
                            result.grad_norm, result.res)


def bias_update(y, state, counter=None):
    """Mean of the residual-without-bias: the exact minimizer over the bias."""
    r = residual(BilinearState(state.kernels, state.maps, 0.0), y, counter=counter)
    return -float(np.mean(r))


def _momentum_kernels(prev, cur, beta):
    """Extrapolate each kernel along the geodesic from its previous iterate."""
    out = []
    for k in range(cur.shape[0]):
        try:
            delta = retract_inverse(prev[k], cur[k])
        except AntipodalPointError:
            warnings.warn(
                f"antipodal kernel iterates for atom {k}; "
                "dropping inertia for this iteration",
                RuntimeWarning,
            )
            out.append(cur[k].copy())
            continue
        step = tangent_project(cur[k], beta * delta)
        out.append(retract_exp(cur[k], step))
    return np.stack(out)


def _iterate_delta(new, old):
    d_a = max(float(np.linalg.norm(new.kernels[k] - old.kernels[k]))
              for k in range(new.n_kernels))
    scale = np.sqrt(new.maps[0].size)
    d_x = max(float(np.linalg.norm(new.maps[k] - old.maps[k])) / scale
              for k in range(new.n_kernels))
    return max(d_a, d_x)


def _alternating_solve(problem, init, config, stop, beta, counter=None,
                       trace_fn=None):
    y = problem.y
    counter = counter if counter is not None else OpCounter()
    pen = PenaltyConfig(config.lam, config.weights, problem.nonneg)
    state = init.copy()
    prev = state.copy()
    tau_seed = config.tau0 if config.tau0 is not None else 1.0
    trace = Trace()
    res_state = None       # residual at the current state, when still valid

    for it in range(1, stop.max_iters + 1):
        try:
            # Proximal-gradient block on the maps, extrapolated under momentum.
            if beta > 0.0 and it > 1:
                w = state.maps + beta * (state.maps - prev.maps)
                res_w = None
            else:
                w = state.maps
                res_w = res_state
            t0 = config.t0
            if t0 is None:
                t0 = 0.99 / lipschitz_bound(state.kernels, y.shape, counter=counter)
            t, new_maps, _, res_x = _backtrack_maps(
                state.kernels, w, state.bias, y, pen, t0, counter=counter,
                res0=res_w)

            # Riemannian block on the kernels.
            if beta > 0.0 and it > 1:
                z = _momentum_kernels(prev.kernels, state.kernels, beta)
                res_z = None
            else:
                z = state.kernels
                res_z = res_x
            tau0 = max(2.0 * tau_seed, 1e-12)
            tau, new_kernels, _, _, res = _linesearch_kernels(
                z, new_maps, state.bias, y, tau0, counter=counter, res0=res_z)
            tau_seed = tau
        except StepSizeError as exc:
            raise StepSizeError(f"iteration {it}: {exc}") from exc

        new_bias = state.bias
        if problem.fit_bias:
            # res carries the old bias; the optimal offset and the updated
            # residual follow without another convolution.
            new_bias = state.bias - float(np.mean(res))
            res = res + (new_bias - state.bias)
        new_state = BilinearState(new_kernels, new_maps, new_bias)

        psi = 0.5 * float(np.vdot(res, res))
        obj = psi + penalty_value(new_state, pen)
        delta = _iterate_delta(new_state, state)

        stat = None
        if stop.grad_tol is not None:
            map_norm = float(np.linalg.norm(w - new_maps)) / t
            rgrads = rgrad_a_all(new_state, y, res=res, counter=counter)
            stat = map_norm + float(np.linalg.norm(rgrads))

        row = dict(iteration=it, obj=obj, psi=psi, delta=delta, t=t, tau=tau,
                   fft_ops=counter.fft_ops)
        if stat is not None:
            row["stationarity"] = stat
        if trace_fn is not None:
            row.update(trace_fn(new_state))
        trace.append(**row)

        prev, state = state, new_state
        res_state = res

        if stop.iterate_tol is not None and delta <= stop.iterate_tol:
            trace.converged = True
            trace.stop_reason = "iterate_tol"
            break
        if stat is not None and stat <= stop.grad_tol:
            trace.converged = True
            trace.stop_reason = "grad_tol"
            break
        if stop.max_fft_ops is not None and counter.fft_ops >= stop.max_fft_ops:
            trace.stop_reason = "fft_budget"
            break
    else:
        trace.stop_reason = "max_iters"

    return state, trace


def adm_solve(problem, init, config, stop, counter=None, trace_fn=None):
    """Alternating descent: prox-gradient x-step, Riemannian a-step.

    Both stepsizes are found by backtracking, so the objective trace is
    non-increasing.  Returns the final state and the iteration trace.
    """
    return _alternating_solve(problem, init, config, stop, beta=0.0,
                              counter=counter, trace_fn=trace_fn)


def iadm_solve(problem, init, config, stop, counter=None, trace_fn=None):
    """Inertial ADM: momentum-extrapolated variants of both blocks.

    ``config.beta = 0`` reproduces :func:`adm_solve` exactly.  The kernel
    inertia follows the geodesic through the two previous iterates; if the
    iterates are antipodal the inertia is dropped for that iteration.
    """
    return _alternating_solve(problem, init, config, stop, beta=config.beta,
                              counter=counter, trace_fn=trace_fn)


def lasso_minimize(kernels, y, lam, weights=None, nonneg=False, x0=None,
                   max_iters=2000, grad_tol=1e-8, counter=None):
    """Convex Lasso in the maps at fixed kernels, by accelerated prox-gradient.

    Deterministic from the zero start; stops when the composite-gradient-
    mapping norm falls below ``grad_tol`` or the budget runs out.  Returns
    ``(maps, converged, iterations)``.
    """
    kernels = np.asarray(kernels, dtype=float)
    y = np.asarray(y, dtype=float)
    t = 1.0 / lipschitz_bound(kernels, y.shape, counter=counter)
    shape = (kernels.shape[0],) + y.shape
    x = np.zeros(shape) if x0 is None else np.asarray(x0, dtype=float).copy()
    z = x.copy()
    theta = 1.0
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        state = BilinearState(kernels, z)
        grads = grad_x_all(state, y, counter=counter)
        x_new = prox_l1(z - t * grads, lam * t, weights, nonneg)
        if float(np.linalg.norm(z - x_new)) / t <= grad_tol:
            x = x_new
            converged = True
            break
        theta_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta**2))
        z = x_new + ((theta - 1.0) / theta_new) * (x_new - x)
        x, theta = x_new, theta_new
    return x, converged, it
