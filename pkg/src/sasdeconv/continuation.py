"""Homotopy continuation in the penalty and iterative reweighting.

Both wrappers warm-start an inner alternating solver (ADM or iADM):
homotopy walks the penalty down a geometric schedule, reweighting sharpens
the support by penalizing entries inversely to their current magnitude.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conv import OpCounter, ccorr
from .solvers import SolverConfig, StepSizeError, StopRule, adm_solve, iadm_solve

__all__ = [
    "HomotopySchedule",
    "WeightVector",
    "default_lambda0",
    "default_lambda_star",
    "homotopy_solve",
    "weight_update",
    "reweight_solve",
]

_SOLVERS = {"adm": adm_solve, "iadm": iadm_solve}


@dataclass
class HomotopySchedule:
    """Geometric penalty schedule lambda^(k) = eta^k * lambda0.

    Runs ``num_stages`` warm-started stages, each solved to precision
    ``delta * lambda^(k)``, then a final stage at exactly ``lambda_star``
    solved to ``eps_star`` (default ``delta * lambda_star``).
    """

    lambda0: float
    lambda_star: float
    eta: float = 0.9
    delta: float = 0.1
    eps_star: Optional[float] = None

    def __post_init__(self):
        if not self.lambda0 >= self.lambda_star > 0:
            raise ValueError("schedule needs lambda0 >= lambda_star > 0")
        if not 0.0 < self.eta < 1.0:
            raise ValueError("decay must lie in (0, 1)")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("precision factor must lie in (0, 1)")
        if self.eps_star is None:
            self.eps_star = self.delta * self.lambda_star
        if self.eps_star <= 0:
            raise ValueError("final tolerance must be positive")

    @property
    def num_stages(self):
        return int(math.floor(math.log(self.lambda_star / self.lambda0)
                              / math.log(self.eta))) if self.lambda0 > self.lambda_star else 0

    def stage_penalties(self):
        return [self.lambda0 * self.eta**k for k in range(self.num_stages)]


def default_lambda0(a0, y, counter=None):
    """Largest penalty of interest: ||corr(a0, y)||_inf (first x-step stays 0)."""
    return float(np.max(np.abs(ccorr(a0, y, counter=counter))))


def default_lambda_star(n):
    """The stock final penalty 0.1/sqrt(n) for kernel extent n."""
    size = n if isinstance(n, (int, np.integer)) else int(np.prod(n))
    return 0.1 / math.sqrt(size)


def homotopy_solve(problem, init, schedule, beta=0.9, solver="iadm",
                   weights=None, stage_max_iters=500, counter=None,
                   trace_fn=None, max_fft_ops=None):
    """Solve along the penalty schedule, warm-starting every stage.

    Stage k stops when the combined stationarity measure drops below
    ``delta * lambda^(k)`` or the per-stage iteration cap is hit; the final
    stage runs at exactly ``lambda_star`` to ``eps_star``.  Returns the
    final state and the list of per-stage traces.
    """
    inner = _SOLVERS[solver]
    counter = counter if counter is not None else OpCounter()
    state = init.copy()
    traces = []
    stages = [(lam, schedule.delta * lam) for lam in schedule.stage_penalties()]
    stages.append((schedule.lambda_star, schedule.eps_star))
    for idx, (lam, eps) in enumerate(stages):
        config = SolverConfig(lam=lam, beta=beta, weights=weights)
        stop = StopRule(max_iters=stage_max_iters, iterate_tol=None,
                        grad_tol=eps, max_fft_ops=max_fft_ops)
        try:
            state, trace = inner(problem, state, config, stop, counter=counter,
                                 trace_fn=trace_fn)
        except StepSizeError as exc:
            raise StepSizeError(f"homotopy stage {idx}: {exc}") from exc
        trace.penalty = lam
        traces.append(trace)
        if trace.stop_reason == "fft_budget":
            break
    return state, traces


@dataclass
class WeightVector:
    """Per-entry penalty weights with the stability floor that produced them."""

    w: np.ndarray
    eps: float


def weight_update(x, kernel_size, floor=1e-3):
    """Weights inverse to the current magnitudes, w_i = 1/(|x_i| + eps).

    The floor is the larger of ``floor`` and the i0-th largest magnitude,
    i0 = ceil(n / log(m/n)), which keeps zero entries from locking out.
    """
    x = np.asarray(x, dtype=float)
    mag = np.abs(x).ravel()
    m = mag.size
    n = int(kernel_size)
    if m > n and math.log(m / n) > 0:
        i0 = math.ceil(n / math.log(m / n))
    else:
        i0 = m
    i0 = min(max(i0, 1), m)
    pivot = float(np.sort(mag)[::-1][i0 - 1])
    eps = max(pivot, floor)
    return WeightVector(1.0 / (np.abs(x) + eps), eps)


def reweight_solve(problem, init, lam, beta=0.9, solver="iadm", outer_rounds=3,
                   stop=None, x_tol=1e-6, counter=None, trace_fn=None):
    """Alternate a weighted solve with a weight refresh, warm-starting each round.

    Weights start at one (round one is the plain problem) and are refreshed
    from the solution after every round; stops early once consecutive map
    stacks differ by at most ``x_tol`` in l2.  Returns the final state and
    the per-round traces.
    """
    if outer_rounds < 1:
        raise ValueError("need at least one outer round")
    inner = _SOLVERS[solver]
    counter = counter if counter is not None else OpCounter()
    stop = stop if stop is not None else StopRule()
    state = init.copy()
    weights = np.ones_like(state.maps)
    kernel_size = int(np.prod(state.kernels.shape[1:]))
    traces = []
    for rnd in range(outer_rounds):
        config = SolverConfig(lam=lam, beta=beta, weights=weights)
        prev_maps = state.maps.copy()
        try:
            state, trace = inner(problem, state, config, stop, counter=counter,
                                 trace_fn=trace_fn)
        except StepSizeError as exc:
            raise StepSizeError(f"reweighting round {rnd}: {exc}") from exc
        trace.round = rnd
        traces.append(trace)
        if float(np.linalg.norm(state.maps - prev_maps)) <= x_tol:
            break
        weights = np.stack([
            weight_update(state.maps[k], kernel_size).w
            for k in range(state.n_kernels)
        ])
    return state, traces
