"""Multi-kernel problem assembly and permutation-aware dictionary scoring."""

import itertools
from typing import NamedTuple

import numpy as np

from .conv import cconv
from .objective import GroundTruth, Problem
from .pipeline import recovery_error
from .synth import NoiseSpec, gen_activation, gen_kernel
from .rng import substream

__all__ = ["build_cdl_problem", "cdl_score", "CdlScore", "duplicated_kernels"]

_MAX_EXHAUSTIVE = 6


def build_cdl_problem(kernel_specs, activation_specs, noise=None, seed=0,
                      nonneg=False, fit_bias=False):
    """Superpose N kernel/map pairs into one observation, keeping the truth."""
    if len(kernel_specs) != len(activation_specs):
        raise ValueError("need one activation spec per kernel spec")
    if len(kernel_specs) < 1:
        raise ValueError("need at least one kernel")
    n0 = {spec.n0 for spec in kernel_specs}
    if len(n0) != 1:
        raise ValueError("kernel windows must share one length")
    shapes = {spec.shape for spec in activation_specs}
    if len(shapes) != 1:
        raise ValueError("activation maps must share one shape")
    noise = noise if noise is not None else NoiseSpec()

    kernels = np.stack([gen_kernel(spec, seed, atom=k)
                        for k, spec in enumerate(kernel_specs)])
    maps = np.stack([gen_activation(spec, seed, atom=k)
                     for k, spec in enumerate(activation_specs)])
    y = np.full(maps.shape[1:], noise.bias, dtype=float)
    for k in range(kernels.shape[0]):
        y += cconv(maps[k], kernels[k])
    if noise.sigma > 0:
        y = y + noise.sigma * substream(seed, "noise").standard_normal(y.shape)
    return Problem(y=y, window=n0.pop(), n_kernels=len(kernel_specs),
                   nonneg=nonneg, fit_bias=fit_bias,
                   truth=GroundTruth(kernels, maps, noise.bias))


class CdlScore(NamedTuple):
    error: float
    permutation: tuple
    shifts: tuple


def cdl_score(truth_kernels, estimate_kernels, threshold=1e-2):
    """Dictionary recovery error modulo sign, shift, and permutation.

    Minimizes, over kernel permutations, the worst per-kernel recovery
    error; exhaustive search is limited to N <= 6.
    """
    truth = np.asarray(truth_kernels, dtype=float)
    est = np.asarray(estimate_kernels, dtype=float)
    if truth.shape[0] != est.shape[0]:
        raise ValueError("kernel counts differ")
    n_atoms = truth.shape[0]
    if n_atoms > _MAX_EXHAUSTIVE:
        raise ValueError(
            f"exhaustive permutation search limited to N <= {_MAX_EXHAUSTIVE}")
    pair = [[recovery_error(truth[i], est[j], threshold=threshold)
             for j in range(n_atoms)] for i in range(n_atoms)]
    best = None
    for perm in itertools.permutations(range(n_atoms)):
        worst = max(pair[i][perm[i]].error for i in range(n_atoms))
        if best is None or worst < best[0]:
            best = (worst, perm)
    error, perm = best
    shifts = tuple(pair[i][perm[i]].offset for i in range(n_atoms))
    return CdlScore(error, perm, shifts)


def duplicated_kernels(kernels, threshold=0.95):
    """Pairs of estimated kernels whose max-lag cross-correlation exceeds 0.95.

    Surfaces the documented failure mode where continuation collapses two
    atoms onto one motif.
    """
    kernels = np.asarray(kernels, dtype=float)
    unit = kernels / np.linalg.norm(kernels, axis=tuple(range(1, kernels.ndim)),
                                    keepdims=True)
    flagged = []
    for i in range(unit.shape[0]):
        for j in range(i + 1, unit.shape[0]):
            peak = float(np.max(np.abs(
                np.correlate(unit[i].ravel(), unit[j].ravel(), mode="full"))))
            if peak > threshold:
                flagged.append((i, j))
    return flagged
