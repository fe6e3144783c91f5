"""Short-and-sparse deconvolution toolkit.

Blind recovery of short kernels and long sparse activation maps from their
cyclic convolution, via the sphere-constrained bilinear Lasso: alternating
proximal/Riemannian descent with momentum, homotopy continuation, and
iterative reweighting, plus a synthetic-experiment harness.
"""

__version__ = "0.1.0"

from .conv import OpCounter, cconv, ccorr, cconv2d, ccorr2d
from .objective import (
    BilinearState,
    PenaltyConfig,
    Problem,
    kernel_length,
    marginal_phi,
    mutual_coherence,
    obj_value,
    psi_value,
    shift_coherence,
)
from .solvers import SolverConfig, StopRule, adm_solve, iadm_solve, prox_l1
from .continuation import HomotopySchedule, homotopy_solve, reweight_solve, weight_update
from .pipeline import (
    deconvolve,
    init_kernel,
    init_multi,
    initial_state,
    recovery_error,
    shift_correct,
)
from .synth import ActivationSpec, KernelSpec, KernelSpec2D, NoiseSpec
from .cdl import build_cdl_problem, cdl_score, duplicated_kernels
from .estimators import SparseDeconvolver

__all__ = [
    "__version__",
    "OpCounter", "cconv", "ccorr", "cconv2d", "ccorr2d",
    "BilinearState", "PenaltyConfig", "Problem", "kernel_length",
    "marginal_phi", "mutual_coherence", "obj_value", "psi_value",
    "shift_coherence",
    "SolverConfig", "StopRule", "adm_solve", "iadm_solve", "prox_l1",
    "HomotopySchedule", "homotopy_solve", "reweight_solve", "weight_update",
    "deconvolve", "init_kernel", "init_multi", "initial_state",
    "recovery_error", "shift_correct",
    "ActivationSpec", "KernelSpec", "KernelSpec2D", "NoiseSpec",
    "build_cdl_problem", "cdl_score", "duplicated_kernels",
    "SparseDeconvolver",
]
