"""Seeded synthetic problem generation: kernels, activations, noise."""

from dataclasses import dataclass

import numpy as np

from .conv import cconv
from .rng import substream

__all__ = [
    "KernelSpec",
    "KernelSpec2D",
    "ActivationSpec",
    "NoiseSpec",
    "gen_kernel",
    "gen_kernel2d",
    "gen_activation",
    "gen_observation",
]

_KERNEL_KINDS = {"delta", "uniform-sphere", "gaussian", "ar1", "ar2"}
_DIST_ALIASES = {
    "b": "bernoulli", "bernoulli": "bernoulli",
    "bg": "bernoulli-gaussian", "bernoulli-gaussian": "bernoulli-gaussian",
    "br": "bernoulli-rademacher", "bernoulli-rademacher": "bernoulli-rademacher",
}


@dataclass
class KernelSpec:
    """Kernel family and window length.

    ``gaussian`` uses the discretized window exp(-(2i-n0-1)^2/(sigma^2 (n0-1)^2));
    ``ar1``/``ar2`` are the one-sided exponentials exp(-t/tau) and
    exp(-t/tau1) - exp(-t/tau2), sampled at ``rate`` Hz.  All kernels are
    normalized to the sphere.
    """

    kind: str
    n0: int
    sigma: float = 0.5
    tau: float = 0.25
    tau1: float = 0.2
    tau2: float = 0.03
    rate: float = 100.0

    def __post_init__(self):
        kind = self.kind.lower().replace("gaussian-window", "gaussian")
        if kind not in _KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        self.kind = kind
        if self.n0 < 1:
            raise ValueError("window length must be positive")
        if kind == "gaussian" and (self.sigma <= 0 or self.n0 < 2):
            raise ValueError("gaussian window needs sigma > 0 and n0 >= 2")
        if kind == "ar1" and self.tau <= 0:
            raise ValueError("ar1 needs tau > 0")
        if kind == "ar2" and not self.tau1 > self.tau2 > 0:
            raise ValueError("ar2 needs tau1 > tau2 > 0")
        if kind in ("ar1", "ar2") and self.rate <= 0:
            raise ValueError("sampling rate must be positive")


@dataclass
class KernelSpec2D:
    """2D kernel family: delta, uniform-sphere, or a separable gaussian bump."""

    kind: str
    n0: tuple
    sigma: float = 0.5

    def __post_init__(self):
        kind = self.kind.lower().replace("gaussian-window", "gaussian")
        if kind not in ("delta", "uniform-sphere", "gaussian"):
            raise ValueError(f"unknown 2D kernel kind {self.kind!r}")
        self.kind = kind
        self.n0 = tuple(int(v) for v in self.n0)
        if any(v < 1 for v in self.n0):
            raise ValueError("window lengths must be positive")
        if kind == "gaussian" and (self.sigma <= 0 or any(v < 2 for v in self.n0)):
            raise ValueError("gaussian bump needs sigma > 0 and lengths >= 2")


@dataclass
class ActivationSpec:
    """Sparse activation model: i.i.d. Bernoulli-gated entries at rate theta."""

    dist: str
    m: object           # length, or (m1, m2) for images
    theta: float

    def __post_init__(self):
        key = self.dist.lower()
        if key not in _DIST_ALIASES:
            raise ValueError(f"unknown activation distribution {self.dist!r}")
        self.dist = _DIST_ALIASES[key]
        if not 0.0 < self.theta < 1.0:
            raise ValueError("sparsity rate must lie in (0, 1)")

    @property
    def shape(self):
        return (int(self.m),) if np.isscalar(self.m) else tuple(self.m)


@dataclass
class NoiseSpec:
    """Additive white Gaussian noise level and constant bias."""

    sigma: float = 0.0
    bias: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise level must be nonnegative")


def _gaussian_window(n0, sigma):
    i = np.arange(1, n0 + 1)
    return np.exp(-((2 * i - n0 - 1) ** 2) / (sigma**2 * (n0 - 1) ** 2))


def gen_kernel(spec, seed=0, atom=0):
    """Unit-norm kernel drawn from the spec's ``kernel`` substream."""
    rng = substream(seed, "kernel", atom)
    n0 = spec.n0
    if spec.kind == "delta":
        out = np.zeros(n0)
        out[0] = 1.0
        return out
    if spec.kind == "uniform-sphere":
        v = rng.standard_normal(n0)
        return v / np.linalg.norm(v)
    if spec.kind == "gaussian":
        v = _gaussian_window(n0, spec.sigma)
        return v / np.linalg.norm(v)
    t = np.arange(n0) / spec.rate
    if spec.kind == "ar1":
        v = np.exp(-t / spec.tau)
    else:
        v = np.exp(-t / spec.tau1) - np.exp(-t / spec.tau2)
    return v / np.linalg.norm(v)


def gen_kernel2d(spec, seed=0, atom=0):
    """Unit-Frobenius-norm 2D kernel."""
    rng = substream(seed, "kernel", atom)
    n1, n2 = spec.n0
    if spec.kind == "delta":
        out = np.zeros((n1, n2))
        out[0, 0] = 1.0
        return out
    if spec.kind == "uniform-sphere":
        v = rng.standard_normal((n1, n2))
        return v / np.linalg.norm(v)
    v = np.outer(_gaussian_window(n1, spec.sigma), _gaussian_window(n2, spec.sigma))
    return v / np.linalg.norm(v)


def gen_activation(spec, seed=0, atom=0):
    """Sparse map with i.i.d. entries from the spec's distribution."""
    rng = substream(seed, "activation", atom)
    shape = spec.shape
    mask = rng.random(shape) < spec.theta
    if spec.dist == "bernoulli":
        return mask.astype(float)
    if spec.dist == "bernoulli-gaussian":
        amp = rng.standard_normal(shape)
    else:
        amp = np.where(rng.random(shape) < 0.5, -1.0, 1.0)
    return mask * amp


def gen_observation(a0, x0, noise=None, seed=0):
    """Assemble the observation: convolution plus bias plus white noise."""
    noise = noise if noise is not None else NoiseSpec()
    a0 = np.asarray(a0, dtype=float)
    x0 = np.asarray(x0, dtype=float)
    y = cconv(x0, a0) + noise.bias
    if noise.sigma > 0:
        y = y + noise.sigma * substream(seed, "noise").standard_normal(x0.shape)
    return y
