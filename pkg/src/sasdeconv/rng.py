"""Named, splittable random substreams.

Every generated quantity (kernel, activation, noise, init window) draws from
its own named substream of the experiment seed, so changing one spec never
perturbs another stream and grid cells stay reproducible in isolation.
"""

import numpy as np

_STREAM_IDS = {
    "kernel": 1,
    "activation": 2,
    "noise": 3,
    "init": 4,
    "trial": 5,
}


def substream(seed, name, *indices):
    """Generator for the named substream of ``seed`` (plus optional indices)."""
    if name not in _STREAM_IDS:
        raise KeyError(f"unknown stream name {name!r}")
    entropy = [int(seed), _STREAM_IDS[name], *(int(i) for i in indices)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed, *indices):
    """Stable integer sub-seed for a grid cell or trial."""
    ss = np.random.SeedSequence([int(seed), *(int(i) for i in indices)])
    return int(ss.generate_state(1)[0])
