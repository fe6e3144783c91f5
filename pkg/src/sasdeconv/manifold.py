"""Sphere and oblique-manifold primitives.

Points live on the unit sphere in the Frobenius sense, so the same code
serves 1D kernel vectors and 2D kernel matrices.  The oblique manifold is a
product of spheres, one per dictionary atom, stacked along axis 0.
"""

import numpy as np

__all__ = [
    "AntipodalPointError",
    "tangent_project",
    "retract_exp",
    "retract_inverse",
    "oblique_project",
    "oblique_retract",
    "oblique_retract_inverse",
]

# Norms below this are treated as exactly zero in the retraction (avoids 0/0).
_ZERO_NORM = 1e-14


class AntipodalPointError(ValueError):
    """Inverse retraction requested between (numerically) antipodal points."""


def _check_unit(a, tol=1e-8):
    nrm = np.linalg.norm(a)
    if abs(nrm - 1.0) > tol:
        raise ValueError(f"point is off the sphere: |norm - 1| = {abs(nrm - 1.0):.3e}")


def tangent_project(a, z):
    """Project ``z`` onto the tangent space of the sphere at ``a``.

    Returns ``z - a <a, z>``; idempotent.  ``a`` must be unit-norm.
    """
    a = np.asarray(a, dtype=float)
    z = np.asarray(z, dtype=float)
    _check_unit(a)
    return z - a * float(np.vdot(a, z))


def retract_exp(a, delta):
    """Exponential (great-circle) retraction of tangent vector ``delta`` at ``a``.

    ``a cos|delta| + (delta/|delta|) sin|delta|``; returns ``a`` itself for a
    (numerically) zero tangent vector.
    """
    a = np.asarray(a, dtype=float)
    delta = np.asarray(delta, dtype=float)
    r = float(np.linalg.norm(delta))
    if r < _ZERO_NORM:
        return a.copy()
    return a * np.cos(r) + (delta / r) * np.sin(r)


def retract_inverse(a, b):
    """Tangent vector at ``a`` whose exponential retraction reaches ``b``.

    Computed as ``(alpha / sin alpha) P_{a^perp} b`` with
    ``alpha = arccos(<a, b>)``; the returned norm equals the geodesic
    distance.  Raises :class:`AntipodalPointError` near the antipode of
    ``a``, where the map is singular.  (arccos of a float inner product
    cannot resolve pi closer than ~1.5e-8, so the guard band is 1e-7.)
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = float(np.clip(np.vdot(a, b), -1.0, 1.0))
    alpha = float(np.arccos(c))
    if np.pi - alpha <= 1e-7:
        raise AntipodalPointError("inverse retraction is singular at the antipode")
    w = b - a * c
    nw = float(np.linalg.norm(w))  # equals sin(alpha) for unit a, b
    if alpha == 0.0 or nw < _ZERO_NORM:
        return np.zeros_like(a)
    return (alpha / nw) * w


def _per_atom(op, *stacks):
    out = []
    for k, atoms in enumerate(zip(*stacks)):
        try:
            out.append(op(*atoms))
        except ValueError as exc:
            raise type(exc)(f"atom {k}: {exc}") from exc
    return np.stack(out)


def oblique_project(kernels, z):
    """Tangent projection applied atom-wise on a stack of sphere points."""
    return _per_atom(tangent_project, np.asarray(kernels, dtype=float),
                     np.asarray(z, dtype=float))


def oblique_retract(kernels, deltas):
    """Exponential retraction applied atom-wise."""
    return _per_atom(retract_exp, np.asarray(kernels, dtype=float),
                     np.asarray(deltas, dtype=float))


def oblique_retract_inverse(kernels, targets):
    """Inverse retraction applied atom-wise."""
    return _per_atom(retract_inverse, np.asarray(kernels, dtype=float),
                     np.asarray(targets, dtype=float))
