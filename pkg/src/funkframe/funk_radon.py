"""The Funk-Radon transform: spectral (eigenvalue) form and great-circle quadrature."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .harmonics import HarmonicCoeffs, NodeFunction, ylm_table
from .sphere import InvalidInputError, tangent_frames

DEFAULT_M_CIRCLE = 512


def _check_even(l):
    if l < 0 or l % 2:
        raise InvalidInputError(f"degree must be even and nonnegative, got {l}")


def legendre_p0(l):
    """``P_l(0)`` for even `l` via ``r_l = -r_{l-2} (l - 1) / l``."""
    _check_even(l)
    r = 1.0
    for j in range(2, l + 1, 2):
        r = -r * (j - 1) / j
    return r


def legendre_p0_exact(l):
    """``P_l(0)`` as an exact rational, same recurrence."""
    _check_even(l)
    r = Fraction(1)
    for j in range(2, l + 1, 2):
        r = -r * Fraction(j - 1, j)
    return r


def p0_table(l_max):
    """``P_l(0)`` for ``l = 0..l_max`` (zero at odd degrees)."""
    out = np.zeros(l_max + 1)
    r = 1.0
    out[0] = r
    for l in range(2, l_max + 1, 2):
        r = -r * (l - 1) / l
        out[l] = r
    return out


def fr_spectral(c):
    """Apply R by multiplying each degree-``l`` coefficient with ``P_l(0)``."""
    return c.scale_degrees(p0_table(c.l_max))


def stability_ratio(l):
    """``sqrt(l + 1/2) |P_l(0)|``; increases from sqrt(1/2) towards sqrt(2/pi)."""
    p = legendre_p0(l)
    return float(np.sqrt(l + 0.5) * abs(p))


def fr_direct_values(f, grid, m_circle=DEFAULT_M_CIRCLE, chunk=None):
    """Great-circle means of `f` at every node of `grid`.

    `f` maps unit vectors ``(..., 3)`` to values of shape ``(...)`` or, for a
    batch of K functions, ``(K, ...)``. Returns ``(M,)`` or ``(K, M)``.
    """
    if m_circle < 4:
        raise InvalidInputError("m_circle must be at least 4")
    if chunk is None:
        chunk = max(1, 2**20 // m_circle)
    t = 2.0 * np.pi * np.arange(m_circle) / m_circle
    ct, st = np.cos(t)[None, :, None], np.sin(t)[None, :, None]
    xi = grid.nodes
    parts = []
    for start in range(0, grid.size, chunk):
        u, v = tangent_frames(xi[start : start + chunk])
        eta = ct * u[:, None, :] + st * v[:, None, :]
        parts.append(np.mean(np.asarray(f(eta)), axis=-1))
    return np.concatenate(parts, axis=-1)


def fr_direct(f, grid, m_circle=DEFAULT_M_CIRCLE):
    """Funk-Radon transform of `f` by the trapezoidal rule on each great circle.

    Parameters
    ----------
    f : callable
        Maps an array of unit vectors ``(..., 3)`` to values ``(...)``.
    grid : QuadratureGrid
        Output nodes ``xi``.
    m_circle : int
        Number of equispaced points ``t_j = 2 pi j / m_circle`` on each circle
        ``cos(t) u + sin(t) v``.

    Returns
    -------
    NodeFunction
        ``(1/m_circle) sum_j f(eta(t_j))`` at every node; even by construction.
    """
    return NodeFunction(grid, fr_direct_values(f, grid, m_circle))


def harmonic_function(c):
    """Wrap coefficients as a pointwise-evaluable function of unit vectors."""

    def f(p):
        p = np.asarray(p, dtype=float)
        lam, theta = _angles(p)
        return (c.values @ ylm_table(c.l_max, lam.ravel(), theta.ravel())).reshape(p.shape[:-1])

    return f


def harmonic_table_function(l_max):
    """Batch evaluator returning every ``Y_l^m`` (flat order) at the given points."""

    def f(p):
        p = np.asarray(p, dtype=float)
        lam, theta = _angles(p)
        return ylm_table(l_max, lam.ravel(), theta.ravel()).reshape((-1,) + p.shape[:-1])

    return f


def _angles(p):
    theta = np.arctan2(np.hypot(p[..., 0], p[..., 1]), p[..., 2])
    lam = np.arctan2(p[..., 1], p[..., 0])
    return lam, theta


def fr_direct_coeffs(c, grid, m_circle=DEFAULT_M_CIRCLE):
    """:func:`fr_direct` applied to a band-limited function given by coefficients."""
    return fr_direct(harmonic_function(c), grid, m_circle)


__all__ = [
    "DEFAULT_M_CIRCLE",
    "HarmonicCoeffs",
    "fr_direct",
    "fr_direct_coeffs",
    "fr_direct_values",
    "harmonic_table_function",
    "fr_spectral",
    "harmonic_function",
    "legendre_p0",
    "legendre_p0_exact",
    "p0_table",
    "stability_ratio",
]
