"""Spherical harmonics and quadrature-based analysis/synthesis.

Convention: orthonormal harmonics with the Condon-Shortley phase,

    Y_l^m(lam, theta) = Pbar_l^m(cos theta) exp(i m lam),
    Y_l^{-m} = (-1)^m conj(Y_l^m),

where ``Pbar`` is the associated Legendre function scaled so that
``int |Y_l^m|^2 = 1`` over the sphere. Coefficients are stored flat at index
``l*l + l + m``.

Transforms are plain sums over the quadrature nodes. On product grids the
azimuthal sum is done first (still a direct sum, just separable), which makes
degree 100 on ~2e4 nodes a sub-second operation.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .sphere import FormatError, InvalidInputError, QuadratureGrid

SQRT_4PI = np.sqrt(4.0 * np.pi)


def n_coeffs(l_max):
    return (l_max + 1) ** 2


def flat_index(l, m):
    return l * l + l + m


def degree_of_index(l_max):
    """Degree ``l`` of every flat coefficient slot."""
    return np.repeat(np.arange(l_max + 1), 2 * np.arange(l_max + 1) + 1)


def order_of_index(l_max):
    return np.concatenate([np.arange(-l, l + 1) for l in range(l_max + 1)])


def legendre_orders(l_max, x, orders=None):
    """Yield ``(m, P)`` with ``P[l - m] = Pbar_l^m(x)`` for ``l = m..l_max``.

    Uses the standard three-term recurrence in ``l`` started from the sectoral
    value ``Pbar_m^m``, which itself is built up in ``m``. All factors are
    ratios of order one, so nothing overflows for ``l_max`` in the hundreds.
    """
    x = np.asarray(x, dtype=float)
    s = np.sqrt(np.clip(1.0 - x * x, 0.0, None))
    wanted = None if orders is None else set(int(m) for m in orders)
    top = l_max if wanted is None else max(wanted)
    pmm = np.full_like(x, 1.0 / SQRT_4PI)
    for m in range(top + 1):
        if m > 0:
            pmm = -np.sqrt((2 * m + 1) / (2.0 * m)) * s * pmm
        if wanted is not None and m not in wanted:
            continue
        out = np.empty((l_max - m + 1,) + x.shape)
        out[0] = pmm
        if m < l_max:
            out[1] = np.sqrt(2 * m + 3.0) * x * pmm
        for l in range(m + 2, l_max + 1):
            a = np.sqrt((4.0 * l * l - 1.0) / (l * l - m * m))
            b = np.sqrt((2 * l + 1.0) * ((l - 1) ** 2 - m * m) / ((2 * l - 3.0) * (l * l - m * m)))
            out[l - m] = a * x * out[l - m - 1] - b * out[l - m - 2]
        yield m, out


def eval_ylm(l, m, lam, theta):
    """Evaluate ``Y_l^m`` at spherical coordinates (vectorized)."""
    if l < 0 or abs(m) > l:
        raise InvalidInputError(f"invalid harmonic index (l={l}, m={m})")
    lam = np.asarray(lam, dtype=float)
    theta = np.asarray(theta, dtype=float)
    am = abs(m)
    _, p = next(legendre_orders(l, np.cos(theta), orders=[am]))
    val = p[l - am] * np.exp(1j * am * lam)
    if m < 0:
        val = (-1) ** am * np.conj(val)
    return val


def ylm_table(l_max, lam, theta):
    """All ``Y_l^m`` up to `l_max` at the given points, shape ``(n_coeffs, npts)``."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.zeros((n_coeffs(l_max), lam.size), dtype=complex)
    for m, p in legendre_orders(l_max, np.cos(theta)):
        e = np.exp(1j * m * lam)
        for l in range(m, l_max + 1):
            out[flat_index(l, m)] = p[l - m] * e
            if m:
                out[flat_index(l, -m)] = (-1) ** m * p[l - m] * np.conj(e)
    return out


class HarmonicCoeffs:
    """Spherical-harmonic coefficients ``c(l, m)`` for ``0 <= l <= l_max``."""

    __slots__ = ("l_max", "values")

    def __init__(self, l_max, values=None):
        if l_max < 0:
            raise InvalidInputError("l_max must be nonnegative")
        self.l_max = int(l_max)
        if values is None:
            values = np.zeros(n_coeffs(l_max), dtype=complex)
        values = np.asarray(values, dtype=complex)
        if values.shape != (n_coeffs(l_max),):
            raise InvalidInputError(f"expected {n_coeffs(l_max)} coefficients, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("coefficients must be finite")
        self.values = values

    @classmethod
    def unit(cls, l_max, l, m):
        c = cls(l_max)
        c.values[flat_index(l, m)] = 1.0
        return c

    def __getitem__(self, lm):
        l, m = lm
        if l > self.l_max or abs(m) > l:
            raise IndexError(lm)
        return self.values[flat_index(l, m)]

    def __setitem__(self, lm, value):
        l, m = lm
        if l > self.l_max or abs(m) > l:
            raise IndexError(lm)
        self.values[flat_index(l, m)] = value

    def __add__(self, other):
        other = other.resized(self.l_max) if other.l_max != self.l_max else other
        return HarmonicCoeffs(self.l_max, self.values + other.values)

    def __sub__(self, other):
        other = other.resized(self.l_max) if other.l_max != self.l_max else other
        return HarmonicCoeffs(self.l_max, self.values - other.values)

    def __mul__(self, scalar):
        return HarmonicCoeffs(self.l_max, self.values * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"HarmonicCoeffs(l_max={self.l_max}, norm={self.norm():.6g})"

    def copy(self):
        return HarmonicCoeffs(self.l_max, self.values.copy())

    def degrees(self):
        return degree_of_index(self.l_max)

    def scale_degrees(self, mult):
        """Multiply every coefficient of degree ``l`` by ``mult[l]``."""
        mult = np.asarray(mult)
        return HarmonicCoeffs(self.l_max, self.values * mult[self.degrees()])

    def resized(self, l_max):
        """Truncate or zero-pad to a new maximal degree."""
        out = np.zeros(n_coeffs(l_max), dtype=complex)
        n = min(n_coeffs(l_max), n_coeffs(self.l_max))
        out[:n] = self.values[:n]
        return HarmonicCoeffs(l_max, out)

    def norm(self):
        return float(np.linalg.norm(self.values))

    def inner(self, other):
        """L2 inner product ``<self, other>`` (conjugate-linear in `other`)."""
        l = min(self.l_max, other.l_max)
        n = n_coeffs(l)
        return complex(np.vdot(other.values[:n], self.values[:n]))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for l in range(self.l_max + 1):
                for m in range(-l, l + 1):
                    v = self.values[flat_index(l, m)]
                    w.writerow([l, m, repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path):
        rows = []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row:
                    continue
                try:
                    l, m, re, im = row
                    rows.append((int(l), int(m), float(re), float(im)))
                except ValueError as exc:
                    raise FormatError(f"{path}:{lineno}: expected 'l,m,re,im'") from exc
        l_max = max((r[0] for r in rows), default=0)
        c = cls(l_max)
        for l, m, re, im in rows:
            c[l, m] = complex(re, im)
        return c


@dataclass(eq=False)
class NodeFunction:
    """Samples of a sphere function at the nodes of a quadrature grid."""

    grid: QuadratureGrid
    samples: np.ndarray

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if self.samples.shape != (self.grid.size,):
            raise InvalidInputError(
                f"expected {self.grid.size} samples, got {self.samples.shape}"
            )

    def norm(self):
        return self.grid.norm(self.samples)

    def evenness_defect(self):
        """Largest ``|f(xi) - f(-xi)|`` over antipodal node pairs present in the grid."""
        idx = self.grid.antipodal_index()
        ok = idx >= 0
        if not np.any(ok):
            return 0.0
        return float(np.max(np.abs(self.samples[ok] - self.samples[idx[ok]])))


def _check_exactness(grid, l_max):
    if grid.exact_degree < 2 * l_max:
        warnings.warn(
            f"grid exact to degree {grid.exact_degree} < 2*l_max = {2 * l_max}; "
            "discrete orthogonality is not guaranteed",
            stacklevel=3,
        )


def _azimuth_matrix(lam, l_max, sign):
    m = np.arange(-l_max, l_max + 1)
    return np.exp(sign * 1j * np.outer(lam, m))


def analysis_values(grid, samples, l_max):
    """Batch analysis: `samples` ``(K, M)`` -> coefficient values ``(K, n_coeffs)``."""
    samples = np.atleast_2d(np.asarray(samples))
    k = samples.shape[0]
    out = np.zeros((k, n_coeffs(l_max)), dtype=complex)
    thetas, inv = grid.unique_theta()
    if grid.shape is not None:
        n_theta, n_lambda = grid.shape
        lam = grid.lam[:n_lambda]
        w_theta = grid.weights[::n_lambda]
        # F[k, t, m + l_max] = sum_j f(theta_t, lam_j) exp(-i m lam_j)
        f = samples.reshape(k, n_theta, n_lambda)
        F = f @ _azimuth_matrix(lam, l_max, -1.0)
        F *= w_theta[None, :, None]
        for m, p in legendre_orders(l_max, np.cos(thetas)):
            ls = np.arange(m, l_max + 1)
            out[:, flat_index(ls, m)] = F[:, :, l_max + m] @ p.T
            if m:
                out[:, flat_index(ls, -m)] = (-1) ** m * (F[:, :, l_max - m] @ p.T)
        return out
    wf = samples * grid.weights
    for m, p in legendre_orders(l_max, np.cos(thetas)):
        p = p[:, inv]
        ls = np.arange(m, l_max + 1)
        e = np.exp(-1j * m * grid.lam)
        out[:, flat_index(ls, m)] = (wf * e) @ p.T
        if m:
            out[:, flat_index(ls, -m)] = (-1) ** m * ((wf * np.conj(e)) @ p.T)
    return out


def synthesis_values(values, l_max, grid):
    """Batch synthesis: coefficient values ``(K, n_coeffs)`` -> samples ``(K, M)``."""
    values = np.atleast_2d(np.asarray(values, dtype=complex))
    k = values.shape[0]
    thetas, inv = grid.unique_theta()
    if grid.shape is not None:
        n_theta, n_lambda = grid.shape
        lam = grid.lam[:n_lambda]
        G = np.zeros((k, n_theta, 2 * l_max + 1), dtype=complex)
        for m, p in legendre_orders(l_max, np.cos(thetas)):
            ls = np.arange(m, l_max + 1)
            G[:, :, l_max + m] = values[:, flat_index(ls, m)] @ p
            if m:
                G[:, :, l_max - m] = (-1) ** m * (values[:, flat_index(ls, -m)] @ p)
        f = G @ _azimuth_matrix(lam, l_max, 1.0).T
        return f.reshape(k, grid.size)
    out = np.zeros((k, grid.size), dtype=complex)
    for m, p in legendre_orders(l_max, np.cos(thetas)):
        p = p[:, inv]
        ls = np.arange(m, l_max + 1)
        e = np.exp(1j * m * grid.lam)
        out += (values[:, flat_index(ls, m)] @ p) * e
        if m:
            out += (-1) ** m * (values[:, flat_index(ls, -m)] @ p) * np.conj(e)
    return out


def analysis(f, l_max):
    """Coefficients ``c(l, m) = sum_i w_i f(xi_i) conj(Y_l^m(xi_i))``."""
    if l_max < 0:
        raise InvalidInputError("l_max must be nonnegative")
    _check_exactness(f.grid, l_max)
    return HarmonicCoeffs(l_max, analysis_values(f.grid, f.samples, l_max)[0])


def synthesis(c, grid):
    """Evaluate ``sum c(l, m) Y_l^m`` at the grid nodes."""
    return NodeFunction(grid, synthesis_values(c.values, c.l_max, grid)[0])


def sobolev_norm(c, s):
    """``sqrt(sum (l + 1/2)^(2s) |c(l, m)|^2)``."""
    w = (c.degrees() + 0.5) ** (2.0 * s)
    return float(np.sqrt(np.sum(w * np.abs(c.values) ** 2)))


def even_projection(c):
    """Zero all odd-degree coefficients."""
    return c.scale_degrees((np.arange(c.l_max + 1) % 2 == 0).astype(float))


def odd_part_norm(c):
    odd = c.degrees() % 2 == 1
    return float(np.linalg.norm(c.values[odd]))
