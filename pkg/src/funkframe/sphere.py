"""Points, coordinates and quadrature grids on the unit sphere.

Angles follow the geographic-style convention used throughout the package:
``lam`` is the azimuth in [0, 2pi) and ``theta`` the polar angle in [0, pi],
so that a point is ``(cos lam sin theta, sin lam sin theta, cos theta)``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

TWO_PI = 2.0 * np.pi
FOUR_PI = 4.0 * np.pi


class InvalidInputError(ValueError):
    """Raised when an argument is outside the domain of an operation."""


class FormatError(ValueError):
    """Raised when a point-set or table file cannot be parsed."""


def sph_to_cart(lam, theta):
    """Map spherical coordinates to unit vectors, shape ``(..., 3)``."""
    lam = np.asarray(lam, dtype=float)
    theta = np.asarray(theta, dtype=float)
    st = np.sin(theta)
    return np.stack([np.cos(lam) * st, np.sin(lam) * st, np.cos(theta)], axis=-1)


def cart_to_sph(p, tol=1e-8):
    """Inverse of :func:`sph_to_cart`.

    Returns ``(lam, theta)``. At the poles ``lam = 0``.

    Raises
    ------
    InvalidInputError
        If any input vector deviates from unit length by more than `tol`.
    """
    p = np.asarray(p, dtype=float)
    norm = np.linalg.norm(p, axis=-1)
    if np.any(np.abs(norm - 1.0) > tol):
        raise InvalidInputError("cart_to_sph expects unit vectors")
    x, y, z = p[..., 0], p[..., 1], p[..., 2]
    theta = np.arctan2(np.hypot(x, y), z)
    lam = np.mod(np.arctan2(y, x), TWO_PI)
    pole = np.hypot(x, y) == 0.0
    lam = np.where(pole, 0.0, lam)
    # mod can round 2pi - tiny up to exactly 2pi
    lam = np.where(lam >= TWO_PI, 0.0, lam)
    if lam.ndim == 0:
        return float(lam), float(theta)
    return lam, theta


def antipode(lam, theta):
    """Coordinates of the antipodal point, ``((lam + pi) mod 2pi, pi - theta)``."""
    lam2 = np.mod(np.asarray(lam, dtype=float) + np.pi, TWO_PI)
    theta2 = np.pi - np.asarray(theta, dtype=float)
    if lam2.ndim == 0:
        return float(lam2), float(theta2)
    return lam2, theta2


@dataclass(frozen=True)
class GreatCircleFrame:
    """Orthonormal right-handed triple; ``u`` and ``v`` span the circle orthogonal to ``xi``."""

    xi: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def point(self, t):
        """Points ``cos(t) u + sin(t) v`` on the great circle."""
        t = np.asarray(t, dtype=float)[..., None]
        return np.cos(t) * self.u + np.sin(t) * self.v


def tangent_frames(xi):
    """Vectorized :func:`tangent_frame`; returns arrays ``(u, v)`` shaped like `xi`.

    ``u`` is Gram-Schmidt of the coordinate axis least aligned with ``xi``,
    and ``v = xi x u``.
    """
    xi = np.asarray(xi, dtype=float)
    axis = np.argmin(np.abs(xi), axis=-1)
    e = np.zeros_like(xi)
    np.put_along_axis(e, axis[..., None], 1.0, axis=-1)
    u = e - np.sum(e * xi, axis=-1, keepdims=True) * xi
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    v = np.cross(xi, u)
    return u, v


def tangent_frame(xi):
    xi = np.asarray(xi, dtype=float)
    u, v = tangent_frames(xi)
    return GreatCircleFrame(xi=xi, u=u, v=v)


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Nodes and positive weights for integration over the sphere.

    Attributes
    ----------
    lam, theta : ndarray
        Spherical coordinates of the nodes.
    weights : ndarray
        Quadrature weights in steradians, summing to 4pi.
    exact_degree : int
        Claimed polynomial exactness degree.
    kind : str
        ``"product"`` or ``"design"``.
    shape : tuple or None
        ``(n_theta, n_lambda)`` for product grids. Nodes are then stored
        theta-major so that ``samples.reshape(shape)`` is a theta x lambda raster.
    """

    lam: np.ndarray
    theta: np.ndarray
    weights: np.ndarray
    exact_degree: int
    kind: str = "product"
    shape: tuple | None = None
    nodes: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.nodes is None:
            object.__setattr__(self, "nodes", sph_to_cart(self.lam, self.theta))
        for arr in (self.lam, self.theta, self.weights, self.nodes):
            arr.setflags(write=False)

    @property
    def size(self):
        return self.lam.shape[0]

    def integrate(self, values):
        return np.sum(self.weights * np.asarray(values), axis=-1)

    def inner(self, f, g):
        """Discrete ``<f, g> = sum_i w_i f_i conj(g_i)``."""
        return np.sum(self.weights * f * np.conj(g))

    def norm(self, f):
        return float(np.sqrt(np.sum(self.weights * np.abs(f) ** 2)))

    def unique_theta(self):
        """Distinct polar angles and the inverse index into them."""
        if self.shape is not None:
            n_theta, n_lambda = self.shape
            thetas = self.theta[::n_lambda]
            inv = np.repeat(np.arange(n_theta), n_lambda)
            return thetas, inv
        return self.theta, np.arange(self.size)

    def antipodal_index(self, tol=1e-12):
        """Index of the antipode of each node, or -1 where the antipode is not a node."""
        nodes = self.nodes
        tree = cKDTree(nodes)
        dist, idx = tree.query(-nodes)
        return np.where(dist <= tol, idx, -1)

    def describe(self):
        if self.kind == "product":
            return f"product {self.shape[0]} {self.shape[1]}"
        return f"design {self.size} {self.exact_degree}"


def product_grid(n_theta, n_lambda):
    """Gauss-Legendre in ``cos theta`` times a uniform azimuth grid.

    Exact for spherical polynomials of degree ``min(2 n_theta - 1, n_lambda - 1)``.
    """
    if n_theta < 1 or n_lambda < 1:
        raise InvalidInputError("product_grid needs n_theta >= 1 and n_lambda >= 1")
    x, wx = np.polynomial.legendre.leggauss(n_theta)
    # descending x so theta increases from the north pole
    x, wx = x[::-1], wx[::-1]
    theta = np.arccos(x)
    lam = TWO_PI * np.arange(n_lambda) / n_lambda
    weights = np.repeat(wx * (TWO_PI / n_lambda), n_lambda)
    return QuadratureGrid(
        lam=np.tile(lam, n_theta),
        theta=np.repeat(theta, n_lambda),
        weights=weights,
        exact_degree=min(2 * n_theta - 1, n_lambda - 1),
        kind="product",
        shape=(n_theta, n_lambda),
    )


def grid_for_degree(l_max):
    """Smallest product grid exact to degree ``2 * l_max``."""
    return product_grid(l_max + 1, 2 * l_max + 2)


def design_grid(nodes, exact_degree):
    """Equal-weight (Chebyshev-type) grid from unit vectors."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[1] != 3 or nodes.shape[0] == 0:
        raise FormatError("design needs a nonempty (M, 3) node array")
    if np.any(np.abs(np.linalg.norm(nodes, axis=1) - 1.0) > 1e-8):
        raise FormatError("design node is not a unit vector")
    lam, theta = cart_to_sph(nodes)
    m = nodes.shape[0]
    return QuadratureGrid(
        lam=np.atleast_1d(lam),
        theta=np.atleast_1d(theta),
        weights=np.full(m, FOUR_PI / m),
        exact_degree=int(exact_degree),
        kind="design",
        nodes=nodes.copy(),
    )


def load_design(path):
    """Read a point-set file: header ``design M D`` then M lines ``x y z``."""
    try:
        with open(path) as fh:
            lines = [ln.split() for ln in fh if ln.strip()]
    except OSError as exc:
        raise FormatError(f"cannot read design file {path}: {exc}") from exc
    if not lines:
        raise FormatError(f"{path}: empty design file")
    head = lines[0]
    if len(head) != 3 or head[0] != "design":
        raise FormatError(f"{path}: bad header {' '.join(head)!r}")
    try:
        m, degree = int(head[1]), int(head[2])
        rows = [[float(t) for t in ln] for ln in lines[1:]]
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if m <= 0 or len(rows) != m or any(len(r) != 3 for r in rows):
        raise FormatError(f"{path}: expected {m} rows of 3 coordinates")
    return design_grid(np.array(rows), degree)


def save_design(path, nodes, exact_degree):
    nodes = np.asarray(nodes, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"design {nodes.shape[0]} {int(exact_degree)}\n")
        for x, y, z in nodes:
            # repr round-trips doubles exactly
            fh.write(f"{float(x)!r} {float(y)!r} {float(z)!r}\n")
    return os.fspath(path)
