"""Test functions, simulated measurements, noise and error metrics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .funk_radon import DEFAULT_M_CIRCLE, fr_direct
from .harmonics import NodeFunction
from .sphere import FormatError, InvalidInputError


@dataclass(frozen=True)
class SplineCap:
    """Quadratic spline bump ``a ((t - h) / (1 - h))^2`` for ``t = xi . center > h``."""

    center: tuple
    h: float
    amplitude: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (3,) or abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise InvalidInputError(f"cap center must be a unit vector, got {self.center}")
        if not -1.0 < self.h < 1.0:
            raise InvalidInputError(f"cap opening h must lie in (-1, 1), got {self.h}")

    def profile(self, t):
        return np.where(t > self.h, ((t - self.h) / (1.0 - self.h)) ** 2, 0.0)


@dataclass(frozen=True)
class Phantom:
    caps: tuple
    evenized: bool = True

    def __post_init__(self):
        if not self.caps:
            raise InvalidInputError("phantom needs at least one cap")

    def __call__(self, xi):
        return phantom_eval(self, xi)


def phantom_eval(p, xi):
    """Sum of caps; with ``evenized`` each cap is averaged with its reflection."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1])
    for cap in p.caps:
        t = xi @ np.asarray(cap.center, dtype=float)
        if p.evenized:
            out += cap.amplitude * 0.5 * (cap.profile(t) + cap.profile(-t))
        else:
            out += cap.amplitude * cap.profile(t)
    return out


def default_phantom():
    """Four caps in tetrahedral directions; zero in a neighbourhood of both poles."""
    dirs = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]]) / np.sqrt(3.0)
    amps = (1.0, 0.8, 0.6, 0.9)
    return Phantom(tuple(SplineCap(tuple(d), 0.7, a) for d, a in zip(dirs, amps)))


def zero_phantom():
    return Phantom((SplineCap((0.0, 0.0, 1.0), 0.5, 0.0),))


def load_phantom(path):
    """One cap per line: ``cx cy cz h amplitude``; ``#`` starts a comment."""
    caps = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                cx, cy, cz, h, a = (float(t) for t in line.split())
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: expected 'cx cy cz h amplitude'") from exc
            c = np.array([cx, cy, cz])
            norm = np.linalg.norm(c)
            if norm == 0.0:
                raise FormatError(f"{path}:{lineno}: zero cap center")
            caps.append(SplineCap(tuple(c / norm), h, a))
    if not caps:
        raise FormatError(f"{path}: no caps")
    return Phantom(tuple(caps))


def save_phantom(p, path):
    with open(path, "w") as fh:
        for cap in p.caps:
            cx, cy, cz = (float(v) for v in cap.center)
            fh.write(f"{cx!r} {cy!r} {cz!r} {float(cap.h)!r} {float(cap.amplitude)!r}\n")


def sample(p, grid):
    return NodeFunction(grid, phantom_eval(p, grid.nodes))


def forward_data(p, grid, m_circle=DEFAULT_M_CIRCLE):
    """Funk-Radon data of the phantom by great-circle quadrature (no spectral model)."""
    return fr_direct(lambda eta: phantom_eval(p, eta), grid, m_circle)


@dataclass(frozen=True)
class NoiseSpec:
    level: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.level >= 0:
            raise InvalidInputError(f"noise level must be >= 0, got {self.level}")


def add_noise(g, spec):
    """White Gaussian node noise rescaled to ``||delta|| = level * ||g||`` (weighted L2)."""
    if spec.level == 0:
        return NodeFunction(g.grid, g.samples.copy())
    gnorm = g.norm()
    if gnorm == 0:
        raise InvalidInputError("relative noise is undefined for zero data")
    rng = np.random.default_rng(spec.seed)
    delta = rng.standard_normal(g.grid.size)
    delta *= spec.level * gnorm / g.grid.norm(delta)
    return NodeFunction(g.grid, g.samples + delta)


def relative_error(f_true, f_rec):
    if f_true.grid is not f_rec.grid and f_true.grid.size != f_rec.grid.size:
        raise InvalidInputError("functions live on different grids")
    denom = f_true.norm()
    if denom == 0:
        raise InvalidInputError("relative error against a zero function")
    return f_true.grid.norm(f_rec.samples - f_true.samples) / denom
