"""The half-order operator ``L = (E E*)^(-1/2)`` and regularizing filters.

Everything here is diagonal in the spherical-harmonic basis: degree ``l``
is multiplied by a function of ``sigma_l = (l + 1/2)^(-1/2)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere import InvalidInputError

FILTER_KINDS = ("exact_inverse", "tikhonov")


def sigma(l_max):
    """``sigma_l = (l + 1/2)^(-1/2)`` for ``l = 0..l_max``."""
    return (np.arange(l_max + 1) + 0.5) ** -0.5


def apply_L(c):
    return c.scale_degrees((np.arange(c.l_max + 1) + 0.5) ** 0.5)


def apply_L_inv(c):
    return c.scale_degrees(sigma(c.l_max))


@dataclass(frozen=True)
class FilterSpec:
    """Filter ``h_alpha`` applied to ``s = sigma_l^2``.

    ``tikhonov``: ``h(s) = 1 / (alpha + s)``; ``exact_inverse``: ``h(s) = 1 / sqrt(s)``,
    which turns the filtered operator into ``L^-1`` (a pure smoothing).
    """

    kind: str = "tikhonov"
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in FILTER_KINDS:
            raise InvalidInputError(f"unknown filter kind {self.kind!r}")
        if not self.alpha >= 0:
            raise InvalidInputError(f"filter alpha must be >= 0, got {self.alpha}")

    def multiplier(self, l_max):
        """Per-degree factor ``sigma_l h(sigma_l^2)``."""
        sig = sigma(l_max)
        if self.kind == "exact_inverse":
            return np.ones(l_max + 1)
        return sig / (self.alpha + sig**2)

    def label(self):
        if self.kind == "exact_inverse":
            return "exact"
        return f"tikhonov(alpha={self.alpha:g})"


def apply_filtered(c, spec):
    """``L U_alpha g``: scale degree ``l`` by ``sigma_l h_alpha(sigma_l^2)``."""
    return c.scale_degrees(spec.multiplier(c.l_max))


def tikhonov_bound(alpha):
    """Upper bound ``1 / (2 sqrt(alpha))`` on the Tikhonov multiplier."""
    return 0.5 / np.sqrt(alpha)
