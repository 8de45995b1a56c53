"""Trigonometric basis on the sphere and the frame built from it.

The basis ``b_{n,k}(lam, theta) = exp(i n lam) sin(k theta) / (pi sqrt(sin theta))``
with ``n + k`` odd is orthonormal in the even part of L2. Its images
``e_{n,k} = R L b_{n,k}`` form a frame; reconstruction from Funk-Radon data
uses the dual of a finite section of that frame.

Everything is carried in spherical-harmonic coefficients up to ``l_max``.
Because ``b_{n,k}`` has the single azimuthal order ``n``, only the harmonics
``Y_l^n`` see it, and the frame matrices are block diagonal in ``n``.
"""

from __future__ import annotations

import functools
import logging
import struct
import warnings
import zlib
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import roots_jacobi

from .funk_radon import p0_table
from .harmonics import (
    HarmonicCoeffs,
    NodeFunction,
    analysis,
    flat_index,
    legendre_orders,
    odd_part_norm,
)
from .sobolev import apply_filtered, apply_L
from .sphere import FormatError, InvalidInputError

log = logging.getLogger(__name__)

DEFAULT_L_MAX = 100
DEFAULT_THRESHOLD = 1e-2
RESIDUAL_WARN = 1e-2
NORM_BOUND = 2.0

# frame bounds of the infinite frame
C1 = np.sqrt(0.5)
C2 = np.sqrt(2.0 / np.pi)


@dataclass(frozen=True)
class StabilityConstants:
    c1: float = C1
    c2: float = C2
    C1: float = 1.0
    C2: float = 1.0

    @property
    def B1(self):
        return self.c1**2 * self.C1

    @property
    def B2(self):
        return self.c2**2 * self.C2


class FrameIndex(NamedTuple):
    n: int
    k: int

    def validate(self):
        if self.k < 1 or (self.n + self.k) % 2 == 0:
            raise InvalidInputError(f"({self.n}, {self.k}) is not in J (need k >= 1, n + k odd)")
        return self


class IndexSetJ:
    """``{(n, k) : |n| <= N, 1 <= k <= N, n + k odd}``, ordered k-major then n ascending."""

    def __init__(self, N):
        if N < 1:
            raise InvalidInputError("N must be positive")
        self.N = int(N)
        self.members = tuple(
            FrameIndex(n, k)
            for k in range(1, N + 1)
            for n in range(-N, N + 1)
            if (n + k) % 2 == 1
        )
        self.n = np.array([m.n for m in self.members])
        self.k = np.array([m.k for m in self.members])
        self._pos = {m: i for i, m in enumerate(self.members)}

    def __len__(self):
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    def __eq__(self, other):
        return isinstance(other, IndexSetJ) and self.members == other.members

    def __repr__(self):
        return f"IndexSetJ(N={self.N}, size={len(self)})"

    def position(self, idx):
        return self._pos[FrameIndex(*idx)]

    def orders(self):
        """Distinct azimuthal orders with their member positions."""
        out = {}
        for i, n in enumerate(self.n):
            out.setdefault(int(n), []).append(i)
        return {n: np.array(p) for n, p in sorted(out.items())}


def basis_b(n, k, lam, theta):
    """Evaluate ``b_{n,k}``; the removable singularity at the poles is set to 0."""
    lam = np.asarray(lam, dtype=float)
    theta = np.asarray(theta, dtype=float)
    st = np.sin(theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.exp(1j * n * lam) * np.sin(k * theta) / (np.pi * np.sqrt(st))
    # sin(pi) evaluates to ~1e-16, so test the poles with a small margin
    return np.where(st > 8 * np.finfo(float).eps, val, 0.0)


@functools.lru_cache(maxsize=512)
def _jacobi_block(n, ks, l_max):
    """Exact ``<b_{n,k}, Y_l^n>`` for ``k`` in `ks`, ``l = 0..l_max``.

    With ``x = cos theta`` the projection reduces to
    ``2 int U_{k-1}(x) (1 - x^2)^(1/4) Pbar_l^|n|(x) dx``. ``Pbar_l^|n|`` carries
    ``(1 - x^2)^(|n|/2)``, so the integrand is a polynomial times
    ``(1 - x^2)^a`` with ``a = 1/4`` (even n) or ``3/4`` (odd n), and
    Gauss-Jacobi quadrature with that weight integrates it exactly.
    """
    an = abs(n)
    a = 0.25 if an % 2 == 0 else 0.75
    ks = np.asarray(ks)
    q = (int(ks.max()) + l_max) // 2 + 2
    x, w = roots_jacobi(q, a, a)
    th = np.arccos(x)
    u = np.sin(np.outer(ks, th)) / np.sin(th)
    out = np.zeros((l_max + 1, ks.size))
    if an <= l_max:
        _, p = next(legendre_orders(l_max, x, orders=[an]))
        out[an:] = (p * (2.0 * w * (1.0 - x * x) ** (0.25 - a))) @ u.T
    if n < 0 and an % 2:
        out = -out
    # b(-xi) = (-1)^(n+k+1) b(xi), so only degrees of that parity survive;
    # the others vanish up to roundoff
    ls = np.arange(l_max + 1)[:, None]
    out[(ls + an + ks[None, :] + 1) % 2 == 1] = 0.0
    out.setflags(write=False)
    return out


class TrigBasis:
    """The retained ``b_{n,k}`` expanded in harmonics up to `l_max`.

    ``blocks[n]`` is a real ``(l_max + 1, len(positions[n]))`` array with
    ``blocks[n][l, c] = <b_j, Y_l^n>`` for the member ``j = positions[n][c]``.
    """

    def __init__(self, index_set, l_max=DEFAULT_L_MAX):
        self.index_set = index_set
        self.l_max = int(l_max)
        self.positions = index_set.orders()
        self.blocks = {
            n: _jacobi_block(n, tuple(int(k) for k in index_set.k[pos]), self.l_max)
            for n, pos in self.positions.items()
        }

    def __len__(self):
        return len(self.index_set)

    def _rows(self, n):
        ls = np.arange(abs(n), self.l_max + 1)
        return ls, flat_index(ls, n)

    def coeffs(self, j):
        """Harmonic coefficients of the j-th retained basis function."""
        x = np.zeros(len(self))
        x[j] = 1.0
        return self.synthesize(x)

    def synthesize(self, x):
        """``sum_j x_j b_j`` as harmonic coefficients."""
        out = np.zeros((self.l_max + 1) ** 2, dtype=complex)
        for n, pos in self.positions.items():
            if abs(n) > self.l_max:
                continue
            ls, rows = self._rows(n)
            out[rows] = self.blocks[n][ls] @ x[pos]
        return HarmonicCoeffs(self.l_max, out)

    def project(self, c):
        """``(<c, b_j>)_j`` for harmonic coefficients `c`."""
        c = c.resized(self.l_max) if c.l_max != self.l_max else c
        out = np.zeros(len(self), dtype=complex)
        for n, pos in self.positions.items():
            if abs(n) > self.l_max:
                continue
            ls, rows = self._rows(n)
            out[pos] = self.blocks[n][ls].T @ c.values[rows]
        return out

    def operator_blocks(self, mult):
        """Per-order matrices ``B_n^T diag(mult) B_n`` of a degree multiplier."""
        return {n: b.T @ (mult[:, None] * b) for n, b in self.blocks.items()}

    def operator_matrix(self, mult):
        """Full ``|J| x |J|`` matrix ``<A b_i, b_j>`` of a real degree multiplier ``A``."""
        out = np.zeros((len(self), len(self)), dtype=complex)
        for n, blk in self.operator_blocks(mult).items():
            pos = self.positions[n]
            out[np.ix_(pos, pos)] = blk
        return out

    def residuals(self):
        """Bessel residual ``1 - sum_l |<b_j, Y_l^n>|^2`` of the truncation, per member."""
        out = np.zeros(len(self))
        for n, pos in self.positions.items():
            out[pos] = 1.0 - np.sum(self.blocks[n] ** 2, axis=0)
        return out

    def sobolev_sq(self, s):
        """Truncated ``||b_j||_{H^s}^2`` per member."""
        wts = (np.arange(self.l_max + 1) + 0.5) ** (2.0 * s)
        out = np.zeros(len(self))
        for n, pos in self.positions.items():
            out[pos] = wts @ self.blocks[n] ** 2
        return out


def b_to_harmonics(idx, l_max, grid=None):
    """Harmonic coefficients of ``b_{n,k}``, even degrees only.

    With a `grid`, the coefficients come from quadrature of the sampled
    function. Without one, they come from the exact projection used by the
    frame tables. ``b_{n,k}`` is not band-limited, so either way the expansion
    drops a tail.
    """
    n, k = FrameIndex(*idx).validate()
    if grid is None:
        blk = _jacobi_block(n, (k,), l_max)[:, 0]
        out = HarmonicCoeffs(l_max)
        if abs(n) <= l_max:
            ls = np.arange(abs(n), l_max + 1)
            out.values[flat_index(ls, n)] = blk[ls]
        return out
    samples = basis_b(n, k, grid.lam, grid.theta)
    c = analysis(NodeFunction(grid, samples), l_max)
    return c.scale_degrees((np.arange(l_max + 1) % 2 == 0).astype(float))


def basis_sobolev_sq(n, k, s, l_max=DEFAULT_L_MAX):
    """Truncated ``||b_{n,k}||_{H^s}^2`` for any ``n`` and ``k >= 1`` (a lower estimate)."""
    if k < 1:
        raise InvalidInputError(f"k must be positive, got {k}")
    blk = _jacobi_block(int(n), (int(k),), int(l_max))[:, 0]
    return float(((np.arange(l_max + 1) + 0.5) ** (2.0 * s)) @ blk ** 2)


def frame_multiplier(l_max):
    """Degree multiplier of ``R L``: ``P_l(0) (l + 1/2)^(1/2)``."""
    return p0_table(l_max) * np.sqrt(np.arange(l_max + 1) + 0.5)


def frame_function_e(idx, l_max, grid=None):
    """Harmonic coefficients of ``e_{n,k} = R L b_{n,k}``."""
    return b_to_harmonics(idx, l_max, grid).scale_degrees(frame_multiplier(l_max))


@dataclass(eq=False)
class FrameTable:
    """Frame functions of a finite section expanded over the retained basis.

    ``C[j, i] = <e_j, b_i>``. For this frame ``C`` is real symmetric and block
    diagonal in the azimuthal order.
    """

    index_set: IndexSetJ
    l_max: int
    C: np.ndarray
    basis: TrigBasis = field(repr=False)
    residuals: np.ndarray = field(repr=False)


def build_frame_table(N, l_max=DEFAULT_L_MAX):
    index_set = IndexSetJ(N)
    basis = TrigBasis(index_set, l_max)
    C = basis.operator_matrix(frame_multiplier(l_max))
    residuals = basis.residuals()
    worst = float(residuals.max())
    if worst > RESIDUAL_WARN:
        j = int(residuals.argmax())
        log.warning(
            "truncation at l_max=%d drops %.3g of ||b%s||^2 (%d of %d members above %g)",
            l_max, worst, tuple(index_set.members[j]),
            int(np.sum(residuals > RESIDUAL_WARN)), len(index_set), RESIDUAL_WARN,
        )
    return FrameTable(index_set, l_max, C, basis, residuals)


def s_matrix(table):
    """Frame operator of the finite section in the b-basis, ``C^H C``."""
    return table.C.conj().T @ table.C


def _block_structure(index_set, A):
    """Position groups such that `A` is block diagonal over them, or None."""
    groups = list(index_set.orders().values())
    mask = np.zeros(A.shape, dtype=bool)
    for pos in groups:
        mask[np.ix_(pos, pos)] = True
    return groups if not np.any(A[~mask]) else None


def tsvd_pinv(A, threshold, sigma_max=None):
    """Pseudo-inverse keeping singular values ``>= threshold * sigma_max``."""
    u, s, vh = np.linalg.svd(A)
    if sigma_max is None:
        sigma_max = s[0] if s.size else 0.0
    keep = s >= threshold * sigma_max
    return (vh[keep].conj().T / s[keep]) @ u[:, keep].conj().T, int(keep.sum())


@dataclass(eq=False)
class DualFrameTable:
    """Dual frame of the finite section: row ``j`` of ``D`` holds ``e~_j`` in the b-basis."""

    index_set: IndexSetJ
    l_max: int
    C: np.ndarray
    D: np.ndarray
    pinv_threshold: float
    rank: int = -1
    basis: TrigBasis | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.pinv_threshold > 0:
            raise InvalidInputError("pinv_threshold must be positive")
        if self.basis is None:
            self.basis = TrigBasis(self.index_set, self.l_max)

    @property
    def N(self):
        return self.index_set.N

    def to_bytes(self):
        return encode_table(self)

    def crc(self):
        return zlib.crc32(self.to_bytes()[:-4])


def dual_frame(table, threshold=DEFAULT_THRESHOLD):
    """Dual frame via a truncated-SVD pseudo-inverse of :func:`s_matrix`.

    Singular values below ``threshold * sigma_max`` are discarded. The finite
    section of this frame has eigenvalues accumulating at zero, so a tiny
    threshold lets near-null directions dominate; the default cuts them.
    """
    if not 0 < threshold < 1:
        raise InvalidInputError("threshold must lie in (0, 1)")
    M = s_matrix(table)
    groups = _block_structure(table.index_set, M)
    if groups is None:
        groups = [np.arange(M.shape[0])]
    sub = [M[np.ix_(g, g)] for g in groups]
    sigma_max = max((np.linalg.norm(b, 2) for b in sub), default=0.0)
    if sigma_max <= np.finfo(float).tiny:
        raise np.linalg.LinAlgError("S-matrix is numerically zero")
    Mp = np.zeros_like(M)
    rank = 0
    for g, blk in zip(groups, sub):
        p, r = tsvd_pinv(blk, threshold, sigma_max)
        Mp[np.ix_(g, g)] = p
        rank += r
    # e~_j = S^+ e_j; with E = C^T (columns = b-coordinates of e_j) the rows of
    # D = (S^+ E)^T are C M^+ (equal to M^+ C^H whenever C is Hermitian)
    D = table.C @ Mp
    return DualFrameTable(
        table.index_set, table.l_max, table.C, D, float(threshold), rank, table.basis
    )


def _even_part(g):
    odd = odd_part_norm(g)
    if odd > 1e-12 * max(g.norm(), 1.0):
        warnings.warn(f"ignoring odd part of data (norm {odd:.3g})", stacklevel=3)
    return g.scale_degrees((np.arange(g.l_max + 1) % 2 == 0).astype(float))


def analysis_coeffs(g, basis):
    """``(<L g, b_j>)_j`` computed from harmonic coefficients."""
    g = _even_part(g)
    return basis.project(apply_L(g))


@dataclass
class Reconstruction:
    coeffs: HarmonicCoeffs
    data_norm: float
    norm_ratio: float


def reconstruct(g, dual, filter=None):
    """``R^+ g = sum_j <L g, b_j> e~_j`` over the retained members.

    With a filter the data enter as ``L U_alpha g`` instead of ``L g``.
    Returns harmonic coefficients up to ``dual.l_max``.
    """
    return reconstruct_audited(g, dual, filter).coeffs


def reconstruct_audited(g, dual, filter=None):
    """:func:`reconstruct` plus the ratio ``||R^+ g|| / ||L g||``."""
    if dual.D.shape != (len(dual.index_set),) * 2:
        raise InvalidInputError("dual table does not match its index set")
    g = _even_part(g.resized(dual.l_max) if g.l_max != dual.l_max else g)
    Lg = apply_L(g) if filter is None else apply_filtered(g, filter)
    a = dual.basis.project(Lg)
    rec = dual.basis.synthesize(dual.D.T @ a)
    lg = Lg.norm()
    ratio = rec.norm() / lg if lg > 0 else 0.0
    return Reconstruction(rec, lg, float(ratio))


class NormBoundError(ArithmeticError):
    pass


def check_norm_bound(ratio, bound=NORM_BOUND):
    if ratio > bound:
        raise NormBoundError(f"||R^+ g|| / ||L g|| = {ratio:.4g} exceeds {bound}")
    return ratio


# ---------------------------------------------------------------------------
# binary table file

MAGIC = b"FRFD"
VERSION = 1


def encode_table(dual):
    members = dual.index_set.members
    head = MAGIC + struct.pack("<IIII", VERSION, dual.index_set.N, dual.l_max, len(members))
    pairs = b"".join(struct.pack("<iI", m.n, m.k) for m in members)
    body = (
        head
        + pairs
        + struct.pack("<d", dual.pinv_threshold)
        + np.ascontiguousarray(dual.C, dtype="<c16").tobytes()
        + np.ascontiguousarray(dual.D, dtype="<c16").tobytes()
    )
    return body + struct.pack("<I", zlib.crc32(body))


def decode_table(buf):
    if len(buf) < 24 or buf[:4] != MAGIC:
        raise FormatError("not a dual-frame table (bad magic)")
    body, (crc,) = buf[:-4], struct.unpack("<I", buf[-4:])
    if zlib.crc32(body) != crc:
        raise FormatError("dual-frame table checksum mismatch")
    version, N, l_max, count = struct.unpack_from("<IIII", buf, 4)
    if version != VERSION:
        raise FormatError(f"unsupported table version {version}")
    off = 20
    nbytes = 16 * count * count
    if len(body) != off + 8 * count + 8 + 2 * nbytes:
        raise FormatError("dual-frame table has wrong length")
    pairs = struct.unpack_from("<" + "iI" * count, buf, off)
    off += 8 * count
    (threshold,) = struct.unpack_from("<d", buf, off)
    off += 8
    if N < 1 or not 0 < threshold < 1:
        raise FormatError(f"invalid table header (N={N}, threshold={threshold})")
    index_set = IndexSetJ(N)
    members = tuple(FrameIndex(pairs[2 * i], pairs[2 * i + 1]) for i in range(count))
    if members != index_set.members:
        raise FormatError("member list does not match the canonical index set")
    C = np.frombuffer(body, dtype="<c16", count=count * count, offset=off).reshape(count, count)
    D = np.frombuffer(body, dtype="<c16", count=count * count, offset=off + nbytes).reshape(
        count, count
    )
    return DualFrameTable(index_set, l_max, C.astype(complex), D.astype(complex), threshold)


def save_table(dual, path):
    data = encode_table(dual)
    with open(path, "wb") as fh:
        fh.write(data)
    return zlib.crc32(data[:-4])


def load_table(path):
    try:
        with open(path, "rb") as fh:
            buf = fh.read()
    except OSError as exc:
        raise FormatError(f"cannot read table {path}: {exc}") from exc
    return decode_table(buf)
