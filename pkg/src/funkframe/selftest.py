"""Reduced-size invariant checks run by ``funkframe selftest``."""

from __future__ import annotations

import logging
import os
import tempfile
import time
import traceback
from fractions import Fraction

import numpy as np

from . import frame, funk_radon, harmonics, phantom, sobolev, sphere

CHECKS = []


def check(fn):
    CHECKS.append(fn)
    return fn


def _rng():
    return np.random.default_rng(20240601)


def _random_coeffs(l_max, rng, even=False):
    c = harmonics.HarmonicCoeffs(
        l_max, rng.standard_normal(harmonics.n_coeffs(l_max)) + 1j * rng.standard_normal(harmonics.n_coeffs(l_max))
    )
    return harmonics.even_projection(c) if even else c


@check
def grid_weights():
    for g in (sphere.product_grid(1, 1), sphere.product_grid(7, 12), sphere.grid_for_degree(20)):
        assert abs(g.weights.sum() - 4 * np.pi) < 1e-10
        assert np.all(g.weights > 0)


@check
def coordinate_roundtrip():
    rng = _rng()
    p = rng.standard_normal((200, 3))
    p /= np.linalg.norm(p, axis=1, keepdims=True)
    lam, theta = sphere.cart_to_sph(p)
    assert np.max(np.abs(sphere.sph_to_cart(lam, theta) - p)) < 1e-12
    lam2, theta2 = sphere.antipode(lam, theta)
    assert np.max(np.abs(sphere.sph_to_cart(lam2, theta2) + p)) < 1e-12


@check
def harmonic_orthonormality():
    g = sphere.grid_for_degree(10)
    Y = harmonics.ylm_table(10, g.lam, g.theta)
    G = (Y * g.weights) @ Y.conj().T
    assert np.max(np.abs(G - np.eye(len(Y)))) < 1e-10


@check
def analysis_synthesis_roundtrip():
    c = _random_coeffs(15, _rng())
    g = sphere.grid_for_degree(15)
    f = harmonics.synthesis(c, g)
    assert np.max(np.abs(harmonics.analysis(f, 15).values - c.values)) < 1e-10
    assert abs(g.norm(f.samples) ** 2 - c.norm() ** 2) < 1e-9 * c.norm() ** 2


@check
def funk_radon_eigenvalues():
    g = sphere.grid_for_degree(10)
    D = funk_radon.fr_direct_values(funk_radon.harmonic_table_function(10), g, 512)
    Y = harmonics.ylm_table(10, g.lam, g.theta)
    deg = harmonics.degree_of_index(10)
    expect = funk_radon.p0_table(10)[deg, None] * Y
    assert np.max(np.abs(D - expect)) < 1e-10


@check
def funk_radon_evenness():
    g = sphere.grid_for_degree(12)
    f = funk_radon.fr_direct_coeffs(_random_coeffs(8, _rng()), g, 256)
    assert f.evenness_defect() < 1e-12


@check
def stability_chain():
    prev = Fraction(0)
    upper = Fraction(2) / Fraction("3.1415926536")
    for l in range(0, 401, 2):
        v = (l + Fraction(1, 2)) * funk_radon.legendre_p0_exact(l) ** 2
        assert Fraction(1, 2) <= v < upper and v >= prev
        prev = v


@check
def self_adjointness():
    rng = _rng()
    f, g = _random_coeffs(20, rng, even=True), _random_coeffs(20, rng, even=True)
    lhs = funk_radon.fr_spectral(f).inner(g)
    rhs = f.inner(funk_radon.fr_spectral(g))
    assert abs(lhs - rhs) < 1e-10 * f.norm() * g.norm()


@check
def operator_L_commutes():
    c = _random_coeffs(20, _rng())
    a = sobolev.apply_L(funk_radon.fr_spectral(c)).values
    b = funk_radon.fr_spectral(sobolev.apply_L(c)).values
    assert np.max(np.abs(a - b)) < 1e-14 * c.norm()
    back = sobolev.apply_L(sobolev.apply_L_inv(c)).values
    assert np.max(np.abs(back - c.values)) < 1e-13 * c.norm()


@check
def tikhonov_bound():
    for alpha in (1e-3, 1e-2, 0.1, 1.0):
        m = sobolev.FilterSpec("tikhonov", alpha).multiplier(400)
        assert np.all(m <= sobolev.tikhonov_bound(alpha) * (1 + 1e-12))


@check
def basis_orthonormality():
    g = sphere.product_grid(400, 32)
    idx = list(frame.IndexSetJ(3))
    B = np.array([frame.basis_b(n, k, g.lam, g.theta) for n, k in idx])
    G = (B * g.weights) @ B.conj().T
    assert np.max(np.abs(G - np.eye(len(idx)))) < 1e-6


@check
def frame_upper_bound():
    tab = frame.build_frame_table(5, 20)
    ev = np.linalg.eigvalsh(frame.s_matrix(tab))
    assert ev.max() <= 2 / np.pi + 0.05


@check
def dual_frame_duality():
    tab = frame.build_frame_table(6, 20)
    dual = frame.dual_frame(tab)
    M = frame.s_matrix(tab)
    w, V = np.linalg.eigh(M)
    x = V[:, w > 0.1 * w.max()] @ _rng().standard_normal(int(np.sum(w > 0.1 * w.max())))
    # sum_j <x, e_j> e~_j with <x, e_j> = conj(C) x
    y = dual.D.T @ (tab.C.conj() @ x)
    assert np.linalg.norm(y - x) < 1e-6 * np.linalg.norm(x)


@check
def reconstruction_small():
    l_max = 20
    g = sphere.grid_for_degree(l_max)
    p = phantom.default_phantom()
    dual = frame.dual_frame(frame.build_frame_table(10, l_max))
    data = harmonics.analysis(phantom.forward_data(p, g, 256), l_max)
    rec = frame.reconstruct_audited(data, dual)
    frame.check_norm_bound(rec.norm_ratio)
    err = phantom.relative_error(phantom.sample(p, g), harmonics.synthesis(rec.coeffs, g))
    assert err < 0.2, err


@check
def noise_reproducibility():
    g = sphere.grid_for_degree(8)
    f = harmonics.NodeFunction(g, np.cos(g.theta) ** 2)
    a = phantom.add_noise(f, phantom.NoiseSpec(0.2, 7))
    b = phantom.add_noise(f, phantom.NoiseSpec(0.2, 7))
    assert np.array_equal(a.samples, b.samples)
    assert abs(g.norm(a.samples - f.samples) / f.norm() - 0.2) < 1e-12


@check
def table_roundtrip_and_corruption():
    dual = frame.dual_frame(frame.build_frame_table(3, 12))
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "t.frfd")
        frame.save_table(dual, path)
        back = frame.load_table(path)
        assert np.array_equal(back.D, dual.D) and np.array_equal(back.C, dual.C)
        with open(path, "r+b") as fh:
            fh.seek(40)
            byte = fh.read(1)
            fh.seek(40)
            fh.write(bytes([byte[0] ^ 0xFF]))
        try:
            frame.load_table(path)
        except sphere.FormatError:
            pass
        else:
            raise AssertionError("corrupted table loaded without error")


def run(checks=None, out=print):
    """Run checks; returns ``(passed, failed_names)``."""
    checks = CHECKS if checks is None else checks
    failed = []
    # small l_max truncates high-k members on purpose; the warnings are expected here
    logger = logging.getLogger("funkframe.frame")
    level = logger.level
    logger.setLevel(logging.ERROR)
    t_all = time.perf_counter()
    for fn in checks:
        t0 = time.perf_counter()
        try:
            fn()
        except Exception as exc:  # noqa: BLE001 - every failure is reported by name
            failed.append(fn.__name__)
            out(f"FAIL {fn.__name__}: {type(exc).__name__}: {exc}")
            out(traceback.format_exc(limit=2).rstrip())
        else:
            out(f"pass {fn.__name__} ({time.perf_counter() - t0:.2f}s)")
    logger.setLevel(level)
    passed = len(checks) - len(failed)
    out(f"{passed}/{len(checks)} checks passed in {time.perf_counter() - t_all:.1f}s")
    return passed, failed
