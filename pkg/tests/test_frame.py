import logging
import struct
import zlib

import numpy as np
import pytest
from numpy.testing import assert_allclose

from funkframe.frame import (
    DualFrameTable,
    FrameIndex,
    IndexSetJ,
    NormBoundError,
    StabilityConstants,
    TrigBasis,
    analysis_coeffs,
    b_to_harmonics,
    basis_b,
    build_frame_table,
    check_norm_bound,
    decode_table,
    dual_frame,
    encode_table,
    frame_function_e,
    frame_multiplier,
    load_table,
    reconstruct,
    reconstruct_audited,
    s_matrix,
    save_table,
)
from funkframe.funk_radon import fr_spectral
from funkframe.harmonics import HarmonicCoeffs, NodeFunction, analysis, synthesis
from funkframe.sobolev import FilterSpec, apply_L
from funkframe.sphere import FormatError, InvalidInputError, grid_for_degree, product_grid


@pytest.fixture(autouse=True)
def quiet_truncation(caplog):
    caplog.set_level(logging.ERROR, logger="funkframe.frame")


@pytest.fixture(scope="module")
def dual25():
    return dual_frame(build_frame_table(25, 100))


def test_index_set_membership_and_order():
    J = IndexSetJ(3)
    assert all((m.n + m.k) % 2 == 1 and abs(m.n) <= 3 and 1 <= m.k <= 3 for m in J)
    assert J.members[:4] == ((-2, 1), (0, 1), (2, 1), (-3, 2))
    expect = {(n, k) for n in range(-3, 4) for k in range(1, 4) if (n + k) % 2}
    assert set(J) == expect and len(J) == len(expect)
    assert [len(IndexSetJ(N)) for N in (1, 10, 25, 40)] == [1, 105, 637, 1620]


def test_index_validation():
    with pytest.raises(InvalidInputError):
        FrameIndex(0, 2).validate()
    with pytest.raises(InvalidInputError):
        FrameIndex(1, 0).validate()
    with pytest.raises(InvalidInputError):
        IndexSetJ(0)


def test_stability_constants():
    s = StabilityConstants()
    assert_allclose([s.B1, s.B2], [0.5, 2 / np.pi])


def test_basis_b_values():
    assert_allclose(basis_b(0, 1, 0.0, np.pi / 2), 1 / np.pi)
    assert basis_b(3, 2, 1.0, 0.0) == 0 and basis_b(3, 2, 1.0, np.pi) == 0


@pytest.mark.parametrize("n,k", [(0, 1), (1, 2), (-3, 4), (2, 5), (4, 4)])
def test_basis_b_antipodal_symmetry(n, k):
    rng = np.random.default_rng(n + 10 * k)
    lam = rng.uniform(0, 2 * np.pi, 100)
    theta = rng.uniform(0.01, np.pi - 0.01, 100)
    b = basis_b(n, k, lam, theta)
    ba = basis_b(n, k, lam + np.pi, np.pi - theta)
    assert_allclose(ba, (-1) ** (n + k + 1) * b, atol=1e-13)


def test_basis_b01_unit_norm():
    g = product_grid(800, 4)
    b = basis_b(0, 1, g.lam, g.theta)
    assert abs(g.norm(b) - 1) < 1e-8


def test_exact_projection_matches_sampled_analysis():
    # b is not band-limited, but the sampled analysis converges to the exact projection
    g = product_grid(600, 64)
    for idx in [(0, 1), (1, 2), (-2, 3), (3, 4)]:
        exact = b_to_harmonics(idx, 20)
        sampled = b_to_harmonics(idx, 20, g)
        assert np.max(np.abs(exact.values - sampled.values)) < 1e-5


def test_b_to_harmonics_parity_and_bessel():
    for idx in [(0, 1), (5, 2), (-4, 5), (1, 10)]:
        c = b_to_harmonics(idx, 60)
        assert not np.any(c.values[c.degrees() % 2 == 1])
        assert c.norm() ** 2 <= 1 + 1e-6
    assert b_to_harmonics((0, 1), 100).norm() ** 2 >= 0.99


def test_b_to_harmonics_sampled_odd_zero():
    g = grid_for_degree(20)
    c = b_to_harmonics((1, 2), 20, g)
    assert np.max(np.abs(c.values[c.degrees() % 2 == 1])) < 1e-8


def test_b_to_harmonics_rejects_outside_J():
    with pytest.raises(InvalidInputError):
        b_to_harmonics((1, 1), 10)


def test_trig_basis_consistency():
    basis = TrigBasis(IndexSetJ(4), 30)
    for j, idx in enumerate(basis.index_set):
        assert_allclose(basis.coeffs(j).values, b_to_harmonics(idx, 30).values, atol=1e-15)
    x = np.random.default_rng(0).standard_normal(len(basis))
    c = basis.synthesize(x)
    # project is the adjoint of synthesize
    y = np.random.default_rng(1).standard_normal(len(basis))
    assert_allclose(np.vdot(basis.synthesize(y).values, c.values), np.dot(y, basis.project(c)), rtol=1e-12)


def test_frame_multiplier():
    m = frame_multiplier(200)
    assert not np.any(m[1::2])
    assert np.all(np.abs(m[::2]) >= np.sqrt(0.5) - 1e-15)
    assert np.all(np.abs(m[::2]) <= np.sqrt(2 / np.pi))


def test_frame_function_e():
    for idx in [(0, 1), (3, 2), (-1, 6)]:
        b = b_to_harmonics(idx, 60)
        e = frame_function_e(idx, 60)
        assert not np.any(e.values[e.degrees() % 2 == 1])
        assert_allclose(e.values, fr_spectral(apply_L(b)).values, rtol=1e-14)
        assert e.norm() <= np.sqrt(2 / np.pi) * b.norm() + 1e-15


def test_s_matrix_hermitian_and_bounded():
    for N in (1, 5, 10):
        M = s_matrix(build_frame_table(N, 60))
        assert np.max(np.abs(M - M.conj().T)) < 1e-12
        ev = np.linalg.eigvalsh(M)
        assert ev.min() > -1e-12 and ev.max() <= 2 / np.pi + 0.05


def test_n1_case():
    tab = build_frame_table(1, 100)
    e = frame_function_e((0, 1), 100)
    M = s_matrix(tab)
    assert M.shape == (1, 1)
    # e_{0,1} is expanded over the single retained b, so M = |<e, b>|^2
    b = b_to_harmonics((0, 1), 100)
    assert_allclose(M[0, 0], abs(e.inner(b)) ** 2, rtol=1e-12)
    assert M[0, 0] > 0
    dual = dual_frame(tab)
    assert_allclose(dual.D[0, 0], 1 / tab.C[0, 0], rtol=1e-12)


def test_dual_of_orthonormal_frame_is_itself():
    tab = build_frame_table(5, 40)
    n = len(tab.index_set)
    tab.C = np.eye(n, dtype=complex)
    assert_allclose(dual_frame(tab).D, np.eye(n), atol=1e-14)


def test_dual_frame_duality():
    tab = build_frame_table(10, 60)
    dual = dual_frame(tab)
    w, V = np.linalg.eigh(s_matrix(tab))
    keep = w >= 0.1 * w.max()
    x = V[:, keep] @ np.random.default_rng(2).standard_normal(int(keep.sum()))
    # sum_j <x, e_j> e~_j, with <x, e_j> = conj(C[j]) . x
    y = dual.D.T @ (tab.C.conj() @ x)
    assert np.linalg.norm(y - x) < 1e-6 * np.linalg.norm(x)


def test_dual_frame_threshold_validation():
    tab = build_frame_table(2, 20)
    for t in (0.0, 1.0, -1e-3):
        with pytest.raises(InvalidInputError):
            dual_frame(tab, t)
    tab.C = np.zeros_like(tab.C)
    with pytest.raises(np.linalg.LinAlgError):
        dual_frame(tab)


def test_prop3_identity_low_members():
    # sum_j <b_i, e_j> b_j is the projection of L R b_i onto the retained span;
    # the gap is the finite-section tail and shrinks as N grows
    gaps = []
    for N in (10, 25, 40):
        tab = build_frame_table(N, 100)
        row = []
        for idx in [(0, 1), (1, 2), (-2, 3)]:
            i = tab.index_set.position(idx)
            e = frame_function_e(idx, 100)
            gap = (tab.basis.synthesize(tab.C[:, i]) - e).norm()
            tail = np.sqrt(e.norm() ** 2 - np.sum(np.abs(tab.C[:, i]) ** 2))
            assert abs(gap - tail) < 1e-3
            row.append(gap)
        gaps.append(row)
    gaps = np.array(gaps)
    assert np.all(np.diff(gaps, axis=0) < 0)
    assert gaps[-1].max() < 0.02


def test_analysis_coeffs():
    basis = TrigBasis(IndexSetJ(6), 40)
    assert not np.any(analysis_coeffs(HarmonicCoeffs(40), basis))
    rng = np.random.default_rng(3)
    g1 = fr_spectral(HarmonicCoeffs(40, rng.standard_normal(41 ** 2)))
    g2 = fr_spectral(HarmonicCoeffs(40, rng.standard_normal(41 ** 2)))
    assert_allclose(
        analysis_coeffs(g1 + g2, basis),
        analysis_coeffs(g1, basis) + analysis_coeffs(g2, basis),
        atol=1e-12,
    )
    # entry i for g = e_{0,1} unwinds to <L e_{0,1}, b_i>, a sum over degrees
    e = frame_function_e((0, 1), 40)
    a = analysis_coeffs(e, basis)
    for i in range(len(basis)):
        expect = np.vdot(basis.coeffs(i).values, apply_L(e).values)
        assert_allclose(a[i], expect, atol=1e-14)


def test_analysis_coeffs_warns_on_odd_part():
    basis = TrigBasis(IndexSetJ(3), 10)
    with pytest.warns(UserWarning):
        analysis_coeffs(HarmonicCoeffs.unit(10, 1, 0), basis)


def test_reconstruct_zero(dual25):
    assert not np.any(reconstruct(HarmonicCoeffs(100), dual25).values)


def test_reconstruct_top_subspace(dual25):
    # f in the well-conditioned span is reproduced from its exact data
    M = s_matrix(dual25)
    w, V = np.linalg.eigh(M)
    keep = w >= 0.5 * w.max()
    x = V[:, keep] @ np.random.default_rng(4).standard_normal(int(keep.sum()))
    f = dual25.basis.synthesize(x)
    rec = reconstruct(fr_spectral(f), dual25)
    assert (rec - f).norm() / f.norm() < 1e-3
    assert not np.any(rec.values[rec.degrees() % 2 == 1])


def test_reconstruct_norm_bound(dual25):
    rng = np.random.default_rng(5)
    for _ in range(5):
        g = HarmonicCoeffs(100, rng.standard_normal(101 ** 2))
        g = g.scale_degrees((np.arange(101) % 2 == 0).astype(float))
        for spec in (None, FilterSpec("tikhonov", 0.05), FilterSpec("exact_inverse")):
            r = reconstruct_audited(g, dual25, spec) if spec else reconstruct_audited(g, dual25)
            assert check_norm_bound(r.norm_ratio) <= 2


def test_check_norm_bound_raises():
    with pytest.raises(NormBoundError):
        check_norm_bound(2.01)


def test_reconstruct_dimension_mismatch(dual25):
    bad = DualFrameTable(IndexSetJ(2), 20, np.eye(3), np.eye(3), 1e-2)
    with pytest.raises(InvalidInputError):
        reconstruct(HarmonicCoeffs(20), bad)


def test_table_roundtrip(tmp_path):
    dual = dual_frame(build_frame_table(4, 30), 1e-3)
    path = tmp_path / "t.frfd"
    crc = save_table(dual, path)
    back = load_table(path)
    assert np.array_equal(back.C, dual.C) and np.array_equal(back.D, dual.D)
    assert back.l_max == 30 and back.N == 4 and back.pinv_threshold == 1e-3
    assert back.crc() == crc == dual.crc()
    # rerun is byte-identical
    assert encode_table(dual_frame(build_frame_table(4, 30), 1e-3)) == path.read_bytes()


def test_table_header_layout():
    buf = encode_table(dual_frame(build_frame_table(2, 10)))
    assert buf[:4] == b"FRFD"
    assert struct.unpack_from("<IIII", buf, 4) == (1, 2, 10, 5)
    assert struct.unpack_from("<iI", buf, 20) == (-2, 1)
    assert struct.unpack("<I", buf[-4:])[0] == zlib.crc32(buf[:-4])


def _recrc(body):
    return body + struct.pack("<I", zlib.crc32(body))


@pytest.mark.parametrize("kind", ["magic", "flip", "truncate", "version", "members", "empty"])
def test_table_corruption(kind):
    buf = bytearray(encode_table(dual_frame(build_frame_table(3, 12))))
    if kind == "magic":
        buf[:4] = b"XXXX"
    elif kind == "flip":
        buf[60] ^= 0x01
    elif kind == "truncate":
        buf = buf[:-20]
    elif kind == "version":
        buf = bytearray(_recrc(bytes(buf[:4]) + struct.pack("<I", 9) + bytes(buf[8:-4])))
    elif kind == "members":
        body = bytearray(buf[:-4])
        struct.pack_into("<iI", body, 20, 0, 2)
        buf = bytearray(_recrc(bytes(body)))
    else:
        buf = bytearray()
    with pytest.raises(FormatError):
        decode_table(bytes(buf))


def test_load_table_missing(tmp_path):
    with pytest.raises(FormatError):
        load_table(tmp_path / "nope.frfd")


def test_reconstruct_node_pipeline_small():
    # end to end on nodes with a band-limited even target
    l_max = 30
    g = grid_for_degree(l_max)
    dual = dual_frame(build_frame_table(12, l_max))
    w, V = np.linalg.eigh(s_matrix(dual))
    x = V[:, w >= 0.5 * w.max()] @ np.ones(int(np.sum(w >= 0.5 * w.max())))
    f = dual.basis.synthesize(x)
    data = analysis(NodeFunction(g, synthesis(fr_spectral(f), g).samples), l_max)
    rec = reconstruct(data, dual)
    assert (rec - f).norm() < 1e-6 * f.norm()
