"""Pointwise tensor algebra: bases, decompositions, Weyl contractions."""

from fractions import Fraction

import numpy as np
import pytest

from quadcurv import tensor_core as tc


def brute_force_contraction(W1, W2, pattern):
    """Independent oracle: contract over all 256 index tuples with a plain loop.

    pattern maps the second tensor's slots, e.g. (0, 3, 2, 1) for the
    crossed contraction.
    """
    total = 0.0
    for idx in np.ndindex(4, 4, 4, 4):
        jdx = tuple(idx[p] for p in pattern)
        total += float(W1[idx]) * float(W2[jdx])
    return total


def random_rotation(rng):
    q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_diagonalized_pair(rng, rotate=True):
    """Two Weyl-type tensors sharing an eigenbasis, random trace-free spectra."""
    def triple():
        v = rng.standard_normal(3)
        return tuple(v - v.mean())
    sd1, asd1, sd2, asd2 = triple(), triple(), triple(), triple()
    W1 = tc.weyl_from_eigenvalues(sd1, asd1)
    W2 = tc.weyl_from_eigenvalues(sd2, asd2)
    if rotate:
        Q = random_rotation(rng)
        W1 = tc.rotate_curvature(W1, Q)
        W2 = tc.rotate_curvature(W2, Q)
    lam_sum = sum(a * b for a, b in zip(sd1 + asd1, sd2 + asd2))
    return W1, W2, lam_sum


class TestTwoFormBasis:
    def test_multiplication_table_exact(self):
        basis = tc.TwoFormBasis.standard()
        assert basis.multiplication_residual() == 0

    def test_duality_split(self):
        basis = tc.TwoFormBasis.standard()
        assert basis.duality_signs() == [1, 1, 1, -1, -1, -1]

    def test_orientation_flip_swaps_duality(self):
        basis = tc.TwoFormBasis.standard(orientation=-1)
        assert basis.duality_signs() == [-1, -1, -1, 1, 1, 1]
        assert basis.multiplication_residual() == 0

    def test_norm_convention(self):
        for m in tc.standard_two_forms():
            # |omega|^2 = (1/2) omega_ij omega_ij = 2
            assert 0.5 * np.sum(m * m) == 2

    def test_mixed_product_symmetric_trace_free(self):
        basis = tc.TwoFormBasis.standard()
        h = basis.mul(0, 3)
        assert np.array_equal(h, h.T)
        assert np.trace(h) == 0
        assert np.array_equal(h @ h, np.eye(4, dtype=int))
        assert np.sum(h * h) == 4


class TestDecomposition:
    def test_space_form(self):
        # Ric = 3 g and W = 0 for the unit round metric
        Rm = tc.space_form_curvature(1.0)
        tc.check_alg_curvature(Rm)
        W, Ric, R, S = tc.decompose_curvature(Rm, np.eye(4))
        assert np.allclose(W, 0, atol=1e-14)
        assert np.allclose(Ric, 3 * np.eye(4), atol=1e-14)
        assert R == pytest.approx(12.0)

    def test_fs_point(self):
        Rm = tc.fs_curvature()
        tc.check_alg_curvature(Rm)
        W, Ric, R, S = tc.decompose_curvature(Rm, np.eye(4))
        assert np.allclose(Ric, 6 * np.eye(4), atol=1e-13)
        assert R == pytest.approx(24.0)
        assert np.allclose(S, np.eye(4), atol=1e-13)

    def test_s2xs2_point(self):
        Rm = tc.s2xs2_curvature()
        tc.check_alg_curvature(Rm)
        W, Ric, R, _ = tc.decompose_curvature(Rm, np.eye(4))
        assert np.allclose(Ric, np.eye(4), atol=1e-14)
        assert R == pytest.approx(4.0)

    def test_weyl_totally_trace_free(self):
        rng = np.random.default_rng(7)
        for _ in range(10):
            h = rng.standard_normal((4, 4))
            k = rng.standard_normal((4, 4))
            Rm = tc.kulkarni_nomizu(h + h.T, k + k.T)
            Rm = Rm + tc.rotate_curvature(
                tc.weyl_from_eigenvalues((1.0, 2.0, -3.0), (0.5, 0.5, -1.0)),
                random_rotation(rng))
            W, *_ = tc.decompose_curvature(Rm, np.eye(4))
            trace = np.einsum("ijil->jl", W)
            assert np.max(np.abs(trace)) < 1e-10

    def test_reassembly(self):
        rng = np.random.default_rng(3)
        h = rng.standard_normal((4, 4))
        Rm = tc.kulkarni_nomizu(h + h.T, np.eye(4))
        W, Ric, R, S = tc.decompose_curvature(Rm, np.eye(4))
        assert np.allclose(W + tc.kulkarni_nomizu(S, np.eye(4)), Rm, atol=1e-12)

    def test_degenerate_metric_rejected(self):
        with pytest.raises(ValueError):
            tc.decompose_curvature(tc.fs_curvature(), np.diag([1.0, 1.0, 1.0, 0.0]))
        with pytest.raises(ValueError):
            bad = np.eye(4)
            bad2 = bad.copy()
            bad2[0, 1] = 0.5
            tc.decompose_curvature(tc.fs_curvature(), bad2)

    def test_normal_expansion_pattern(self):
        # the stored layout matches g_ij = delta - (1/3) Rm[i,k,j,l] z^k z^l
        # for the 2-sphere factor: g_11 = 1 - (1/3) z2^2 + ...
        Rm = tc.s2xs2_curvature()
        z = np.array([0.0, 0.3, 0.0, 0.0])
        h2 = -np.einsum("ikjl,k,l->ij", Rm, z, z) / 3.0
        assert h2[0, 0] == pytest.approx(-0.03)
        assert h2[1, 1] == pytest.approx(0.0)


class TestWeylOperator:
    def test_fs_eigenvalues(self):
        W, *_ = tc.decompose_curvature(tc.fs_curvature(), np.eye(4))
        op = tc.weyl_as_operator(W, np.eye(4))
        assert np.allclose(op.sd_eigenvalues, (4, -2, -2), atol=1e-12)
        assert np.allclose(op.asd_eigenvalues, (0, 0, 0), atol=1e-12)
        assert op.off_block_residual < 1e-13

    def test_s2xs2_eigenvalues(self):
        W, *_ = tc.decompose_curvature(tc.s2xs2_curvature(), np.eye(4))
        op = tc.weyl_as_operator(W, np.eye(4))
        assert np.allclose(op.sd_eigenvalues, (2 / 3, -1 / 3, -1 / 3), atol=1e-13)
        assert np.allclose(op.asd_eigenvalues, (2 / 3, -1 / 3, -1 / 3), atol=1e-13)

    def test_zero(self):
        op = tc.weyl_as_operator(np.zeros((4, 4, 4, 4)))
        assert np.allclose(op.sd_eigenvalues, 0) and np.allclose(op.asd_eigenvalues, 0)

    def test_orientation_reversal_swaps_blocks(self):
        W, *_ = tc.decompose_curvature(tc.fs_curvature(), np.eye(4))
        op = tc.weyl_as_operator(W, np.eye(4), orientation=-1)
        assert np.allclose(op.sd_eigenvalues, (0, 0, 0), atol=1e-12)
        assert np.allclose(op.asd_eigenvalues, (4, -2, -2), atol=1e-12)

    def test_reconstruction(self):
        rng = np.random.default_rng(11)
        for _ in range(5):
            W0 = tc.rotate_curvature(
                tc.weyl_from_eigenvalues((2.0, 1.0, -3.0), (0.7, -0.2, -0.5)),
                random_rotation(rng))
            op = tc.weyl_as_operator(W0)
            assert np.max(np.abs(op.reconstruct() - W0)) < 1e-10

    def test_curved_metric_frame(self):
        # conformal rescale leaves the operator eigenvalues scaled by the factor
        W, *_ = tc.decompose_curvature(tc.fs_curvature(), np.eye(4))
        c = 1.7
        op = tc.weyl_as_operator(c * W, c * np.eye(4))
        assert np.allclose(op.sd_eigenvalues, (4 / c, -2 / c, -2 / c), atol=1e-12)

    def test_kahler_norm_identity(self):
        # |W+|^2 = R^2 / 6 for Kaehler-type eigenvalues (R/6, -R/12, -R/12)
        for R in (24.0, 4.0, 10.0):
            Wp = tc.weyl_from_eigenvalues((R / 6, -R / 12, -R / 12), (0, 0, 0))
            assert tc.tensor_norm2(Wp) == pytest.approx(R * R / 6, rel=1e-13)


class TestContractions:
    def test_fs_inner_contractions(self):
        W = tc.weyl_from_eigenvalues((4, -2, -2), (0, 0, 0))
        full, crossed = tc.weyl_inner_contractions(W, W)
        assert full == pytest.approx(96.0)
        assert crossed == pytest.approx(48.0)

    def test_zero(self):
        W = tc.weyl_from_eigenvalues((4, -2, -2), (0, 0, 0))
        Z = np.zeros((4, 4, 4, 4))
        assert tc.weyl_inner_contractions(Z, W) == (0.0, 0.0)
        assert tc.circ_product(Z, W) == 0.0

    def test_crossed_is_half_full(self):
        # Random simultaneously diagonalized pairs, checked against the
        # brute-force 256-term loop oracle.
        rng = np.random.default_rng(19)
        for _ in range(20):
            W1, W2, lam_sum = random_diagonalized_pair(rng)
            full, crossed = tc.weyl_inner_contractions(W1, W2)
            assert abs(full - brute_force_contraction(W1, W2, (0, 1, 2, 3))) < 1e-11
            assert abs(crossed - brute_force_contraction(W1, W2, (0, 3, 2, 1))) < 1e-11
            assert crossed == pytest.approx(2 * lam_sum, abs=1e-11)
            assert crossed == pytest.approx(full / 2, abs=1e-11)

    def test_circ_fs_fs(self):
        W = tc.weyl_from_eigenvalues((4, -2, -2), (0, 0, 0))
        assert tc.circ_product(W, W) == pytest.approx(96.0)

    def test_circ_s2xs2(self):
        W = tc.weyl_from_eigenvalues((2 / 3, -1 / 3, -1 / 3),
                                     (2 / 3, -1 / 3, -1 / 3))
        assert tc.circ_product(W, W) == pytest.approx(16.0 / 3.0)

    def test_circ_exact_rational(self):
        W = tc.weyl_from_eigenvalues((4, -2, -2), (0, 0, 0), exact=True)
        val = tc.circ_product(W, W)
        assert isinstance(val, Fraction) and val == 96
        W2 = tc.weyl_from_eigenvalues(
            (Fraction(2, 3), Fraction(-1, 3), Fraction(-1, 3)),
            (Fraction(2, 3), Fraction(-1, 3), Fraction(-1, 3)), exact=True)
        assert tc.circ_product(W2, W2) == Fraction(16, 3)

    def test_frame_covariance(self):
        rng = np.random.default_rng(23)
        W1, W2, _ = random_diagonalized_pair(rng)
        base = tc.circ_product(W1, W2)
        for _ in range(5):
            Q = random_rotation(rng)
            rotated = tc.circ_product(tc.rotate_curvature(W1, Q),
                                      tc.rotate_curvature(W2, Q))
            assert rotated == pytest.approx(base, abs=1e-10)

    def test_single_flip_kills_fs_product(self):
        # flipping one factor's orientation swaps its duality blocks, so the
        # product of two one-sided tensors vanishes
        W = tc.weyl_from_eigenvalues((4, -2, -2), (0, 0, 0))
        F = np.diag([-1.0, 1.0, 1.0, 1.0])
        assert tc.circ_product(W, tc.rotate_curvature(W, F)) == pytest.approx(0.0, abs=1e-12)
