from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp

from splineflow.batch_sparse import (
    STORAGES,
    FlopCounter,
    StackedInput,
    assemble_b,
    assemble_g,
    batched_coeffs,
    fit_flow,
    memory_report,
)
from splineflow.errors import InvalidArgumentError, ShapeError
from splineflow.flow_model import Flow, group_points
from splineflow.spline_kernel import BlendParams, Convention, blend, segment_coeffs

from conftest import PRINTED_T


def scipy_g(M):
    return sp.block_diag([np.array(PRINTED_T, dtype=float)] * M, format="csr")


class TestAssembleG:
    def test_single_block(self):
        assert assemble_g(1, "dense").toarray().tolist() == PRINTED_T

    def test_two_blocks(self):
        G = assemble_g(2)
        assert G.shape == (8, 10)
        assert G.nnz == 22
        assert G.density_exact == Fraction(22, 80)
        assert G.density < 1 / 2

    def test_large_density(self):
        G = assemble_g(10_000)
        assert G.density == pytest.approx(5.5e-5, rel=1e-12)
        assert G.density_exact < Fraction(1, 10_000)

    @pytest.mark.parametrize("M", [1, 2, 3, 17, 100])
    def test_csr_structure_matches_scipy(self, M):
        G = assemble_g(M, "csr")
        ref = scipy_g(M)
        ref.eliminate_zeros()
        ref.sort_indices()
        assert np.array_equal(G.indptr, ref.indptr)
        assert np.array_equal(G.indices, ref.indices)
        assert np.array_equal(G.data, ref.data)

    def test_invalid(self):
        with pytest.raises(InvalidArgumentError):
            assemble_g(0)
        with pytest.raises(InvalidArgumentError):
            assemble_g(2, "coo")


class TestOperatorEquivalence:
    @pytest.mark.parametrize("M", [1, 2, 7, 32])
    def test_storages_agree(self, M, rng):
        x = rng.normal(size=5 * M)
        ref = scipy_g(M) @ x
        for storage in STORAGES:
            np.testing.assert_allclose(assemble_g(M, storage) @ x, ref, rtol=0, atol=1e-12)

    def test_shape_error(self):
        with pytest.raises(ShapeError):
            assemble_g(3).matvec(np.zeros(14))


class TestAssembleB:
    def test_bezier_a(self):
        (b,) = assemble_b([[[0.0], [1.0], [2.0], [3.0]]], 0, 1, Convention.BEZIER_A)
        assert b.values.tolist() == [1, 0, 0, 3, 0]

    def test_paper_literal(self):
        (b,) = assemble_b([[[0.0], [1.0], [2.0], [3.0]]], 0, 1, "paper_literal")
        assert b.values.tolist() == [1, 0, 0, 3, 1]

    def test_repeated(self):
        traj = [[0.0], [1.0], [2.0], [3.0]]
        (b,) = assemble_b([traj, traj], 0, 1)
        assert b.values.tolist() == [1, 0, 0, 3, 0] * 2

    def test_per_dimension(self):
        flow = Flow(np.random.default_rng(0).normal(size=(3, 7, 3)))
        bs = assemble_b(flow, 1, 2)
        assert [b.dim for b in bs] == [0, 1, 2]
        assert all(len(b.values) == 15 for b in bs)

    def test_ragged(self):
        with pytest.raises(ShapeError):
            assemble_b([np.zeros((4, 2)), np.zeros((7, 2))], 0, 1)

    def test_bad_indices(self):
        flow = Flow(np.zeros((1, 7, 3)))
        with pytest.raises(InvalidArgumentError):
            assemble_b(flow, 2, 1)
        with pytest.raises(InvalidArgumentError):
            assemble_b(flow, 0, 4)


class TestBatchedCoeffs:
    def test_single(self):
        G = assemble_g(1)
        b = StackedInput(np.array([1.0, 0, 0, 3, 0]), 0, 1, 0, Convention.BEZIER_A)
        assert batched_coeffs(G, b).values.tolist() == [[-2, 0, 3, 0]]

    def test_identical_rows(self):
        traj = [[0.0, 1.0], [1.0, 5.0], [2.0, 2.0], [3.0, -1.0]]
        for b in assemble_b([traj, traj], 0, 2):
            plane = batched_coeffs(assemble_g(2), b)
            assert np.array_equal(plane.values[0], plane.values[1])

    @pytest.mark.parametrize("conv", list(Convention))
    def test_loop_oracle(self, conv, rng):
        M = 3
        pts = rng.normal(size=(M, 7, 3)) * 10
        flow = Flow(pts)
        for storage in STORAGES:
            G = assemble_g(M, storage)
            for g in range(2):
                for k in (1, 2, 3):
                    for b in assemble_b(flow, g, k, conv):
                        plane = batched_coeffs(G, b)
                        for i in range(M):
                            grp = group_points(pts[i])[g]
                            ref = segment_coeffs(grp, k, conv).coeffs[:, b.dim]
                            np.testing.assert_allclose(plane.values[i], ref, rtol=0, atol=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            batched_coeffs(assemble_g(2), np.zeros(5))

    def test_flops(self):
        c = FlopCounter()
        batched_coeffs(assemble_g(4), np.zeros(20), c)
        assert c["coeff_sparse_actual"] == 2 * 44


class TestFitFlow:
    @pytest.mark.parametrize("storage", STORAGES)
    def test_matches_blend_loop(self, storage, rng):
        pts = rng.normal(size=(4, 10, 3))
        fit = fit_flow(Flow(pts), storage=storage, params=BlendParams(0.3, 0.7))
        for i in range(4):
            for g, grp in enumerate(group_points(pts[i])):
                for k in (1, 2, 3):
                    v = blend(grp, k, segment_coeffs(grp, k), BlendParams(0.3, 0.7))
                    np.testing.assert_allclose(fit.coeffs[i, g, k - 1].T, v.coeffs, atol=1e-12)

    def test_raw_u(self, rng):
        pts = rng.normal(size=(2, 4, 3))
        fit = fit_flow(Flow(pts), curve="u")
        u = segment_coeffs(group_points(pts[1])[0], 3)
        np.testing.assert_allclose(fit.coeffs[1, 0, 2].T, u.coeffs, atol=1e-12)

    def test_storages_bit_compatible(self, rng):
        flow = Flow(rng.normal(size=(5, 7, 3)))
        base = fit_flow(flow).coeffs
        for storage in ("csr", "dense"):
            np.testing.assert_allclose(fit_flow(flow, storage=storage).coeffs, base, rtol=0, atol=1e-12)

    def test_plane_accessor(self, rng):
        fit = fit_flow(Flow(rng.normal(size=(2, 7, 3))))
        planes = list(fit.planes())
        assert len(planes) == 2 * 3 * 3
        assert planes[0].values.shape == (2, 4)

    def test_counter(self):
        c = FlopCounter()
        fit_flow(Flow(np.zeros((5, 10, 3))), counter=c)
        assert c["coeff_dense_theoretic"] == 40 * 25 * 3
        assert c["coeff_sparse_actual"] == 2 * 11 * 5 * 3 * 3 * 3


class TestMemoryReport:
    def test_single(self):
        assert memory_report(1)["dense"] == 160

    def test_paper_scale(self):
        r = memory_report(10_000)
        assert r["dense"] == 16_000_000_000
        # "theoric O(10^6) KB": 1.6e7 KB
        assert 6 <= np.log10(r["dense"] / 1000) < 8
        assert r["csr"] == 110_000 * 12 + 40_001 * 8
        assert r["constant_block"] == 96
        assert r["constant_block"] / r["dense"] < 1e-7

    def test_dense_over_csr_linear(self):
        Ms = np.array([100, 1000, 10_000])
        ratio = np.array([memory_report(int(m))["dense"] / memory_report(int(m))["csr"] for m in Ms])
        slope, intercept = np.polyfit(Ms, ratio, 1)
        fitted = slope * Ms + intercept
        assert np.all(np.abs(ratio - fitted) <= 0.2 * fitted)
