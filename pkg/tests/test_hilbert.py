import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from wongzakai.errors import StructuralError
from wongzakai.hilbert import HVector, SpaceDescriptor, graph_norm, norm
from wongzakai.semigroup import GridShiftSemigroup, SpectralSemigroup

finite = st.floats(-1e3, 1e3, allow_nan=False)


def spectral(d=3):
    return SpaceDescriptor.spectral(-np.arange(1, d + 1, dtype=float) ** 2)


class TestSpaceDescriptor:
    def test_spectral_needs_matching_eigenvalues(self):
        with pytest.raises(StructuralError):
            SpaceDescriptor("spectral", 3, eigenvalues=(1.0, 2.0))

    def test_grid_must_increase(self):
        with pytest.raises(StructuralError):
            SpaceDescriptor.weighted_grid([0.0, 1.0, 1.0], 0.5)

    def test_grid_beta_positive(self):
        with pytest.raises(StructuralError):
            SpaceDescriptor.weighted_grid([0.0, 1.0], 0.0)

    def test_product_dim(self):
        p = SpaceDescriptor.product(spectral(3), SpaceDescriptor.spectral([0.0]))
        assert p.dim == 4
        assert p.block_slices == (slice(0, 3), slice(3, 4))

    def test_equal_descriptors_compare_equal(self):
        assert spectral(4) == spectral(4)
        assert spectral(4) != spectral(5)


class TestHVector:
    def test_rejects_nonfinite(self):
        with pytest.raises(StructuralError):
            HVector(spectral(2), [1.0, np.nan])

    def test_rejects_wrong_length(self):
        with pytest.raises(StructuralError):
            HVector(spectral(2), [1.0, 2.0, 3.0])

    def test_coefficients_read_only(self):
        v = HVector(spectral(2), [1.0, 2.0])
        with pytest.raises(ValueError):
            v.coeffs[0] = 5.0

    def test_arithmetic(self):
        s = spectral(2)
        u, v = HVector(s, [1.0, 2.0]), HVector(s, [3.0, -1.0])
        np.testing.assert_array_equal((u + v).coeffs, [4.0, 1.0])
        np.testing.assert_array_equal((u - v).coeffs, [-2.0, 3.0])
        np.testing.assert_array_equal((2 * u).coeffs, [2.0, 4.0])
        np.testing.assert_array_equal((-u).coeffs, [-1.0, -2.0])

    def test_arithmetic_across_spaces_rejected(self):
        with pytest.raises(StructuralError):
            HVector(spectral(2), [1.0, 2.0]) + HVector(SpaceDescriptor.spectral([0.0, 0.0]), [1.0, 2.0])

    def test_block(self):
        p = SpaceDescriptor.product(spectral(2), SpaceDescriptor.spectral([0.0]))
        v = HVector(p, [1.0, 2.0, 3.0])
        np.testing.assert_array_equal(v.block(1).coeffs, [3.0])
        assert v.block(0).space == spectral(2)


class TestNorm:
    def test_zero(self):
        assert norm(HVector.zeros(spectral(5))) == 0.0

    def test_one_hot(self):
        assert norm(HVector(spectral(3), [0.0, 1.0, 0.0])) == 1.0

    def test_three_four_five(self):
        assert norm(HVector(SpaceDescriptor.spectral([0.0, 0.0]), [3.0, 4.0])) == 5.0

    def test_product_is_root_sum_of_squares(self):
        g = SpaceDescriptor.weighted_grid(np.linspace(0, 2, 9), 0.5)
        s = spectral(2)
        p = SpaceDescriptor.product(g, s)
        a = np.linspace(0.1, 0.5, 9)
        b = np.array([3.0, 4.0])
        expected = np.hypot(norm(HVector(g, a)), 5.0)
        assert norm(HVector(p, np.concatenate([a, b]))) == pytest.approx(expected, rel=1e-14)

    def test_weighted_grid_constant_curve(self):
        g = SpaceDescriptor.weighted_grid(np.linspace(0, 10, 21), 1.0)
        assert norm(HVector(g, np.full(21, -0.7))) == pytest.approx(0.7, rel=1e-15)

    def test_weighted_grid_linear_curve(self):
        # h(x) = 1 + 2x on [0, 1], beta = 1: |h|^2 = 1 + 4 (e - 1); trapezoid of e^x
        x = np.linspace(0, 1, 2001)
        g = SpaceDescriptor.weighted_grid(x, 1.0)
        expected = np.sqrt(1 + 4 * (np.e - 1))
        assert norm(HVector(g, 1 + 2 * x)) == pytest.approx(expected, rel=1e-7)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, 6, elements=finite), arrays(float, 6, elements=finite), finite)
    def test_triangle_and_homogeneity(self, a, b, c):
        for s in (spectral(6), SpaceDescriptor.weighted_grid(np.linspace(0, 3, 6), 0.7)):
            u, v = HVector(s, a), HVector(s, b)
            assert norm(u + v) <= norm(u) + norm(v) + 1e-12 * (1 + norm(u) + norm(v))
            assert norm(c * u) == pytest.approx(abs(c) * norm(u), rel=1e-12, abs=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite))
    def test_parallelogram_spectral(self, a, b):
        s = spectral(4)
        u, v = HVector(s, a), HVector(s, b)
        lhs = norm(u + v) ** 2 + norm(u - v) ** 2
        rhs = 2 * norm(u) ** 2 + 2 * norm(v) ** 2
        assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-10)

    def test_batched_norm_matches_loop(self):
        s = SpaceDescriptor.weighted_grid(np.linspace(0, 3, 7), 0.5)
        a = np.random.default_rng(0).standard_normal((4, 7))
        np.testing.assert_allclose(s.norm_array(a), [norm(HVector(s, row)) for row in a], rtol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(StructuralError):
            spectral(3).norm_array(np.zeros(4))


class TestGraphNorm:
    def test_zero_eigenvalue_mode(self):
        sg = SpectralSemigroup([0.0, -1.0])
        v = HVector(sg.space, [2.0, 0.0])
        assert graph_norm(v, sg) == 2.0

    def test_one_hot_mode(self):
        lam = -np.arange(1, 5, dtype=float) ** 2
        sg = SpectralSemigroup(lam)
        for k in range(4):
            e = np.zeros(4)
            e[k] = 1.0
            assert graph_norm(HVector(sg.space, e), sg) == pytest.approx(np.sqrt(1 + lam[k] ** 2), rel=1e-15)

    def test_constant_curve_shift_generator(self):
        s = SpaceDescriptor.weighted_grid(np.linspace(0, 5, 11), 0.5)
        sg = GridShiftSemigroup(s)
        v = HVector(s, np.full(11, 0.03))
        # the derivative of a constant interpolant vanishes identically
        assert graph_norm(v, sg) == pytest.approx(norm(v), rel=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(arrays(float, 5, elements=finite))
    def test_dominates_plain_norm(self, a):
        sg = SpectralSemigroup(-np.arange(1, 6, dtype=float))
        v = HVector(sg.space, a)
        assert graph_norm(v, sg) >= norm(v)

    def test_space_mismatch(self):
        sg = SpectralSemigroup([-1.0, -2.0])
        with pytest.raises(StructuralError):
            graph_norm(HVector(spectral(3), [1.0, 0.0, 0.0]), sg)
