import numpy as np
import pytest
import sympy

from wongzakai.errors import ArgumentError, StructuralError
from wongzakai.hilbert import HVector, SpaceDescriptor, graph_norm, norm
from wongzakai.semigroup import (
    GridShiftSemigroup,
    ProductSemigroup,
    SpectralSemigroup,
    build_perturbed_spectral,
    dirichlet_laplacian_eigenvalues,
    phi1,
    phi2,
)


def grid_semigroup(x_max=20.0, n=401, beta=1.0):
    return GridShiftSemigroup(SpaceDescriptor.weighted_grid(np.linspace(0, x_max, n), beta))


class TestPhiFunctions:
    def test_against_mpmath_closed_forms(self):
        import mpmath

        for z in [-30.0, -2.0, -0.3, -0.05, -1e-6, 0.0, 1e-7, 0.08, 1.5]:
            if z == 0:
                e1, e2 = 1.0, 0.5
            else:
                with mpmath.workdps(60):  # the closed forms cancel badly near 0
                    zz = mpmath.mpf(z)
                    e1 = float(mpmath.expm1(zz) / zz)
                    e2 = float((mpmath.exp(zz) - 1 - zz) / zz**2)
            assert float(phi1(np.array(z))) == pytest.approx(e1, rel=1e-13)
            assert float(phi2(np.array(z))) == pytest.approx(e2, rel=1e-12)


class TestSpectral:
    def test_apply_zero_is_identity(self):
        sg = SpectralSemigroup([-1.0, -4.0])
        v = HVector(sg.space, [0.3, -2.0])
        out = sg.apply(0.0, v)
        np.testing.assert_array_equal(out.coeffs, v.coeffs)

    def test_half_life(self):
        sg = SpectralSemigroup([-1.0])
        np.testing.assert_allclose(sg.apply(np.log(2), np.array([1.0])), [0.5], rtol=1e-15)

    def test_generator_diagonal(self):
        sg = SpectralSemigroup([-4.0, -9.0])
        np.testing.assert_array_equal(sg.generator_apply(np.array([1.0, 1.0])), [-4.0, -9.0])

    def test_negative_time_rejected(self):
        with pytest.raises(ArgumentError):
            SpectralSemigroup([-1.0]).apply(-0.1, np.array([1.0]))

    def test_space_mismatch(self):
        sg = SpectralSemigroup([-1.0, -2.0])
        with pytest.raises(StructuralError):
            sg.apply(0.1, HVector(SpaceDescriptor.spectral([0.0]), [1.0]))

    def test_semigroup_law(self):
        sg = SpectralSemigroup(dirichlet_laplacian_eigenvalues(16))
        v = np.random.default_rng(1).standard_normal(16)
        for s, t in [(0.1, 0.2), (0.01, 1.3), (0.5, 0.5)]:
            err = np.linalg.norm(sg.apply(s, sg.apply(t, v)) - sg.apply(s + t, v))
            assert err <= 1e-10 * np.linalg.norm(v)

    def test_contraction(self):
        sg = SpectralSemigroup(dirichlet_laplacian_eigenvalues(8))
        v = np.random.default_rng(2).standard_normal((20, 8))
        for t in [0.01, 0.3, 2.0]:
            assert np.all(np.linalg.norm(sg.apply(t, v), axis=-1) <= np.linalg.norm(v, axis=-1))

    def test_generator_is_time_derivative(self):
        sg = SpectralSemigroup([-1.0, -4.0, -9.0])
        v = np.array([1.0, -0.5, 0.25])
        eps = 1e-6
        fd = (sg.apply(eps, v) - v) / eps  # one-sided at t = 0
        fd2 = (sg.apply(2 * eps, v) - sg.apply(0.0, v)) / (2 * eps)
        exact = sg.generator_apply(v)
        rich = 2 * fd - fd2  # second-order one-sided difference
        assert np.linalg.norm(rich - exact) / np.linalg.norm(exact) < 1e-5


class TestPerturbedSpectral:
    def test_sine_modes_are_dirichlet_eigenfunctions(self):
        x = sympy.symbols("x")
        for k in range(1, 4):
            f = sympy.sin(k * x)
            ratio = sympy.simplify(sympy.diff(f, x, 2) / f)
            assert float(ratio) == dirichlet_laplacian_eigenvalues(3)[k - 1]
            assert f.subs(x, 0) == 0 and sympy.simplify(f.subs(x, sympy.pi)) == 0

    def test_quantization_massless(self):
        sg = build_perturbed_spectral(dirichlet_laplacian_eigenvalues(3), 1.0, 0.0)
        np.testing.assert_array_equal(sg.eigenvalues, [-1.0, -4.0, -9.0])

    def test_quantization_mass_two(self):
        m = 2.0
        sg = build_perturbed_spectral(dirichlet_laplacian_eigenvalues(3), 1.0, -(m**2))
        np.testing.assert_array_equal(sg.eigenvalues, [-5.0, -8.0, -13.0])

    def test_cable_first_mode(self):
        lam, tau = 1.0, 2.0
        sg = build_perturbed_spectral(dirichlet_laplacian_eigenvalues(1), lam**2 / tau, -1 / tau)
        np.testing.assert_array_equal(sg.eigenvalues, [-1.0])

    def test_nonfinite_rejected(self):
        with pytest.raises(ArgumentError):
            build_perturbed_spectral([-1.0], np.inf, 0.0)


class TestGridShift:
    def test_shifted_exponential(self):
        sg = grid_semigroup()
        x = sg.space.grid_array
        out = sg.apply(1.0, np.exp(-x))
        h = x[1] - x[0]
        # linear interpolation error h^2/8 max|f''| plus the held tail value
        tol = h**2 / 8 * np.exp(-1.0) + np.exp(-x[-1])
        assert np.max(np.abs(out - np.exp(-(x + 1)))) <= tol

    def test_node_aligned_shift_is_exact(self):
        sg = grid_semigroup(x_max=5.0, n=11)
        x = sg.space.grid_array
        v = np.sin(x)
        out = sg.apply(1.0, v)
        np.testing.assert_allclose(out[:-2], v[2:], rtol=0, atol=1e-15)
        np.testing.assert_allclose(out[-2:], v[-1], rtol=0, atol=0)  # hold-last-value

    def test_linear_curve_generator(self):
        sg = grid_semigroup(x_max=3.0, n=13)
        x = sg.space.grid_array
        np.testing.assert_allclose(sg.generator_apply(2 * x)[1:-1], 2.0, rtol=1e-13)

    def test_generator_matches_time_derivative(self):
        sg = grid_semigroup(x_max=10.0, n=201)
        x = sg.space.grid_array
        v = np.exp(-0.5 * x)
        eps = 1e-7
        fd = (sg.apply(eps, v) - v) / eps
        gen = sg.generator_apply(v)
        # interior nodes: forward shift sees the right-hand slope, the generator the central one
        rel = np.linalg.norm(fd[1:-1] - gen[1:-1]) / np.linalg.norm(gen[1:-1])
        h = x[1] - x[0]
        assert rel < 0.5 * 0.5 * h * 1.05  # |central - forward| ~ h f''/2 relative to f' = -f/2

    def test_semigroup_law_smooth_curve(self):
        sg = grid_semigroup(x_max=20.0, n=401)
        x = sg.space.grid_array
        v = 0.03 + 0.01 * np.exp(-x)
        err = sg.space.norm_array(sg.apply(0.37, sg.apply(0.81, v)) - sg.apply(1.18, v))
        assert err <= 1e-4 * sg.space.norm_array(v)

    def test_requires_weighted_grid(self):
        with pytest.raises(StructuralError):
            GridShiftSemigroup(SpaceDescriptor.spectral([0.0, -1.0]))


class TestProduct:
    def test_blockwise(self):
        g = grid_semigroup(x_max=5.0, n=11)
        s = SpectralSemigroup([0.0])
        p = ProductSemigroup(g, s)
        x = g.space.grid_array
        v = np.append(np.exp(-x), 7.0)
        out = p.apply(0.5, v)
        np.testing.assert_allclose(out[:-1], g.apply(0.5, np.exp(-x)), rtol=1e-15)
        assert out[-1] == 7.0
        np.testing.assert_allclose(p.generator_apply(v)[:-1], g.generator_apply(np.exp(-x)))
        assert p.generator_apply(v)[-1] == 0.0

    def test_operator_matches_apply(self):
        p = ProductSemigroup(SpectralSemigroup([-1.0, -2.0]), SpectralSemigroup([-3.0]))
        v = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(p.operator(0.4) * v, p.apply(0.4, v), rtol=1e-15)


class TestTimeLipschitz:
    @pytest.mark.parametrize(
        "sg",
        [
            SpectralSemigroup(dirichlet_laplacian_eigenvalues(16)),
            grid_semigroup(x_max=10.0, n=121, beta=0.5),
        ],
        ids=["spectral", "grid-shift"],
    )
    def test_ratio_bounded(self, sg):
        rng = np.random.default_rng(3)
        ratios = []
        for _ in range(200):
            t1, t2 = np.sort(rng.uniform(0, 1, 2))
            if sg.diagonal:
                v = rng.standard_normal(sg.space.dim) / np.arange(1, sg.space.dim + 1) ** 2
            else:
                x = sg.space.grid_array
                a, b = rng.uniform(0.2, 2, 2)
                v = rng.standard_normal() * np.exp(-a * x) + rng.standard_normal() * x * np.exp(-b * x)
            hv = HVector(sg.space, v)
            lhs = norm(HVector(sg.space, sg.apply(t2, v) - sg.apply(t1, v)))
            ratios.append(lhs / (graph_norm(hv, sg) * (t2 - t1)))
        # for a contraction semigroup |S_t2 v - S_t1 v| <= |t2 - t1| |A v|, so the ratio is at most 1
        # up to the grid realization's discretization error
        assert max(ratios) <= 1.5
