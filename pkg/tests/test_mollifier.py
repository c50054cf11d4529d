import numpy as np
import pytest

from porophase import build_grid, discrete_l2_norm, mollified_gradient, mollify, standard_mollifier
from porophase.grid import CellField
from porophase.mollifier import DeltaTooLargeError, mollify_array


class TestKernel:
    def test_normalization_symmetry_support(self):
        k = standard_mollifier(0.1, 1.0 / 256)
        assert abs(k.mass() - 1.0) < 1e-12
        np.testing.assert_allclose(k.weights, k.weights[::-1])
        assert np.all(k.weights > 0)
        # support strictly inside (-delta, delta)
        assert k.half_width * k.h < 0.1

    def test_rejects_nonpositive_delta(self):
        with pytest.raises(DeltaTooLargeError):
            standard_mollifier(0.0, 0.01)

    def test_delta_must_fit_domain(self):
        g = build_grid(0.0, 1.0, 64)
        k = standard_mollifier(0.6, g.h)
        with pytest.raises(DeltaTooLargeError):
            mollify(CellField(np.zeros(64)), g, k)


class TestMollify:
    def test_constant_away_from_boundary(self):
        g = build_grid(0.0, 1.0, 200)
        k = standard_mollifier(0.1, g.h)
        out = mollify(CellField(np.full(200, 3.0)), g, k)
        x = g.cell_centers()
        interior = (x > 0.1) & (x < 0.9)
        np.testing.assert_allclose(out.values[interior], 3.0, atol=1e-10)

    def test_norm_contraction(self, rng):
        g = build_grid(0.0, 1.0, 128)
        k = standard_mollifier(0.08, g.h)
        for _ in range(100):
            u = rng.standard_normal(128)
            su = mollify_array(u, k)
            assert discrete_l2_norm(su, g) <= discrete_l2_norm(u, g) + 1e-12

    def test_smoothing_error_decreases_with_delta(self):
        g = build_grid(0.0, 1.0, 256)
        x = g.cell_centers()
        u = np.sin(np.pi * x)
        errs = []
        for d in (0.1, 0.05, 0.025):
            k = standard_mollifier(d, g.h)
            errs.append(discrete_l2_norm(mollify_array(u, k) - u, g))
        assert errs[0] > errs[1] > errs[2]

    def test_linearity(self, rng):
        g = build_grid(0.0, 1.0, 96)
        k = standard_mollifier(0.07, g.h)
        u, v = rng.standard_normal(96), rng.standard_normal(96)
        a, b = 1.7, -0.4
        lhs = mollify_array(a * u + b * v, k)
        rhs = a * mollify_array(u, k) + b * mollify_array(v, k)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_boundary_extension_keeps_constants(self):
        k = standard_mollifier(0.1, 1.0 / 100)
        u = np.full(100, -0.7)
        np.testing.assert_allclose(mollify_array(u, k, extension="boundary"),
                                   -0.7, atol=1e-13)


class TestMollifiedGradient:
    def test_constant_gives_zero_interior(self):
        g = build_grid(0.0, 1.0, 200)
        k = standard_mollifier(0.05, g.h)
        grad = mollified_gradient(np.full(201, 2.0), g, k)
        x = g.nodes()
        interior = (x > 0.1) & (x < 0.9)
        np.testing.assert_allclose(grad[interior], 0.0, atol=1e-10)

    def test_linear_gives_slope_interior(self):
        g = build_grid(0.0, 1.0, 200)
        k = standard_mollifier(0.05, g.h)
        s = -1.3
        grad = mollified_gradient(s * g.nodes(), g, k)
        x = g.nodes()
        interior = (x > 0.1) & (x < 0.9)
        np.testing.assert_allclose(grad[interior], s, atol=1e-8)

    def test_bound_constant_grows_as_delta_shrinks(self, rng):
        g = build_grid(0.0, 1.0, 256)
        cs = []
        for d in (0.1, 0.05, 0.025):
            k = standard_mollifier(d, g.h)
            c = 0.0
            for _ in range(50):
                u = rng.standard_normal(257)
                c = max(c, discrete_l2_norm(mollified_gradient(u, g, k), g)
                        / discrete_l2_norm(u, g))
            cs.append(c)
        assert cs[0] < cs[1] < cs[2]
