import numpy as np
import pytest

from lipgpr.jets import Jet, jet_cos, jet_exp, jet_pow, jet_sin, level_coeff


def seeded(x, u=0.0, v=0.0, s=0.0, level=0):
    return Jet(level, np.asarray(x, dtype=float), fu=u, fv=v, fs=s)


class TestSingleLevel:
    def test_product_rule(self):
        x = seeded(1.3, u=1.0, v=1.0)
        out = x * x * x
        assert np.isclose(out.f, 1.3 ** 3)
        assert np.isclose(out.fuv, 6 * 1.3)  # d2/dx2 of x^3

    def test_sin_second_derivative(self):
        x = seeded(0.7, u=1.0, v=1.0)
        out = jet_sin(x)
        assert np.isclose(out.f, np.sin(0.7))
        assert np.isclose(out.fuv, -np.sin(0.7))

    def test_exp_chain(self):
        # d2/dx2 exp(x^2) = (2 + 4 x^2) exp(x^2)
        x = seeded(0.4, u=1.0, v=1.0)
        out = jet_exp(x * x)
        assert np.isclose(out.fuv, (2 + 4 * 0.4 ** 2) * np.exp(0.4 ** 2))

    def test_directional_mix(self):
        # f(a, b) = sin(a) * b;  D_u D_v with u = e_a, v = e_b -> cos(a)
        a = seeded(0.3, u=1.0)
        b = seeded(2.0, v=1.0)
        out = jet_sin(a) * b
        assert np.isclose(out.fuv, np.cos(0.3))

    def test_pow_requires_positive_integer(self):
        with pytest.raises(ValueError):
            jet_pow(seeded(1.0), 0)


class TestNestedLevels:
    def test_cross_argument_second_derivative(self):
        # k(x, y) = cos(x) cos(y): d2k/dx dy = sin(x) sin(y)
        x0, y0 = 0.7, -0.4
        x = Jet(1, np.float64(x0), fs=1.0)
        y = Jet(0, np.float64(y0), fs=1.0)
        out = jet_cos(x) * jet_cos(y)
        val = level_coeff(level_coeff(out, 1, "fs"), 0, "fs")
        assert np.isclose(val, np.sin(x0) * np.sin(y0))

    def test_level_constant_rule(self):
        # an expression that never saw level-1 seeds is constant at level 1
        y = Jet(0, 2.0, fs=1.0)
        out = y * y
        assert level_coeff(out, 1, "fs") == 0
        assert level_coeff(level_coeff(out, 1, "f"), 0, "fs") == 4.0

    def test_fourth_order_mixed(self):
        # k = (x y)^2: d4/dx2 dy2 = 4
        x = Jet(1, np.float64(1.7), fu=1.0, fv=1.0)
        y = Jet(0, np.float64(-0.6), fu=1.0, fv=1.0)
        out = jet_pow(x * y, 2)
        val = level_coeff(level_coeff(out, 1, "fuv"), 0, "fuv")
        assert np.isclose(val, 4.0)

    def test_broadcast_coefficients(self):
        # d2/dx dy of sin(x) * y = cos(x); the (5, 1) result broadcasts
        # against the (1, 3) y grid lazily
        xs = np.linspace(-1, 1, 5)[:, None]
        ys = np.linspace(0, 2, 3)[None, :]
        x = Jet(1, xs, fs=1.0)
        y = Jet(0, ys, fs=1.0)
        out = jet_sin(x) * y
        val = level_coeff(level_coeff(out, 1, "fs"), 0, "fs")
        np.testing.assert_allclose(np.broadcast_to(val, (5, 3)),
                                   np.broadcast_to(np.cos(xs), (5, 3)))


class TestZeroHandling:
    def test_structural_zero_propagates(self):
        x = Jet(0, 1.0)  # no seeds at all
        out = x * x + x
        assert out.fu == 0 and out.fuv == 0

    def test_numpy_left_operand(self):
        arr = np.array([2.0, 3.0])
        out = arr * Jet(0, 1.0, fs=1.0)
        assert isinstance(out, Jet)
        np.testing.assert_allclose(out.fs, arr)

    def test_subtraction(self):
        x = Jet(0, 3.0, fs=1.0)
        out = 1.0 - x
        assert out.f == -2.0
        assert out.fs == -1.0
