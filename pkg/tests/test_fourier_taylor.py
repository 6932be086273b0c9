"""
Tests for sparse Fourier-Taylor series arithmetic
"""
import numpy as np
import pytest

from fourier_taylor import (FourierTaylorSeries, compose_force, dump_coefficients, ft_add, ft_convolve,
                            ft_derivative_along_flow, ft_eval, max_conjugacy_defect, psi_grid,
                            support_violations)


def scalar_series(entries, kmax=3, nf=2):
    series = FourierTaylorSeries.zeros(2, 1, kmax, nf=nf)
    for (k, nu), value in entries.items():
        series.set(k, nu, [value])
    return series


class TestSeries:
    def test_get_missing_is_zero(self):
        series = FourierTaylorSeries.zeros(2, 3, 2)
        np.testing.assert_array_equal(series.get(1, (4, 4)), np.zeros(3))

    def test_add_to_accumulates(self):
        series = scalar_series({(1, (1, 0)): 1.0})
        series.add_to(1, (1, 0), [2.5])
        assert series.get(1, (1, 0))[0] == 3.5

    def test_truncated_and_scaled(self):
        series = scalar_series({(1, (1, 0)): 1.0, (3, (2, 1)): 4.0})
        assert series.truncated(2).modes(3) == []
        assert series.scaled(2j).get(3, (2, 1))[0] == 8j

    def test_component(self):
        series = FourierTaylorSeries.zeros(2, 3, 1)
        series.set(1, (1, 0), [1.0, 2.0, 3.0])
        assert series.component(slice(2, 3)).get(1, (1, 0)).tolist() == [3.0]

    def test_add_truncates_to_smaller_order(self):
        a = scalar_series({(1, (1, 0)): 1.0, (3, (1, 0)): 1.0}, kmax=3)
        b = scalar_series({(1, (1, 0)): 2.0}, kmax=2)
        total = ft_add(a, b)
        assert total.kmax == 2
        assert total.get(1, (1, 0))[0] == 3.0
        assert (3, (1, 0)) not in total.coeffs

    def test_add_rejects_mismatched_dimension(self):
        with pytest.raises(ValueError):
            ft_add(FourierTaylorSeries.zeros(2, 1, 1), FourierTaylorSeries.zeros(2, 3, 1))


class TestConvolution:
    def test_orders_and_modes_add(self):
        a = scalar_series({(1, (1, 0)): 2.0})
        b = scalar_series({(1, (-1, 0)): 3.0, (1, (0, 1)): 1.0})
        product = ft_convolve(a, b)
        assert product.order_shift == 2
        assert product.get(2, (0, 0))[0] == 6.0
        assert product.get(2, (1, 1))[0] == 2.0

    def test_truncation_order(self):
        a = scalar_series({(1, (1, 0)): 1.0, (2, (1, 0)): 1.0})
        product = ft_convolve(a, a, kmax=3)
        assert product.get(3, (2, 0))[0] == 2.0
        assert product.modes(4) == []

    def test_custom_product(self):
        a = FourierTaylorSeries.zeros(2, 2, 2)
        a.set(1, (1, 0), [1.0, 2.0])
        outer = ft_convolve(a, a, product=lambda u, v: np.sum(u * v, axis=-1, keepdims=True))
        assert outer.d == 1
        assert outer.get(2, (2, 0))[0] == 5.0


class TestEvaluation:
    def test_eval_single_point(self):
        series = scalar_series({(1, (1, 0)): 1.0})
        value = ft_eval(series, np.array([np.pi / 2, 0.0]), 0.5)
        assert value[0] == pytest.approx(0.5j)

    def test_eval_grid_shape(self):
        series = scalar_series({(1, (1, 0)): 1.0, (2, (0, 1)): 1.0})
        assert ft_eval(series, psi_grid(2, 3), 0.1).shape == (64, 1)

    def test_derivative_along_flow(self, ref1):
        series = scalar_series({(1, (0, 1)): 1.0, (1, (0, 0)): 5.0})
        flow = ft_derivative_along_flow(series, ref1.frequency)
        assert flow.get(1, (0, 1))[0] == pytest.approx(1j * ref1.frequency.omega[1])
        assert (1, (0, 0)) not in flow.coeffs

    def test_psi_grid(self):
        grid = psi_grid(2, 2)
        assert grid.shape == (16, 2)
        assert grid.min() == 0.0
        assert grid.max() == pytest.approx(1.5 * np.pi)


class TestComposeForce:
    def test_order_zero_force_is_the_bare_gradient(self, ref1):
        h = FourierTaylorSeries.zeros(2, 3, 1, nf=2)
        f_alpha, f_beta = compose_force(ref1, h, 1)
        np.testing.assert_allclose(f_alpha.get(0, (1, 0)), [0.5j, 0.0])
        np.testing.assert_allclose(f_beta.get(0, (1, 1)), [0.5j])
        np.testing.assert_allclose(f_beta.get(0, (0, 0)), [0.0], atol=1e-16)

    def test_order_one_force_is_linear_in_h(self, ref1):
        """[df]^(1) of f = cos b only, with h^(1)_0 = (0, 0, c): the hessian times c"""
        h = FourierTaylorSeries.zeros(2, 3, 1, nf=2)
        h.set(1, (0, 0), [0.0, 0.0, 0.3])
        _, f_beta = compose_force(ref1, h, 2)
        np.testing.assert_allclose(f_beta.get(1, (0, 0)), [-0.3], atol=1e-15)

    def test_rejects_orders_beyond_the_series(self, ref1):
        with pytest.raises(ValueError):
            compose_force(ref1, FourierTaylorSeries.zeros(2, 3, 1), 3)
        with pytest.raises(ValueError):
            compose_force(ref1, FourierTaylorSeries.zeros(2, 2, 1), 1)


class TestSupportBound:
    def test_set_rejects_modes_beyond_the_bound(self):
        series = FourierTaylorSeries.zeros(2, 1, 2, nf=1)
        series.set(2, (1, -1), [1.0])
        with pytest.raises(ValueError):
            series.set(1, (3, 0), [1.0])
        with pytest.raises(ValueError):
            series.add_to(2, (2, 1), [1.0])
        assert series.modes(1) == []

    def test_force_series_allow_one_more_order(self):
        force = FourierTaylorSeries.zeros(2, 1, 1, nf=1, order_shift=0)
        force.set(0, (1, 0), [1.0])
        force.set(1, (-1, 1), [1.0])
        with pytest.raises(ValueError):
            force.set(0, (1, 1), [1.0])

    def test_unbounded_without_nf(self):
        series = FourierTaylorSeries.zeros(2, 1, 1)
        series.set(1, (9, 9), [1.0])
        assert series.modes(1) == [(9, 9)]

    def test_convolution_rejects_escaping_modes(self):
        series = FourierTaylorSeries.zeros(2, 1, 2, nf=1)
        series.coeffs[(1, (3, 0))] = np.ones(1, dtype=complex)
        with pytest.raises(ValueError):
            ft_convolve(series, series)
        with pytest.raises(ValueError):
            ft_add(series, series)


class TestDiagnostics:
    def test_support_violations(self):
        series = scalar_series({(1, (1, 1)): 1.0})
        assert support_violations(series) == []
        series.coeffs[(1, (3, 0))] = np.ones(1, dtype=complex)
        assert support_violations(series) == [(1, (3, 0))]

    def test_conjugacy_defect(self):
        series = scalar_series({(1, (1, 0)): 1 + 2j, (1, (-1, 0)): 1 - 2j})
        assert max_conjugacy_defect(series) == 0.0
        series.set(1, (-1, 0), [1.0])
        assert max_conjugacy_defect(series) == pytest.approx(2.0)

    def test_dump_format(self):
        series = scalar_series({(1, (1, -1)): 0.5 - 0.25j})
        assert dump_coefficients(series, 6) == ["1 1 -1 0 0.5 -0.25"]
