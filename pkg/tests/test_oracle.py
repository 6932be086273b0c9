"""
Tests for the order-by-order recursion
"""
import numpy as np
import pytest

from fourier_taylor import max_conjugacy_defect, support_violations
from oracle import coefficient_growth, perturbed, residual_norm, solve_to_order
from renormalized import residual_on_torus, torus_embedding
from utils import fit_slope


class TestSolveToOrder:
    def test_residuals_vanish(self, ref1, solution):
        for k in range(1, solution.K + 1):
            scale = max(1.0, solution.h.max_at_order(k))
            residual = residual_norm(ref1, solution, k)
            assert residual <= 1e-12 * scale, f"order {k}: residual {residual:.3e}"

    def test_alpha_averages(self, solution):
        scale = max(1.0, max(solution.h.max_at_order(k) for k in solution.h.orders))
        assert max(solution.alpha_averages.values()) <= 1e-12 * scale

    def test_first_order(self, ref1, solution):
        """h^(1)_nu = grad f_nu / (omega.nu)^2"""
        x = ref1.frequency.dot((1, 1))
        np.testing.assert_allclose(solution.h.get(1, (1, 1)), np.full(3, 0.5j) / x ** 2, rtol=1e-14)
        np.testing.assert_allclose(solution.h.get(1, (1, 0)), [0.5j, 0.0, 0.0], rtol=1e-14)

    def test_zero_modes(self, ref1, solution):
        for k in range(1, solution.K + 1):
            zero = solution.h.get(k, (0, 0))
            assert np.all(zero[:2] == 0)
            np.testing.assert_allclose(zero[2:], solution.b0_sequence[k])
        assert solution.undetermined == (solution.K,)
        assert solution.K not in solution.leaf_source()

    def test_reality_and_support(self, solution):
        scale = max(1.0, max(solution.h.max_at_order(k) for k in solution.h.orders))
        assert max_conjugacy_defect(solution.h) <= 1e-13 * scale
        assert support_violations(solution.h) == []

    def test_components(self, solution):
        assert solution.a.d == 2 and solution.b.d == 1

    def test_rejects_order_zero(self, ref1):
        with pytest.raises(ValueError):
            solve_to_order(ref1, 0)

    def test_extended_precision_agrees(self, ref1, solution):
        extended = solve_to_order(ref1, 3, dtype=np.clongdouble)
        for (k, nu), value in extended.h.items():
            np.testing.assert_allclose(value.astype(complex), solution.h.get(k, nu), rtol=1e-12, atol=1e-14)


class TestPerturbation:
    def test_shifting_a_fixed_counterterm_breaks_the_next_order(self, ref1):
        solution = solve_to_order(ref1, 3)
        broken = perturbed(solution, 1, np.array([1e-3]))
        assert residual_norm(ref1, broken, 1) <= 1e-14
        assert residual_norm(ref1, broken, 2) >= 1e-4

    def test_perturbed_leaves_the_original_alone(self, ref1):
        solution = solve_to_order(ref1, 2)
        before = solution.h.get(1, (0, 0)).copy()
        perturbed(solution, 1, np.array([0.5]))
        np.testing.assert_array_equal(solution.h.get(1, (0, 0)), before)


class TestTorus:
    def test_residual_order(self, ref1):
        """The truncation error of an order-K solution is O(eps^(K+1))"""
        for K in (1, 2):
            solution = solve_to_order(ref1, K)
            eps_values = np.geomspace(1e-3, 1e-2, 3)
            residuals = [residual_on_torus(ref1, solution, eps, m=5) for eps in eps_values]
            slope = fit_slope(eps_values, residuals)
            assert slope >= K + 1 - 0.1, f"K={K}: slope {slope:.3f}"

    def test_residual_needs_eps(self, ref1, solution):
        with pytest.raises(ValueError):
            residual_on_torus(ref1, solution)

    def test_embedding_is_real(self, ref1, solution):
        psi = np.array([[0.1, 0.2], [1.0, 2.0]])
        alpha, beta, A, B = torus_embedding(ref1, solution, psi, 0.01)
        assert alpha.shape == (2, 2) and beta.shape == (2, 1)
        assert not np.iscomplexobj(alpha) and not np.iscomplexobj(B)
        np.testing.assert_allclose(alpha, psi, atol=0.05)


class TestGrowth:
    def test_growth_fit(self, solution):
        fit = coefficient_growth(solution.h)
        assert fit.orders == [1, 2, 3, 4]
        assert fit.rate > 0

    def test_growth_needs_two_orders(self, ref1):
        with pytest.raises(ValueError):
            coefficient_growth(solve_to_order(ref1, 1).h)
