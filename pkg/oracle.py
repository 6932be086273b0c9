"""
Order-by-order solution of the equations of motion by direct series arithmetic
"""
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from errors import SingularHessian, ZeroAlphaAverageViolated, ZeroDivisorLine
from fourier_taylor import FourierTaylorSeries, compose_force
from log_config import logger
from model import Model
from utils import Mode, zero_mode


@dataclass
class FormalSolution:
    h: FourierTaylorSeries
    b0_sequence: Dict[int, np.ndarray]
    K: int
    undetermined: Tuple[int, ...] = ()
    alpha_averages: Dict[int, float] = field(default_factory=dict)

    def __repr__(self):
        return f"<FormalSolution(K={self.K}, coefficients={len(self.h.coeffs)}, undetermined={self.undetermined})>"

    @property
    def a(self) -> FourierTaylorSeries:
        return self.h.component(slice(0, self.h.r))

    @property
    def b(self) -> FourierTaylorSeries:
        return self.h.component(slice(self.h.r, self.h.d))

    def leaf_source(self) -> Dict[int, np.ndarray]:
        """b^(kappa)_0 for every fixed order"""
        return {k: v for k, v in self.b0_sequence.items() if k not in self.undetermined}


@dataclass
class GrowthFit:
    rate: float
    factorial_power: float
    orders: List[int]


def _divisor(model: Model, nu: Mode, dtype) -> np.ndarray:
    real = np.longdouble if np.dtype(dtype) == np.dtype(np.clongdouble) else np.float64
    return np.dot(model.frequency.omega_array(real), np.array(nu, dtype=real))


def _solve_hessian(model: Model, rhs: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(model.equilibrium.hessian.astype(np.float64), rhs)
    except np.linalg.LinAlgError as e:
        raise SingularHessian(str(e)) from e


def solve_to_order(model: Model, K: int, tol: float = 1e-10, dtype=np.complex128) -> FormalSolution:
    """
    Solve (omega.nu)^2 h^(k)_nu = [df]^(k-1)_nu for k = 1..K

    The zero mode of a is set to 0 and b^(k-1)_0 is fixed when order k is processed,
    so b^(K)_0 stays zero and is reported as undetermined.

    Args:
        model: Validated model
        K: Highest order
        tol: Alpha-average tolerance, relative to the largest force coefficient of the order
        dtype: complex128, or clongdouble for extended precision
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    zero = zero_mode(model.r)
    h = FourierTaylorSeries.zeros(model.r, model.d, K, nf=model.nf, dtype=dtype)
    b0_sequence: Dict[int, np.ndarray] = {}
    alpha_averages: Dict[int, float] = {}

    for k in range(1, K + 1):
        if k >= 2:
            h.set(k - 1, zero, np.zeros(model.d))
            _, f_beta = compose_force(model, h, k)
            G = f_beta.get(k - 1, zero)
            if np.max(np.abs(np.imag(G))) > 1e-12 * max(1.0, float(np.max(np.abs(G)))):
                logger.debug(f"Order {k}: imaginary part {np.imag(G)} in the beta average")
            b0 = np.real(-_solve_hessian(model, np.real(G).astype(np.float64)))
            b0_sequence[k - 1] = b0
            h.set(k - 1, zero, np.concatenate([np.zeros(model.r), b0]))

        f_alpha, f_beta = compose_force(model, h, k)
        scale = 1.0
        for series in (f_alpha, f_beta):
            scale = max(scale, series.max_at_order(k - 1))
        average = float(np.max(np.abs(f_alpha.get(k - 1, zero))))
        alpha_averages[k - 1] = average
        if average > tol * scale:
            raise ZeroAlphaAverageViolated(k - 1, average, tol * scale)

        modes = sorted(set(f_alpha.modes(k - 1)) | set(f_beta.modes(k - 1)))
        for nu in modes:
            if nu == zero:
                continue
            divisor = _divisor(model, nu, dtype)
            if divisor == 0:
                raise ZeroDivisorLine(f"resonant mode {nu} at order {k}")
            force = np.concatenate([f_alpha.get(k - 1, nu), f_beta.get(k - 1, nu)])
            h.set(k, nu, force / divisor ** 2)
        h.set(k, zero, np.zeros(model.d))
        logger.info(f"Order {k}: {len(modes)} modes, alpha average {average:.3e}")

    b0_sequence[K] = np.zeros(model.s)
    return FormalSolution(h=h, b0_sequence=b0_sequence, K=K, undetermined=(K,),
                          alpha_averages=alpha_averages)


def residual_norm(model: Model, sol: FormalSolution, k: int) -> float:
    """max over modes and components of |(omega.nu)^2 h^(k)_nu - [df(psi + h)]^(k-1)_nu|"""
    if not 1 <= k <= sol.K:
        raise ValueError(f"order {k} outside 1..{sol.K}")
    f_alpha, f_beta = compose_force(model, sol.h, k)
    modes = set(f_alpha.modes(k - 1)) | set(f_beta.modes(k - 1)) | set(sol.h.modes(k))
    worst = 0.0
    for nu in modes:
        divisor = _divisor(model, nu, sol.h.dtype)
        force = np.concatenate([f_alpha.get(k - 1, nu), f_beta.get(k - 1, nu)])
        worst = max(worst, float(np.max(np.abs(divisor ** 2 * sol.h.get(k, nu) - force))))
    return worst


def perturbed(sol: FormalSolution, k: int, delta: np.ndarray) -> FormalSolution:
    """Copy of the solution with b^(k)_0 shifted by delta and nothing recomputed"""
    h = sol.h.copy()
    zero = zero_mode(h.r)
    current = h.get(k, zero).copy()
    current[h.r:] += np.asarray(delta)
    h.set(k, zero, current)
    b0 = dict(sol.b0_sequence)
    b0[k] = b0.get(k, np.zeros(h.d - h.r)) + np.asarray(delta)
    return FormalSolution(h=h, b0_sequence=b0, K=sol.K, undetermined=sol.undetermined,
                          alpha_averages=dict(sol.alpha_averages))


def coefficient_growth(series: FourierTaylorSeries) -> GrowthFit:
    """
    Fit the growth of max |h^(k)_nu| with k

    Returns:
        GrowthFit with the geometric rate exp(slope of log max vs k) and the
        slope of log max against log k!
    """
    orders = [k for k in series.orders if series.max_at_order(k) > 0]
    if len(orders) < 2:
        raise ValueError("at least two nonzero orders are needed for a growth fit")
    logs = np.log([series.max_at_order(k) for k in orders])
    slope, _ = np.polyfit(np.array(orders, dtype=float), logs, 1)
    log_factorials = np.array([math.lgamma(k + 1) for k in orders])
    if np.ptp(log_factorials) > 0:
        power, _ = np.polyfit(log_factorials, logs, 1)
    else:
        power = 0.0
    return GrowthFit(rate=float(np.exp(slope)), factorial_power=float(power), orders=orders)


if __name__ == "__main__":
    from model import load_model, reference_document

    ref1 = load_model(reference_document())
    solution = solve_to_order(ref1, 4)
    print(solution)
    for order in range(1, 5):
        print(f"order {order}: residual {residual_norm(ref1, solution, order):.3e}")
    print(f"b0 sequence: {solution.b0_sequence}")
