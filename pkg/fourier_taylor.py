"""
Sparse Fourier-Taylor series sum_k eps^k sum_nu exp(i nu.psi) h^(k)_nu with values in C^d
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from log_config import logger
from model import Frequency, Model
from utils import Mode, format_real, l1, neg_mode

Product = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass
class FourierTaylorSeries:
    r: int
    d: int
    kmax: int
    coeffs: Dict[Tuple[int, Mode], np.ndarray] = field(default_factory=dict)
    nf: int = 0
    order_shift: int = 1
    dtype: type = np.complex128

    def __repr__(self):
        return (f"<FourierTaylorSeries(r={self.r}, d={self.d}, kmax={self.kmax}, "
                f"terms={len(self.coeffs)}, shift={self.order_shift})>")

    @classmethod
    def zeros(cls, r: int, d: int, kmax: int, nf: int = 0, order_shift: int = 1,
              dtype=np.complex128) -> "FourierTaylorSeries":
        return cls(r=r, d=d, kmax=kmax, coeffs={}, nf=nf, order_shift=order_shift, dtype=dtype)

    def like(self, d: Optional[int] = None, kmax: Optional[int] = None,
             order_shift: Optional[int] = None) -> "FourierTaylorSeries":
        """Empty series with the same shape parameters"""
        return FourierTaylorSeries.zeros(
            self.r, self.d if d is None else d, self.kmax if kmax is None else kmax,
            nf=self.nf, order_shift=self.order_shift if order_shift is None else order_shift,
            dtype=self.dtype,
        )

    @property
    def orders(self) -> List[int]:
        return list(range(self.order_shift, self.kmax + 1))

    def get(self, k: int, nu: Mode) -> np.ndarray:
        value = self.coeffs.get((k, tuple(nu)))
        if value is None:
            return np.zeros(self.d, dtype=self.dtype)
        return value

    def support_bound(self, k: int) -> int:
        """Largest |nu|_1 allowed at order k: k Nf, or (k+1) Nf for force series starting at order 0"""
        return (k + (1 if self.order_shift == 0 else 0)) * self.nf

    def _key(self, k: int, nu: Mode) -> Tuple[int, Mode]:
        nu = tuple(int(c) for c in nu)
        if self.nf > 0 and l1(nu) > self.support_bound(k):
            raise ValueError(f"mode {nu} at order {k} exceeds the support bound {self.support_bound(k)}")
        return k, nu

    def set(self, k: int, nu: Mode, value: np.ndarray):
        self.coeffs[self._key(k, nu)] = np.asarray(value, dtype=self.dtype).reshape(self.d)

    def add_to(self, k: int, nu: Mode, value: np.ndarray):
        key = self._key(k, nu)
        current = self.coeffs.get(key)
        value = np.asarray(value, dtype=self.dtype).reshape(self.d)
        self.coeffs[key] = value.copy() if current is None else current + value

    def modes(self, k: int) -> List[Mode]:
        return sorted(nu for (order, nu) in self.coeffs if order == k)

    def order_arrays(self, k: int) -> Tuple[np.ndarray, np.ndarray]:
        """Modes (n, r) and values (n, d) stored at order k"""
        modes = self.modes(k)
        if not modes:
            return np.zeros((0, self.r), dtype=np.int64), np.zeros((0, self.d), dtype=self.dtype)
        return (np.array(modes, dtype=np.int64),
                np.array([self.coeffs[(k, nu)] for nu in modes], dtype=self.dtype))

    def items(self) -> Iterator[Tuple[Tuple[int, Mode], np.ndarray]]:
        for key in sorted(self.coeffs):
            yield key, self.coeffs[key]

    def component(self, sl: slice) -> "FourierTaylorSeries":
        """Series of a block of components (e.g. the a or b part of h)"""
        width = len(range(self.d)[sl])
        out = self.like(d=width)
        for key, value in self.coeffs.items():
            out.coeffs[key] = value[sl].copy()
        return out

    def truncated(self, kmax: int) -> "FourierTaylorSeries":
        out = self.like(kmax=min(kmax, self.kmax))
        for (k, nu), value in self.coeffs.items():
            if k <= out.kmax:
                out.coeffs[(k, nu)] = value.copy()
        return out

    def scaled(self, factor: complex) -> "FourierTaylorSeries":
        out = self.like()
        for key, value in self.coeffs.items():
            out.coeffs[key] = value * factor
        return out

    def copy(self) -> "FourierTaylorSeries":
        return self.scaled(1)

    def max_at_order(self, k: int) -> float:
        values = [np.max(np.abs(v)) for (order, _), v in self.coeffs.items() if order == k]
        return float(max(values)) if values else 0.0


def _check_compatible(a: FourierTaylorSeries, b: FourierTaylorSeries):
    if a.r != b.r:
        raise ValueError(f"series mode dimensions differ: r={a.r} vs r={b.r}")


def ft_add(a: FourierTaylorSeries, b: FourierTaylorSeries) -> FourierTaylorSeries:
    """Coefficientwise sum, truncated at the smaller kmax"""
    _check_compatible(a, b)
    if a.d != b.d:
        raise ValueError(f"series value dimensions differ: d={a.d} vs d={b.d}")
    out = FourierTaylorSeries.zeros(a.r, a.d, min(a.kmax, b.kmax), nf=max(a.nf, b.nf),
                                    order_shift=min(a.order_shift, b.order_shift),
                                    dtype=np.result_type(a.dtype, b.dtype).type)
    for series in (a, b):
        for (k, nu), value in series.coeffs.items():
            if k <= out.kmax:
                out.add_to(k, nu, value)
    return out


def ft_convolve(a: FourierTaylorSeries, b: FourierTaylorSeries,
                product: Product = np.multiply, kmax: Optional[int] = None) -> FourierTaylorSeries:
    """
    Cauchy product in eps and convolution in nu under a bilinear rule

    Args:
        a, b: Series with the same r
        product: Vectorized bilinear rule on (..., d_a) and (..., d_b) arrays
        kmax: Truncation order (defaults to the smaller kmax of the inputs)

    Returns:
        (ab)^(k)_nu = sum over k1+k2=k and nu1+nu2=nu of product(a^(k1)_nu1, b^(k2)_nu2)
    """
    _check_compatible(a, b)
    kmax = min(a.kmax, b.kmax) if kmax is None else kmax
    probe = product(np.zeros((1, a.d), dtype=a.dtype), np.zeros((1, b.d), dtype=b.dtype))
    d_out = probe.shape[-1]
    out = FourierTaylorSeries.zeros(a.r, d_out, kmax, nf=max(a.nf, b.nf),
                                    order_shift=a.order_shift + b.order_shift,
                                    dtype=np.result_type(a.dtype, b.dtype).type)
    for k1 in range(a.order_shift, a.kmax + 1):
        modes1, vals1 = a.order_arrays(k1)
        if len(modes1) == 0:
            continue
        for k2 in range(b.order_shift, min(b.kmax, kmax - k1) + 1):
            modes2, vals2 = b.order_arrays(k2)
            if len(modes2) == 0:
                continue
            summed = (modes1[:, None, :] + modes2[None, :, :]).reshape(-1, a.r)
            values = product(vals1[:, None, :], vals2[None, :, :]).reshape(-1, d_out)
            unique, inverse = np.unique(summed, axis=0, return_inverse=True)
            acc = np.zeros((len(unique), d_out), dtype=out.dtype)
            np.add.at(acc, inverse.reshape(-1), values)
            for nu, value in zip(unique, acc):
                out.add_to(k1 + k2, tuple(int(c) for c in nu), value)
    return out


def _exp_series(x: FourierTaylorSeries, kmax: int) -> FourierTaylorSeries:
    """exp(X) - 1 for a scalar series X starting at order 1, truncated at kmax"""
    total = x.truncated(kmax)
    power = total
    for n in range(2, kmax + 1):
        power = ft_convolve(power, x, kmax=kmax).scaled(1.0 / n)
        if not power.coeffs:
            break
        total = ft_add(total, power)
    return total


def compose_force(model: Model, h: FourierTaylorSeries, K: int) -> Tuple[FourierTaylorSeries, FourierTaylorSeries]:
    """
    Expand [d_alpha f](psi + a, beta0 + b) and [d_beta f](psi + a, beta0 + b) through order K-1

    For every term c exp(i(nu0.alpha + mu.beta)) the exponential exp(i nu0.a + i mu.b)
    is expanded as a Taylor series in eps; multiplying by kappa = (i nu0, i mu) gives the
    gradient. This is the multinomial sum over p, q with the (p! q!)^-1 weights.

    Args:
        model: Model providing the perturbation and beta0
        h: Series (a, b) of dimension d starting at order 1
        K: Order being solved; the force is needed through order K-1

    Returns:
        (alpha force, beta force), series of dimension r and s with orders 0..K-1
    """
    if K < 1:
        raise ValueError("K must be at least 1")
    if K > h.kmax + 1:
        raise ValueError(f"K={K} exceeds the series truncation {h.kmax} + 1")
    if h.d != model.d:
        raise ValueError(f"series dimension {h.d} does not match d={model.d}")
    top = K - 1
    force = FourierTaylorSeries.zeros(model.r, model.d, top, nf=model.nf, order_shift=0, dtype=h.dtype)
    for nu0 in model.perturbation.support:
        kappas, weights = model.vertex_table(nu0, h.dtype)
        for kappa, weight in zip(kappas, weights):
            force.add_to(0, nu0, weight * kappa)
            if top < 1:
                continue
            phase = FourierTaylorSeries.zeros(model.r, 1, top, nf=model.nf, dtype=h.dtype)
            for (k, nu), value in h.coeffs.items():
                if k <= top:
                    phase.add_to(k, nu, np.dot(kappa, value))
            expansion = _exp_series(phase, top)
            for (k, nu), value in expansion.coeffs.items():
                shifted = tuple(int(x) + int(y) for x, y in zip(nu, nu0))
                force.add_to(k, shifted, weight * value[0] * kappa)
    logger.debug(f"Composed force through order {top}: {len(force.coeffs)} coefficients")
    return force.component(slice(0, model.r)), force.component(slice(model.r, model.d))


def ft_eval(series: FourierTaylorSeries, psi: np.ndarray, eps: complex) -> np.ndarray:
    """
    Evaluate the truncated series at angles psi

    Args:
        psi: A single point (r,) or a grid of points (n, r)
        eps: Perturbation parameter, possibly complex

    Returns:
        (d,) for a single point, (n, d) for a grid
    """
    points = np.atleast_2d(np.asarray(psi, dtype=float))
    out = np.zeros((points.shape[0], series.d), dtype=np.complex128)
    for k in series.orders:
        modes, values = series.order_arrays(k)
        if len(modes) == 0:
            continue
        waves = np.exp(1j * (points @ modes.T))
        out += (eps ** k) * (waves @ values.astype(np.complex128))
    return out[0] if np.ndim(psi) == 1 else out


def ft_derivative_along_flow(series: FourierTaylorSeries, freq: Frequency) -> FourierTaylorSeries:
    """(omega . d_psi) applied termwise: coefficient (k, nu) times i omega.nu"""
    out = series.like()
    for (k, nu), value in series.coeffs.items():
        factor = 1j * freq.dot(nu)
        if factor != 0:
            out.coeffs[(k, nu)] = value * factor
    return out


def support_violations(series: FourierTaylorSeries) -> List[Tuple[int, Mode]]:
    """Stored coefficients whose mode exceeds |nu|_1 <= k Nf (k+1 for force series starting at order 0)"""
    return [(k, nu) for (k, nu) in series.coeffs if l1(nu) > series.support_bound(k)]


def max_conjugacy_defect(series: FourierTaylorSeries) -> float:
    """max |h(k, -nu) - conj h(k, nu)| over stored coefficients"""
    worst = 0.0
    for (k, nu), value in series.coeffs.items():
        partner = series.get(k, neg_mode(nu))
        worst = max(worst, float(np.max(np.abs(partner - np.conj(value)))))
    return worst


def dump_coefficients(series: FourierTaylorSeries, digits: int = 17) -> List[str]:
    """One line per (k, nu, component), sorted: 'k nu_1 .. nu_r component re im'"""
    lines = []
    for (k, nu), value in series.items():
        for component, entry in enumerate(value):
            entry = complex(entry)
            mode = " ".join(str(c) for c in nu)
            lines.append(f"{k} {mode} {component} {format_real(entry.real, digits)} "
                         f"{format_real(entry.imag, digits)}")
    return lines


def psi_grid(r: int, m: int) -> np.ndarray:
    """Uniform grid with 2^m points per angle, shape (2^(m r), r)"""
    axis = 2 * np.pi * np.arange(2 ** m) / 2 ** m
    mesh = np.meshgrid(*([axis] * r), indexing='ij')
    return np.stack([g.reshape(-1) for g in mesh], axis=1)


if __name__ == "__main__":
    from model import load_model, reference_document

    ref1 = load_model(reference_document())
    zero = FourierTaylorSeries.zeros(ref1.r, ref1.d, 1, nf=ref1.nf)
    f_alpha, f_beta = compose_force(ref1, zero, 1)
    print("\n".join(dump_coefficients(f_alpha)))
    print("\n".join(dump_coefficients(f_beta)))
