"""
Utility functions for Fourier modes, numeric formatting and dates
"""
import itertools
from datetime import datetime
from functools import lru_cache
from typing import Iterable, Sequence, Tuple

import numpy as np
from dateutil import parser as date_parser

Mode = Tuple[int, ...]


def l1(nu: Sequence[int]) -> int:
    """|nu|_1 of an integer mode"""
    return int(sum(abs(int(c)) for c in nu))


def add_modes(a: Mode, b: Mode) -> Mode:
    return tuple(int(x) + int(y) for x, y in zip(a, b))


def sub_modes(a: Mode, b: Mode) -> Mode:
    return tuple(int(x) - int(y) for x, y in zip(a, b))


def neg_mode(a: Mode) -> Mode:
    return tuple(-int(x) for x in a)


def zero_mode(r: int) -> Mode:
    return (0,) * r


@lru_cache(maxsize=64)
def mode_ball(r: int, radius: int, include_zero: bool = False) -> Tuple[Mode, ...]:
    """
    All integer modes with |nu|_1 <= radius, sorted lexicographically

    Args:
        r: Number of angles
        radius: l1 radius of the ball
        include_zero: Whether the zero mode is part of the result

    Returns:
        Tuple of modes
    """
    if radius < 0:
        return tuple()
    modes = []
    for nu in itertools.product(range(-radius, radius + 1), repeat=r):
        norm = l1(nu)
        if norm > radius or (norm == 0 and not include_zero):
            continue
        modes.append(tuple(int(c) for c in nu))
    return tuple(sorted(modes))


def mode_ball_array(r: int, radius: int) -> np.ndarray:
    """Nonzero modes of the l1 ball as an (n, r) integer array"""
    modes = mode_ball(r, radius)
    if not modes:
        return np.zeros((0, r), dtype=np.int64)
    return np.array(modes, dtype=np.int64)


def complex_key(z: complex) -> bytes:
    """Exact memo key for a complex number (bit pattern, no bucketing)"""
    return np.complex128(z).tobytes()


def fit_slope(xs: Iterable[float], ys: Iterable[float]) -> float:
    """Least-squares slope of log|y| against log|x|"""
    lx = np.log(np.abs(np.asarray(list(xs), dtype=float)))
    ly = np.log(np.abs(np.asarray(list(ys), dtype=float)))
    slope, _ = np.polyfit(lx, ly, 1)
    return float(slope)


def format_real(value: float, digits: int = 17) -> str:
    """Fixed significant-digit rendering used by every report"""
    return f"{float(value):.{digits}g}"


def format_complex(value: complex, digits: int = 17) -> str:
    value = complex(value)
    return f"{format_real(value.real, digits)} {format_real(value.imag, digits)}"


def parse_since(text: str) -> datetime:
    """Parse a free-form date for run-history filters (e.g. '2 Oct 2026', '2026-10-01 12:00')"""
    return date_parser.parse(text)


if __name__ == "__main__":
    print(mode_ball(2, 1))
    print(format_real(np.pi))
    print(parse_since("1 Oct 2026"))
