"""Bessel functions J0, J1, Y0, Y1 and Hankel functions of the second kind.

Small arguments (x <= 12) use the ascending power series; larger arguments use
the Hankel asymptotic expansion truncated before its smallest term.  All
functions accept scalars or numpy arrays and return the same shape.
"""
from __future__ import annotations

import enum
import math

import numpy as np

EULER_GAMMA = 0.57721566490153286061
SWITCH_POINT = 12.0

_SERIES_TERMS = 40
# terms are still decreasing at x = 12 up to k ~ 23 for both orders
_ASYMPTOTIC_TERMS = 22
_SQRT_HALF = math.sqrt(0.5)


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class BesselOrder(enum.IntEnum):
    ZERO = 0
    ONE = 1


def _asymptotic_coefficients(order: int) -> np.ndarray:
    mu = 4.0 * order * order
    coeffs = [1.0]
    for k in range(1, _ASYMPTOTIC_TERMS + 1):
        coeffs.append(coeffs[-1] * (mu - (2 * k - 1) ** 2) / (k * 8.0))
    return np.array(coeffs)


_ASYM = {0: _asymptotic_coefficients(0), 1: _asymptotic_coefficients(1)}


def _check_order(order) -> int:
    try:
        return int(BesselOrder(order))
    except ValueError:
        raise DomainError(f"only Bessel orders 0 and 1 are supported, got {order!r}") from None


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("Bessel argument must be finite")
    return arr, arr.ndim == 0


def _series_j(order: int, x: np.ndarray) -> np.ndarray:
    q = 0.25 * x * x
    if order == 0:
        term = np.ones_like(x)
    else:
        term = 0.5 * x
    total = term.copy()
    for m in range(1, _SERIES_TERMS):
        term = term * (-q / (m * (m + order)))
        total = total + term
    return total


def _series_y(order: int, x: np.ndarray) -> np.ndarray:
    q = 0.25 * x * x
    log_part = (2.0 / math.pi) * (np.log(0.5 * x) + EULER_GAMMA) * _series_j(order, x)
    if order == 0:
        # (2/pi) sum_{m>=1} (-1)^{m+1} H_m q^m / (m!)^2
        term = np.ones_like(x)
        harmonic = 0.0
        total = np.zeros_like(x)
        for m in range(1, _SERIES_TERMS):
            term = term * (-q / (m * m))
            harmonic += 1.0 / m
            total = total - harmonic * term
        return log_part + (2.0 / math.pi) * total
    # -(1/pi) sum_{m>=0} (-1)^m (H_m + H_{m+1}) (x/2)^{2m+1} / (m! (m+1)!)
    term = 0.5 * x
    h_m, h_m1 = 0.0, 1.0
    total = (h_m + h_m1) * term
    for m in range(1, _SERIES_TERMS):
        term = term * (-q / (m * (m + 1)))
        h_m = h_m1
        h_m1 = h_m1 + 1.0 / (m + 1)
        total = total + (h_m + h_m1) * term
    return log_part - 2.0 / (math.pi * x) - total / math.pi


def _asymptotic(order: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    coeffs = _ASYM[order]
    inv = 1.0 / x
    p = np.zeros_like(x)
    qq = np.zeros_like(x)
    power = np.ones_like(x)
    for k, c in enumerate(coeffs):
        sign = -1.0 if (k // 2) % 2 else 1.0
        if k % 2 == 0:
            p = p + sign * c * power
        else:
            qq = qq + sign * c * power
        power = power * inv
    c, s = np.cos(x), np.sin(x)
    # chi = x - pi/4 - order*pi/2, expanded to avoid rounding in the shift
    if order == 0:
        cos_chi, sin_chi = _SQRT_HALF * (c + s), _SQRT_HALF * (s - c)
    else:
        cos_chi, sin_chi = _SQRT_HALF * (s - c), -_SQRT_HALF * (s + c)
    amp = np.sqrt(2.0 / (math.pi * x))
    return amp * (p * cos_chi - qq * sin_chi), amp * (p * sin_chi + qq * cos_chi)


def _eval_j(order: int, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    small = x <= SWITCH_POINT
    if np.any(small):
        out[small] = _series_j(order, x[small])
    if np.any(~small):
        out[~small] = _asymptotic(order, x[~small])[0]
    return out


def _eval_y(order: int, x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    small = x <= SWITCH_POINT
    if np.any(small):
        out[small] = _series_y(order, x[small])
    if np.any(~small):
        out[~small] = _asymptotic(order, x[~small])[1]
    return out


def bessel_j(order, x):
    """Bessel function of the first kind J_order(x) for x >= 0."""
    n = _check_order(order)
    arr, scalar = _as_array(x)
    if np.any(arr < 0):
        raise DomainError("bessel_j requires x >= 0")
    out = _eval_j(n, np.atleast_1d(arr))
    return float(out[0]) if scalar else out.reshape(arr.shape)


def bessel_y(order, x):
    """Bessel function of the second kind Y_order(x) for x > 0."""
    n = _check_order(order)
    arr, scalar = _as_array(x)
    if np.any(arr <= 0):
        raise DomainError("bessel_y requires x > 0 (singular at the origin)")
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        out = _eval_y(n, np.atleast_1d(arr))
    if not np.all(np.isfinite(out)):
        raise OverflowError("bessel_y overflows for arguments this close to 0")
    return float(out[0]) if scalar else out.reshape(arr.shape)


def hankel2(order, x):
    """Hankel function of the second kind, J_order(x) - j*Y_order(x)."""
    j = bessel_j(order, x)
    y = bessel_y(order, x)
    if np.ndim(j) == 0:
        return complex(j, -y)
    out = np.empty(np.shape(j), dtype=complex)
    out.real = j
    out.imag = -y
    return out
