"""Integer-order upper incomplete gamma function.

For integer order ``n + 1`` the function has the finite expansion

    Gamma(n + 1, y) = n! e^{-y} sum_{r=0}^{n} y^r / r!

which is also the analytic continuation used at negative ``y`` (the
interval integrals of the position recursions produce arguments such as
``2 (i - 1 - n) mu / sigma`` that are negative for ``mu > 0``).

Besides the scalar function this module provides the polynomial-weighted
form of the same expansion, :func:`poly_exp_antiderivative`, which is what
the segment convolution engine uses: for ``p(t) = sum_j p_j t^j`` it returns
the polynomial ``P`` with ``d/dt [e^{lam t} P(t)] = p(t) e^{lam t}``.  Its
coefficients are ``sum_j p_j`` times the incomplete-gamma expansion terms,
evaluated by a backward (Horner-type) recurrence that never forms ``j!``.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = [
    "MAX_ORDER",
    "factorial",
    "gamma_upper_int",
    "gamma_upper_int_scaled",
    "log_gamma_upper_int",
    "gamma_upper_int_diff",
    "poly_exp_antiderivative",
    "poly_antiderivative",
]

MAX_ORDER = 171  # 170! is the largest factorial representable in a double

_FACTORIALS = [float(math.factorial(k)) for k in range(MAX_ORDER)]


def factorial(k: int) -> float:
    """Return ``k!`` from the precomputed table."""
    if k < 0:
        raise ValueError(f"factorial of negative integer {k}")
    if k >= MAX_ORDER:
        raise OverflowError(f"{k}! overflows double precision")
    return _FACTORIALS[k]


def _check_order(order: int) -> int:
    if int(order) != order or order < 1:
        raise ValueError(f"incomplete gamma order must be an integer >= 1, got {order!r}")
    if order > MAX_ORDER:
        raise OverflowError(f"order {order} exceeds the supported maximum {MAX_ORDER}")
    return int(order)


def gamma_upper_int_scaled(order: int, y: float) -> float:
    """Return ``e^{y} Gamma(order, y) = (order-1)! sum_{r<order} y^r / r!``.

    The partial exponential sum is accumulated with :func:`math.fsum`.
    """
    n = _check_order(order) - 1
    term = 1.0
    terms = [1.0]
    for r in range(1, n + 1):
        term *= y / r
        terms.append(term)
    return _FACTORIALS[n] * math.fsum(terms)


def gamma_upper_int(order: int, y: float) -> float:
    """Upper incomplete gamma ``Gamma(order, y)`` for integer ``order >= 1``.

    Valid for any finite real ``y``; for ``y < 0`` the value can exceed
    ``Gamma(order)``.  ``y = +inf`` gives 0.

    >>> gamma_upper_int(1, 0.0)
    1.0
    >>> round(gamma_upper_int(3, 1.0), 12)
    1.839397205857
    """
    _check_order(order)
    if y == math.inf:
        return 0.0
    if not math.isfinite(y):
        raise ValueError(f"incomplete gamma argument must be finite or +inf, got {y!r}")
    return math.exp(-y) * gamma_upper_int_scaled(order, y)


def log_gamma_upper_int(order: int, y: float) -> tuple[float, float]:
    """Return ``(log|Gamma(order, y)|, sign)``.

    Callers that combine many incomplete gamma values in log space use this
    to avoid overflow of ``e^{-y}`` at large negative ``y``.
    """
    s = gamma_upper_int_scaled(order, y)
    if s == 0.0:
        return -math.inf, 0.0
    return math.log(abs(s)) - y, math.copysign(1.0, s)


def gamma_upper_int_diff(order: int, phi_b: float, phi_a: float) -> float:
    """``Gamma(order, phi_b) - Gamma(order, phi_a)``; an infinite endpoint contributes 0."""
    _check_order(order)
    gb = 0.0 if phi_b == math.inf else gamma_upper_int(order, phi_b)
    ga = 0.0 if phi_a == math.inf else gamma_upper_int(order, phi_a)
    return gb - ga


def poly_exp_antiderivative(coeffs, lam: float) -> np.ndarray:
    """Polynomial ``P`` such that ``(e^{lam t} P(t))' = p(t) e^{lam t}``.

    ``coeffs`` holds ``p_0 .. p_m`` in increasing degree.  Equivalent to
    summing ``p_j * (-1/lam)^{j+1} j! e^{-w} sum_r w^r/r!`` with
    ``w = -lam t`` (the incomplete-gamma expansion), but computed by the
    recurrence ``P_m = (p_m - (m+1) P_{m+1}) / lam``.
    """
    if lam == 0.0:
        raise ValueError("lam must be nonzero; use poly_antiderivative")
    p = np.asarray(coeffs, dtype=float)
    out = np.zeros_like(p)
    nxt = 0.0
    for m in range(p.size - 1, -1, -1):
        nxt = (p[m] - (m + 1) * nxt) / lam
        out[m] = nxt
    return out


def poly_antiderivative(coeffs) -> np.ndarray:
    """Antiderivative of ``p`` vanishing at 0 (one degree higher)."""
    p = np.asarray(coeffs, dtype=float)
    out = np.zeros(p.size + 1)
    out[1:] = p / np.arange(1, p.size + 1)
    return out
