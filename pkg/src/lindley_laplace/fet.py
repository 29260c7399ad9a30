"""Distribution of the first exit time ``N_x = min{n : W_n >= h}`` from ``[0, h)``.

``P(n | x)`` is built backwards in ``n`` from the first-step decomposition

    P(n+1 | x) = P(Z <= -x) P(n | 0) + int_0^h f_Z(y - x) P(n | y) dy,

which is a Laplace convolution with drift ``-mu`` restricted to ``[0, h)``
plus a reflected term.  The pieces of ``[0, h)`` are aligned with the knots
``h - k mu`` (``mu > 0``) or ``-k mu`` (``mu < 0``), so every step is exact.

Two parameter ranges collapse to one-piece scalar recursions and are also
available in that form: ``mu >= h`` (:func:`fet_mu_pos_high`) and
``-mu >= h`` (:func:`fet_mu_neg_high`).  For ``mu = 0``
:func:`mu_zero_recursion` runs the coefficient recursion in the monomial basis.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import numpy as np

from .convolution import anchor_of, laplace_convolve
from .core import (
    ExpPolySegment,
    FetDistribution,
    FetPmf,
    LaplaceParams,
    ProcessConfig,
    RegimeTag,
    dispatch_fet_regime,
    segments_from_knots,
    snap_tol,
)
from .gammainc import factorial, gamma_upper_int

__all__ = [
    "FetRecursionState",
    "MeanExitTime",
    "pieces_count",
    "fet_knots",
    "initial_fet_state",
    "step_fet_mu_pos",
    "step_fet_mu_neg",
    "step_fet_mu_zero",
    "step_fet",
    "fet_mu_pos_high",
    "fet_mu_neg_high",
    "mu_zero_recursion",
    "fet_distribution",
    "fet_pmf",
    "fet_values",
    "fet_cdf",
    "mean_fet",
    "basis_coefficients",
]


def _require_h(cfg: ProcessConfig) -> float:
    if cfg.h is None:
        raise ValueError("exit-time computations need a boundary h")
    return cfg.h


def pieces_count(mu: float, h: float, n: int) -> int:
    """Number of pieces of ``P(n | .)``.

    ``mu > 0``: ``min(n + 1, r)`` with ``r`` the least integer such that
    ``r mu >= h``.  ``mu < 0``: ``min(n, r)`` with ``r`` the least integer such
    that ``-r mu > h``.  Otherwise 1.
    """
    tol = snap_tol(h)
    if mu > 0 and mu < h - tol:
        r = math.ceil(h / mu - tol / mu)
        while (r - 1) * mu >= h - tol:
            r -= 1
        return min(n + 1, r)
    if mu < 0 and -mu < h - tol:
        r = math.floor(h / -mu) + 1
        while (r - 1) * -mu > h + tol:
            r -= 1
        return min(n, r)
    return 1


def fet_knots(mu: float, h: float, n: int) -> list[tuple[float, float]]:
    """Pieces of ``[0, h)`` carrying ``P(n | .)``; empty pieces are dropped."""
    k = pieces_count(mu, h, n)
    if k == 1:
        return [(0.0, h)]
    if mu > 0:
        knots = [0.0] + [h - (k - i) * mu for i in range(1, k)] + [h]
    else:
        knots = [-i * mu for i in range(k)] + [h]
    return segments_from_knots(knots, snap_tol(h))


@dataclass(frozen=True)
class FetRecursionState:
    n: int
    regime: RegimeTag
    pmf: FetPmf
    cfg: ProcessConfig

    @property
    def pieces(self) -> tuple:
        return self.pmf.segments

    @property
    def scale_exponent(self) -> float:
        """``log(2^n sigma^{n-1})``, the textbook normalization of ``P(n | .)``."""
        return self.n * math.log(2.0) + (self.n - 1) * math.log(self.cfg.sigma)


def _first_pmf(cfg: ProcessConfig, regime: RegimeTag) -> FetPmf:
    """``P(1 | x) = P(Z >= h - x)``."""
    h, mu, sigma = cfg.h, cfg.mu, cfg.sigma
    segs = []
    for lo, hi in fet_knots(mu, h, 1):
        if hi <= h - mu + snap_tol(h):
            # x + mu < h: (1/2) e^{(x + mu - h)/sigma}
            seg = ExpPolySegment(lo, hi, lo, [1.0], [0.0], 0.0, (mu - h) / sigma - math.log(2.0))
        else:
            # 1 - (1/2) e^{(h - x - mu)/sigma}
            L = max(0.0, (h - mu) / sigma - math.log(2.0))
            seg = ExpPolySegment(lo, hi, lo, [0.0], [-0.5 * math.exp((h - mu) / sigma - L)],
                                 math.exp(-L), L)
        segs.append(seg.rebased(anchor_of(lo, hi)))
    return FetPmf(1, h, tuple(segs), regime, cfg.params)


def initial_fet_state(cfg: ProcessConfig) -> FetRecursionState:
    _require_h(cfg)
    regime = dispatch_fet_regime(cfg)
    return FetRecursionState(1, regime, _first_pmf(cfg, regime), cfg)


def _value_at_zero(seg: ExpPolySegment) -> tuple[float, float]:
    t = -seg.shift
    m = float(np.polyval(seg.a[::-1], t) + np.polyval(seg.b[::-1], t)) + seg.const_term
    return m, seg.log_scale


def _advance(state: FetRecursionState) -> FetRecursionState:
    cfg, pmf = state.cfg, state.pmf
    h, mu, sigma = cfg.h, cfg.mu, cfg.sigma
    tol = snap_tol(h)
    p0, e0 = _value_at_zero(pmf.segments[0])

    def reflected(lo, hi):
        # P(Z <= -x) P(n | 0)
        if lo >= -mu - tol:
            return [("b", 0.5 * p0, e0 - mu / sigma)]
        if hi <= -mu + tol:
            return [("c", p0, e0), ("a", -0.5 * p0, e0 + mu / sigma)]
        raise ValueError("target piece straddles the reflection kink")

    n1 = state.n + 1
    segs = laplace_convolve(pmf.segments, sigma, -mu, fet_knots(mu, h, n1),
                            extra=reflected, tol=tol)
    return FetRecursionState(n1, state.regime, FetPmf(n1, h, tuple(segs), state.regime, cfg.params), cfg)


def _require(state: FetRecursionState, *regimes: RegimeTag):
    if state.regime not in regimes:
        raise ValueError(f"state is in regime {state.regime.value}, expected "
                         + " or ".join(r.value for r in regimes))


def step_fet_mu_pos(state: FetRecursionState) -> FetRecursionState:
    _require(state, RegimeTag.FetMuPosLtH, RegimeTag.FetMuPosGeH)
    return _advance(state)


def step_fet_mu_neg(state: FetRecursionState) -> FetRecursionState:
    _require(state, RegimeTag.FetMuNeg, RegimeTag.FetMuNegGeH)
    return _advance(state)


def step_fet_mu_zero(state: FetRecursionState) -> FetRecursionState:
    _require(state, RegimeTag.FetMuZero)
    return _advance(state)


_STEPPERS = {
    RegimeTag.FetMuPosLtH: step_fet_mu_pos,
    RegimeTag.FetMuPosGeH: step_fet_mu_pos,
    RegimeTag.FetMuNeg: step_fet_mu_neg,
    RegimeTag.FetMuNegGeH: step_fet_mu_neg,
    RegimeTag.FetMuZero: step_fet_mu_zero,
}


def step_fet(state: FetRecursionState) -> FetRecursionState:
    return _STEPPERS[state.regime](state)


# ---------------------------------------------------------------------------
# scalar and monomial-basis recursions


def fet_mu_pos_high(cfg: ProcessConfig, n: int) -> tuple[float, float]:
    """``(eta_n, beta_n)`` with ``P(n | x) = eta_n + beta_n e^{-x/sigma}`` when ``mu >= h``."""
    if dispatch_fet_regime(cfg) is not RegimeTag.FetMuPosGeH:
        raise ValueError("closed form requires 0 < h <= mu")
    if n < 1:
        raise ValueError("n must be >= 1")
    h, mu, s = cfg.h, cfg.mu, cfg.sigma
    if n == 1:
        return 1.0, -0.5 * math.exp((h - mu) / s)
    q = 0.5 + h / (2.0 * s)
    beta = (0.5 * math.exp((h - (n - 1) * mu) / s) * q ** (n - 2)
            - 0.5 * math.exp((h - n * mu) / s) * q ** (n - 1))
    return 0.0, beta


def fet_mu_neg_high(cfg: ProcessConfig, n: int) -> tuple[float, float]:
    """``(eta_n, alpha_n)`` with ``P(n | x) = eta_n + alpha_n e^{x/sigma}`` when ``-mu >= h``."""
    if dispatch_fet_regime(cfg) is not RegimeTag.FetMuNegGeH:
        raise ValueError("scalar recursion requires 0 < h <= -mu")
    if n < 1:
        raise ValueError("n must be >= 1")
    h, mu, s = cfg.h, cfg.mu, cfg.sigma
    alpha, eta = 0.5 * math.exp((mu - h) / s), 0.0
    for _ in range(n - 1):
        alpha, eta = (0.5 * math.exp(mu / s) * (h / s - 1.0) * alpha
                      - 0.5 * math.exp((mu - h) / s) * eta), alpha + eta
    return eta, alpha


def mu_zero_recursion(sigma: float, h: float, n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Monomial coefficients ``(alpha_k, beta_k)`` for ``k = 1..n`` when ``mu = 0``.

    ``P(k | x) = (2^k sigma^{k-1})^{-1} [sum_j alpha_j x^j e^{x/sigma}
    + sum_j beta_j x^j e^{-x/sigma}]`` with ``alpha`` of length ``k`` and
    ``beta`` of length ``k - 1`` (a single zero at ``k = 1``).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    half = sigma / 2.0
    alpha, beta = np.array([math.exp(-h / sigma)]), np.zeros(1)
    out = [(alpha, beta)]
    for k in range(1, n):
        # k is the current index; build k + 1
        nb = k - 1  # beta has degrees 0..k-2
        a_new = np.zeros(k + 1)
        b_new = np.zeros(k)
        for j in range(1, k + 1):
            a_new[j] = -math.fsum(alpha[m] * (-half) ** (m - j + 1) * factorial(m) / factorial(j)
                                  for m in range(j - 1, k))
        for j in range(1, k):
            b_new[j] = math.fsum(beta[m] * half ** (m - j + 1) * factorial(m) / factorial(j)
                                 for m in range(j - 1, nb))
        a_new[0] = math.fsum(
            [alpha[m] * (h ** (m + 1) / (m + 1) + half ** (m + 1) * (-1) ** m * factorial(m))
             for m in range(k)]
            + [-beta[m] * half ** (m + 1) * gamma_upper_int(m + 1, 2.0 * h / sigma)
               for m in range(nb)])
        b_new[0] = math.fsum(
            [-alpha[m] * half ** (m + 1) * (-1) ** m * factorial(m) for m in range(k)]
            + [beta[m] * half ** (m + 1) * factorial(m) for m in range(nb)]
            + [sigma * (alpha[0] + (beta[0] if nb else 0.0))])
        alpha, beta = a_new, b_new
        out.append((alpha, beta))
    return out


# ---------------------------------------------------------------------------
# cached tables and derived quantities


_cache: dict[tuple, list[FetPmf]] = {}
_cache_lock = threading.Lock()


def fet_distribution(cfg: ProcessConfig, n_max: int) -> FetDistribution:
    """``P(1 | .) .. P(n_max | .)``, computed once per ``(mu, sigma, h)`` and extended on demand."""
    h = _require_h(cfg)
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    key = (cfg.mu, cfg.sigma, h)
    with _cache_lock:
        chain = _cache.get(key)
        if chain is None:
            chain = _cache[key] = [initial_fet_state(cfg).pmf]
        if len(chain) < n_max:
            regime = chain[0].regime
            state = FetRecursionState(len(chain), regime, chain[-1], cfg)
            while len(chain) < n_max:
                state = step_fet(state)
                chain.append(state.pmf)
        pieces = tuple(chain[:n_max])
    return FetDistribution(h, pieces, pieces[0].regime, cfg.params)


def fet_pmf(cfg: ProcessConfig, n: int) -> FetPmf:
    """``x -> P(n | x)`` on ``[0, h)``."""
    if int(n) != n or n < 1:
        raise ValueError(f"n must be an integer >= 1, got {n!r}")
    return fet_distribution(cfg, int(n)).pmf(int(n))


def fet_values(cfg: ProcessConfig, x: float, n_max: int) -> np.ndarray:
    """``[P(1 | x), ..., P(n_max | x)]``."""
    h = _require_h(cfg)
    if not 0 <= x < h:
        raise ValueError(f"starting point must lie in [0, h={h})")
    return fet_distribution(cfg, n_max).values(x)


def fet_cdf(cfg: ProcessConfig, x: float, n_max: int) -> np.ndarray:
    """Partial sums ``P(N_x <= n)`` for ``n = 1..n_max``."""
    return np.cumsum(fet_values(cfg, x, n_max))


@dataclass(frozen=True)
class MeanExitTime:
    mean: float
    n_terms: int
    tail_bound: float
    ratio: float


def mean_fet(cfg: ProcessConfig, x: float | None = None, rel_tol: float = 1e-10,
             n_cap: int = 5000) -> MeanExitTime:
    """``E[N_x]`` by summing ``n P(n | x)`` until a geometric tail bound is below ``rel_tol``.

    The ratio is the largest of the last ten consecutive ratios ``P(n+1)/P(n)``.
    The bound ``P(N) sum_{k>=1} (N + k) r^k`` is added to ``tail_bound``, not to ``mean``.
    Raises if the ratio is not below one by ``n_cap`` terms.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    x = cfg.x if x is None else x
    h = _require_h(cfg)
    if not 0 <= x < h:
        raise ValueError(f"starting point must lie in [0, h={h})")
    p: list[float] = []
    r = math.nan
    while len(p) < n_cap:
        n = min(n_cap, max(32, len(p) + len(p) // 2))
        dist = fet_distribution(cfg, n)
        p.extend(float(dist.pmf(k)(x)) for k in range(len(p) + 1, n + 1))
        last = np.array(p[-11:])
        N = len(p)
        partial = math.fsum(k * v for k, v in enumerate(p, 1))
        if np.all(last == 0):
            return MeanExitTime(partial, N, 0.0, 0.0)
        if np.all(last > 0):
            r = float(np.max(last[1:] / last[:-1]))
            if r < 1.0:
                bound = p[-1] * (N * r / (1 - r) + r / (1 - r) ** 2)
                if bound < rel_tol * partial:
                    return MeanExitTime(partial, N, bound, r)
    raise RuntimeError(
        f"mean exit time did not converge within {n_cap} terms "
        f"(last tail ratio estimate {r:.6g})")


def basis_coefficients(pmf: FetPmf) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """Per-piece ``(alpha, beta, eta)`` in the textbook normalization.

    Each piece reads ``(2^n sigma^{n-1})^{-1} sum_j (alpha_j e^{x/sigma} +
    beta_j e^{-x/sigma}) (x + s)^j + eta`` with ``s = n mu`` for ``mu >= 0``
    and ``s = (n - 1) mu`` for ``mu < 0``.
    """
    n, mu, sigma = pmf.n, pmf.params.mu, pmf.params.sigma
    s = n * mu if mu >= 0 else (n - 1) * mu
    log_pref = n * math.log(2.0) + (n - 1) * math.log(sigma)
    out = []
    for seg in pmf.segments:
        r = seg.rebased(-s)
        f = math.exp(r.log_scale + log_pref)
        out.append((r.a * f, r.b * f, r.const_term * math.exp(r.log_scale)))
    return out
