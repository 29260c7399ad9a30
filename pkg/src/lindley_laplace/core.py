"""Parameter objects, regime dispatch and the piecewise data model.

Every density and exit-time law computed by this package is a finite union
of *exponential-polynomial segments*

    g(u) = e^{L} [ A(u - s) e^{u/sigma} + B(u - s) e^{-u/sigma} + c ],

on an interval, with ``A``, ``B`` polynomials (coefficients in increasing
degree), ``s`` the polynomial anchor ("shift"), ``c`` a constant and ``L``
a common log-scale.  The class is closed under convolution with the Laplace
kernel, which is what makes the exact recursions possible.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

__all__ = [
    "LaplaceParams",
    "ProcessConfig",
    "RegimeTag",
    "ExpPolySegment",
    "MixedDensity",
    "FetPmf",
    "FetDistribution",
    "snap_tol",
    "dispatch_position_regime",
    "dispatch_fet_regime",
    "evaluate_mixed_density",
]


@dataclass(frozen=True)
class LaplaceParams:
    """Laplace increment law with location ``mu`` and scale ``sigma``."""

    mu: float
    sigma: float

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite, got {self.mu!r}")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be a positive finite number, got {self.sigma!r}")

    def mean(self) -> float:
        return self.mu

    def variance(self) -> float:
        return 2.0 * self.sigma**2

    def pdf(self, z):
        z = np.asarray(z, dtype=float)
        return np.exp(-np.abs(z - self.mu) / self.sigma) / (2.0 * self.sigma)

    def cdf(self, z):
        """P(Z <= z), computed without cancellation on either side."""
        z = np.asarray(z, dtype=float)
        w = (z - self.mu) / self.sigma
        left = 0.5 * np.exp(np.minimum(w, 0.0))
        right = 1.0 - 0.5 * np.exp(-np.maximum(w, 0.0))
        out = np.where(w <= 0, left, right)
        return out if out.ndim else float(out)

    def sf(self, z):
        """P(Z > z)."""
        z = np.asarray(z, dtype=float)
        w = (z - self.mu) / self.sigma
        right = 0.5 * np.exp(-np.maximum(w, 0.0))
        left = 1.0 - 0.5 * np.exp(np.minimum(w, 0.0))
        out = np.where(w >= 0, right, left)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class ProcessConfig:
    """Lindley process ``W_n = max(0, W_{n-1} + Z_n)`` started at ``W_0 = x``.

    ``h`` is the upper boundary used for first-exit-time computations.
    """

    params: LaplaceParams
    x: float = 0.0
    h: float | None = None

    def __post_init__(self):
        if not (self.x >= 0 and math.isfinite(self.x)):
            raise ValueError(f"starting point x must be finite and >= 0, got {self.x!r}")
        if self.h is not None:
            if not (self.h > 0 and math.isfinite(self.h)):
                raise ValueError(f"boundary h must be positive and finite, got {self.h!r}")
            if self.x >= self.h:
                raise ValueError(f"starting point x={self.x} must lie in [0, h={self.h})")

    @property
    def mu(self) -> float:
        return self.params.mu

    @property
    def sigma(self) -> float:
        return self.params.sigma

    def with_x(self, x: float) -> "ProcessConfig":
        return ProcessConfig(self.params, x, self.h)


class RegimeTag(Enum):
    """Parameter regime selecting which recursion applies."""

    PosMuNonNeg = "PosMuNonNeg"
    PosMuNegSmall = "PosMuNegSmall"
    PosMuNegLarge = "PosMuNegLarge"
    FetMuPosLtH = "FetMuPosLtH"
    FetMuPosGeH = "FetMuPosGeH"
    FetMuNeg = "FetMuNeg"
    FetMuNegGeH = "FetMuNegGeH"
    FetMuZero = "FetMuZero"

    @property
    def is_position(self) -> bool:
        return self.value.startswith("Pos")


def snap_tol(*scales: float) -> float:
    """Absolute tolerance used when comparing knots and regime boundaries."""
    return 1e-12 * max([1.0] + [abs(s) for s in scales if s is not None and math.isfinite(s)])


def dispatch_position_regime(cfg: ProcessConfig) -> RegimeTag:
    mu, x = cfg.mu, cfg.x
    if mu >= 0:
        return RegimeTag.PosMuNonNeg
    if mu <= -x:
        return RegimeTag.PosMuNegLarge
    return RegimeTag.PosMuNegSmall


def dispatch_fet_regime(cfg: ProcessConfig) -> RegimeTag:
    if cfg.h is None:
        raise ValueError("first-exit-time dispatch needs a boundary h")
    mu, h = cfg.mu, cfg.h
    tol = snap_tol(h, cfg.x)
    if mu == 0:
        return RegimeTag.FetMuZero
    if mu > 0:
        return RegimeTag.FetMuPosGeH if mu >= h - tol else RegimeTag.FetMuPosLtH
    return RegimeTag.FetMuNegGeH if -mu >= h - tol else RegimeTag.FetMuNeg


@dataclass(frozen=True, eq=False)
class ExpPolySegment:
    """One exponential-polynomial piece on ``[lo, hi]`` (``hi`` may be ``inf``).

    ``a`` and ``b`` hold polynomial coefficients in ``t = u - shift`` (increasing
    degree) multiplying ``e^{u/sigma}`` and ``e^{-u/sigma}``; ``const_term`` is
    the constant part; all three are multiplied by ``exp(log_scale)``.
    """

    lo: float
    hi: float
    shift: float
    a: np.ndarray
    b: np.ndarray
    const_term: float = 0.0
    log_scale: float = 0.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.a, dtype=float))
        b = np.atleast_1d(np.asarray(self.b, dtype=float))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)
        if not self.lo < self.hi:
            raise ValueError(f"empty segment [{self.lo}, {self.hi}]")
        if math.isinf(self.hi) and np.any(a != 0.0):
            raise ValueError("unbounded segment must have all e^{u/sigma} coefficients equal to 0")

    @property
    def unbounded(self) -> bool:
        return math.isinf(self.hi)

    @property
    def degree(self) -> int:
        return max(_degree(self.a), _degree(self.b))

    def evaluate(self, u, sigma: float):
        """Evaluate at ``u`` (scalar or array), ignoring the interval bounds."""
        u = np.asarray(u, dtype=float)
        t = u - self.shift
        out = np.zeros_like(u)
        if np.any(self.a != 0.0):
            out = out + np.polyval(self.a[::-1], t) * np.exp(self.log_scale + u / sigma)
        if np.any(self.b != 0.0):
            out = out + np.polyval(self.b[::-1], t) * np.exp(self.log_scale - u / sigma)
        if self.const_term != 0.0:
            out = out + self.const_term * math.exp(self.log_scale)
        return out

    def rebased(self, shift: float) -> "ExpPolySegment":
        """Same function with polynomials re-expanded about ``shift``."""
        delta = shift - self.shift
        return ExpPolySegment(
            self.lo, self.hi, shift, taylor_shift(self.a, delta), taylor_shift(self.b, delta),
            self.const_term, self.log_scale,
        )

    def rescaled(self, log_scale: float) -> "ExpPolySegment":
        """Same function with coefficients expressed relative to ``exp(log_scale)``."""
        f = math.exp(self.log_scale - log_scale)
        return ExpPolySegment(self.lo, self.hi, self.shift, self.a * f, self.b * f,
                              self.const_term * f, log_scale)

    def restricted(self, lo: float, hi: float) -> "ExpPolySegment":
        return ExpPolySegment(lo, hi, self.shift, self.a, self.b, self.const_term, self.log_scale)


def _degree(p: np.ndarray) -> int:
    nz = np.flatnonzero(p)
    return int(nz[-1]) if nz.size else 0


def taylor_shift(p, delta: float) -> np.ndarray:
    """Coefficients of ``q(t) = p(t + delta)`` (increasing degree)."""
    p = np.asarray(p, dtype=float)
    if delta == 0.0 or p.size <= 1:
        return p.copy()
    q = np.zeros_like(p)
    # Horner in polynomial arithmetic: q <- q * (t + delta) + p_j
    for c in p[::-1]:
        q[1:] = q[1:] * delta + q[:-1]
        q[0] = q[0] * delta + c
    return q


class _Piecewise:
    """Shared evaluation logic for ordered, contiguous segment lists."""

    segments: tuple
    sigma: float
    closed_right: bool  # True: intervals (lo, hi]; False: [lo, hi)

    def _locate(self, u: float) -> int:
        his = [s.hi for s in self.segments]
        if self.closed_right:
            i = bisect.bisect_left(his, u)
        else:
            i = bisect.bisect_right(his, u)
        return min(i, len(self.segments) - 1)

    def _eval_segments(self, u):
        u = np.asarray(u, dtype=float)
        if not self.segments:
            return np.zeros_like(u)
        his = np.array([s.hi for s in self.segments])
        side = "left" if self.closed_right else "right"
        idx = np.minimum(np.searchsorted(his, u, side=side), len(self.segments) - 1)
        out = np.zeros_like(u)
        for i in np.unique(idx):
            mask = idx == i
            out[mask] = self.segments[i].evaluate(u[mask], self.sigma)
        return out

    @property
    def knots(self) -> list[float]:
        if not self.segments:
            return []
        return [self.segments[0].lo] + [s.hi for s in self.segments]


@dataclass(frozen=True, eq=False)
class MixedDensity(_Piecewise):
    """Law of ``W_n``: an atom ``c_n`` at 0 plus a piecewise continuous part on (0, inf).

    For ``n = 0`` the law is a Dirac mass at the starting point; this is
    flagged by ``dirac_at`` and the segment list is empty.
    """

    n: int
    atom: float
    segments: tuple
    regime: RegimeTag
    params: LaplaceParams
    x: float = 0.0
    dirac_at: float | None = None
    closed_right: bool = field(default=True, repr=False)

    @property
    def sigma(self) -> float:
        return self.params.sigma

    def __call__(self, u):
        return evaluate_mixed_density(self, u)


def evaluate_mixed_density(d: MixedDensity, u):
    """Continuous part of ``f_n`` at ``u >= 0``; the atom is reported separately.

    At ``u = 0`` the right limit ``f_n(0+)`` is returned.
    """
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ValueError("the density of W_n is only defined for u >= 0")
    if d.dirac_at is not None:
        out = np.where(arr == d.dirac_at, np.inf, 0.0)
    else:
        out = d._eval_segments(np.maximum(arr, 0.0))
    return out if out.ndim else float(out)


@dataclass(frozen=True, eq=False)
class FetPmf(_Piecewise):
    """``x -> P(N_x = n)`` on ``[0, h)`` as a piecewise exponential-polynomial."""

    n: int
    h: float
    segments: tuple
    regime: RegimeTag
    params: LaplaceParams
    closed_right: bool = field(default=False, repr=False)

    @property
    def sigma(self) -> float:
        return self.params.sigma

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        if np.any(arr < 0) or np.any(arr >= self.h) or np.any(np.isnan(arr)):
            raise ValueError(f"starting point must lie in [0, h={self.h})")
        out = self._eval_segments(arr)
        return out if out.ndim else float(out)

    def limit_at_h(self) -> float:
        """Left limit of the pmf at ``x = h`` (used to close oracle grids)."""
        return float(self.segments[-1].evaluate(self.h, self.sigma))


@dataclass(frozen=True, eq=False)
class FetDistribution:
    """Per-``n`` exit-time pmfs ``P(1|.) .. P(n_max|.)`` for one ``(mu, sigma, h)``."""

    h: float
    pieces_by_n: tuple
    regime: RegimeTag
    params: LaplaceParams

    @property
    def n_max(self) -> int:
        return len(self.pieces_by_n)

    def pmf(self, n: int) -> FetPmf:
        if not 1 <= n <= self.n_max:
            raise IndexError(f"n={n} outside 1..{self.n_max}")
        return self.pieces_by_n[n - 1]

    def values(self, x: float) -> np.ndarray:
        """``[P(1|x), ..., P(n_max|x)]``."""
        return np.array([float(p(x)) for p in self.pieces_by_n])


def segments_from_knots(knots: Sequence[float], tol: float) -> list[tuple[float, float]]:
    """Consecutive ``(lo, hi)`` pairs, dropping intervals shorter than ``tol``."""
    out = []
    lo = knots[0]
    for hi in knots[1:]:
        if hi - lo > tol:
            out.append((lo, hi))
            lo = hi
    if out and lo != out[-1][1]:
        out[-1] = (out[-1][0], lo)
    return out
