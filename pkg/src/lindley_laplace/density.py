"""Exact law of the Lindley process ``W_n`` at a fixed time ``n``.

``W_n`` has an atom ``c_n`` at 0 and a continuous part that is a finite
union of exponential-polynomial segments.  One recursion step convolves the
continuous part and the atom with the Laplace kernel (drift ``mu``) and
collects the mass pushed below zero into the new atom.

The partition of ``(0, inf)`` depends on the sign of ``mu`` and on how
``mu`` compares with ``-x``:

* ``mu >= 0``: knots ``0, mu, 2 mu, ..., (n-1) mu, n mu + x``;
* ``-x < mu < 0``: knots ``0, max(0, n mu + x)``;
* ``mu <= -x``: a single segment.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .convolution import anchor_of, laplace_convolve, log_sum, weighted_integral
from .core import (
    ExpPolySegment,
    LaplaceParams,
    MixedDensity,
    ProcessConfig,
    RegimeTag,
    dispatch_position_regime,
    segments_from_knots,
    snap_tol,
)

__all__ = [
    "Subcase",
    "PositionRecursionState",
    "position_knots",
    "one_step_law",
    "initial_state",
    "step_mu_nonneg",
    "step_mu_neg_small",
    "step_mu_neg_large",
    "step",
    "density_at",
    "density_sequence",
    "cdf",
    "total_mass",
    "moments",
    "variance",
    "corollary_c_identity",
    "basis_coefficients",
    "continuous_part_limit_at_zero",
]


class Subcase(Enum):
    """Whether the lowest piece ``(0, n mu + x)`` is present when ``-x < mu < 0``."""

    PieceOneAlive = "PieceOneAlive"
    PieceOneDead = "PieceOneDead"


@dataclass(frozen=True)
class PositionRecursionState:
    n: int
    regime: RegimeTag
    density: MixedDensity
    cfg: ProcessConfig
    subcase: Subcase | None = None

    def __post_init__(self):
        if self.density.n != self.n:
            raise ValueError("state index and density index disagree")


def position_knots(cfg: ProcessConfig, n: int) -> list[tuple[float, float]]:
    """Partition of ``(0, inf)`` carrying the continuous part of ``W_n``."""
    if n < 1:
        raise ValueError("the continuous part exists only for n >= 1")
    mu, x = cfg.mu, cfg.x
    tol = snap_tol(x)
    regime = dispatch_position_regime(cfg)
    if regime is RegimeTag.PosMuNonNeg:
        knots = [i * mu for i in range(n)] + [n * mu + x, math.inf]
    elif regime is RegimeTag.PosMuNegSmall:
        knots = [0.0, max(0.0, n * mu + x), math.inf]
    else:
        knots = [0.0, math.inf]
    return segments_from_knots(knots, tol)


def _subcase(cfg: ProcessConfig, n: int, regime: RegimeTag) -> Subcase | None:
    if regime is not RegimeTag.PosMuNegSmall:
        return None
    return Subcase.PieceOneAlive if cfg.x + n * cfg.mu > snap_tol(cfg.x) else Subcase.PieceOneDead


def _log_half_atom(params: LaplaceParams, y: float) -> tuple[float, float]:
    """``P(Z <= -y)`` as ``(mantissa, exponent)``."""
    w = (y + params.mu) / params.sigma
    if w > 0:
        return 0.5, -w
    return 1.0 - 0.5 * math.exp(w), 0.0


def one_step_law(cfg: ProcessConfig) -> MixedDensity:
    """Law of ``W_1``: Laplace density shifted to ``x + mu`` and folded at 0."""
    p = cfg.params
    sigma, kink = p.sigma, cfg.x + p.mu
    log2s = math.log(2.0 * sigma)
    segs = []
    for lo, hi in position_knots(cfg, 1):
        if hi <= kink + snap_tol(cfg.x):
            seg = ExpPolySegment(lo, hi, lo, [1.0], [0.0], 0.0, -kink / sigma - log2s)
        else:
            seg = ExpPolySegment(lo, hi, lo, [0.0], [1.0], 0.0, kink / sigma - log2s)
        segs.append(seg.rebased(anchor_of(lo, hi)))
    m, e = _log_half_atom(p, cfg.x)
    regime = dispatch_position_regime(cfg)
    return MixedDensity(1, m * math.exp(e), tuple(segs), regime, p, cfg.x)


def initial_state(cfg: ProcessConfig) -> PositionRecursionState:
    regime = dispatch_position_regime(cfg)
    return PositionRecursionState(1, regime, one_step_law(cfg), cfg, _subcase(cfg, 1, regime))


def _atom_mass(d: MixedDensity) -> float:
    """``P(W_{n+1} = 0)`` from the law of ``W_n``."""
    p = d.params
    sigma, mu = p.sigma, p.mu
    terms = []
    if d.atom > 0:
        m, e = _log_half_atom(p, 0.0)
        terms.append((d.atom * m, e))
    split = -mu
    for seg in d.segments:
        # mass from y > -mu: (1/2) e^{-(y+mu)/sigma}
        lo = max(seg.lo, split)
        if lo < seg.hi:
            m, e = weighted_integral(seg, sigma, lo, seg.hi, k=-1)
            terms.append((0.5 * m, e - mu / sigma))
        # mass from y <= -mu: 1 - (1/2) e^{(y+mu)/sigma}
        hi = min(seg.hi, split)
        if seg.lo < hi:
            m, e = weighted_integral(seg, sigma, seg.lo, hi, k=0)
            terms.append((m, e))
            m, e = weighted_integral(seg, sigma, seg.lo, hi, k=1)
            terms.append((-0.5 * m, e + mu / sigma))
    m, e = log_sum(terms)
    return m * math.exp(e) if m else 0.0


def _advance(state: PositionRecursionState) -> PositionRecursionState:
    d, cfg = state.density, state.cfg
    p = d.params
    sigma, mu = p.sigma, p.mu
    log2s = math.log(2.0 * sigma)
    atom = d.atom

    def point_mass(lo, hi):
        # Laplace kernel centred at 0 + mu, weighted by the atom
        if atom == 0.0:
            return []
        tol = snap_tol(cfg.x)
        if hi <= mu + tol:
            return [("a", atom, -mu / sigma - log2s)]
        if lo >= mu - tol:
            return [("b", atom, mu / sigma - log2s)]
        raise ValueError("target straddles the atom's kernel kink")

    n1 = state.n + 1
    targets = position_knots(cfg, n1)
    segs = laplace_convolve(d.segments, sigma, mu, targets, extra=point_mass,
                            tol=snap_tol(cfg.x))
    for seg in segs:
        if seg.unbounded and np.any(seg.a != 0.0):
            raise AssertionError("unbounded segment carries e^{u/sigma} terms")
    nxt = MixedDensity(n1, _atom_mass(d), tuple(segs), state.regime, p, cfg.x)
    return PositionRecursionState(n1, state.regime, nxt, cfg, _subcase(cfg, n1, state.regime))


def _require(state: PositionRecursionState, regime: RegimeTag):
    if state.regime is not regime:
        raise ValueError(f"state is in regime {state.regime.value}, not {regime.value}")


def step_mu_nonneg(state: PositionRecursionState) -> PositionRecursionState:
    _require(state, RegimeTag.PosMuNonNeg)
    return _advance(state)


def step_mu_neg_small(state: PositionRecursionState) -> PositionRecursionState:
    _require(state, RegimeTag.PosMuNegSmall)
    return _advance(state)


def step_mu_neg_large(state: PositionRecursionState) -> PositionRecursionState:
    _require(state, RegimeTag.PosMuNegLarge)
    return _advance(state)


_STEPPERS = {
    RegimeTag.PosMuNonNeg: step_mu_nonneg,
    RegimeTag.PosMuNegSmall: step_mu_neg_small,
    RegimeTag.PosMuNegLarge: step_mu_neg_large,
}


def step(state: PositionRecursionState) -> PositionRecursionState:
    return _STEPPERS[state.regime](state)


_cache: dict[tuple, list[MixedDensity]] = {}
_cache_lock = threading.Lock()


def density_sequence(cfg: ProcessConfig, n_max: int) -> list[MixedDensity]:
    """``[f_1, ..., f_{n_max}]``; chains are cached per ``(mu, sigma, x)``."""
    if n_max < 1:
        return []
    key = (cfg.mu, cfg.sigma, cfg.x)
    with _cache_lock:
        chain = _cache.get(key)
        if chain is None:
            chain = _cache[key] = [one_step_law(cfg)]
        if len(chain) < n_max:
            regime = chain[0].regime
            state = PositionRecursionState(len(chain), regime, chain[-1], cfg,
                                           _subcase(cfg, len(chain), regime))
            while len(chain) < n_max:
                state = step(state)
                chain.append(state.density)
        return chain[:n_max]


def density_at(cfg: ProcessConfig, n: int) -> MixedDensity:
    """Law of ``W_n``; ``n = 0`` gives the Dirac mass at the starting point."""
    if int(n) != n or n < 0:
        raise ValueError(f"n must be a nonnegative integer, got {n!r}")
    if n == 0:
        return MixedDensity(0, 1.0 if cfg.x == 0 else 0.0, (), dispatch_position_regime(cfg),
                            cfg.params, cfg.x, dirac_at=None if cfg.x == 0 else cfg.x)
    return density_sequence(cfg, int(n))[-1]


def _integrate(d: MixedDensity, upper: float = math.inf, power: int = 0) -> float:
    terms = []
    for seg in d.segments:
        hi = min(seg.hi, upper)
        if seg.lo < hi:
            terms.append(weighted_integral(seg, d.sigma, seg.lo, hi, power=power))
    m, e = log_sum(terms)
    return m * math.exp(e) if m else 0.0


def cdf(d: MixedDensity, u: float) -> float:
    """``P(W_n <= u)``; zero for ``u < 0``."""
    if u < 0:
        return 0.0
    if d.n == 0:
        return 1.0 if u >= d.x else 0.0
    return d.atom + _integrate(d, u)


def total_mass(d: MixedDensity) -> float:
    if d.n == 0:
        return 1.0
    return d.atom + _integrate(d)


def moments(d: MixedDensity, order: int) -> float:
    """``E[W_n^order]`` for ``order`` in {1, 2}."""
    if order not in (1, 2):
        raise ValueError("only first and second moments are provided")
    if d.n == 0:
        return d.x**order
    for seg in d.segments:
        if seg.unbounded and np.any(seg.a != 0.0):
            raise AssertionError("unbounded segment carries e^{u/sigma} terms")
    return _integrate(d, power=order)


def variance(d: MixedDensity) -> float:
    m1 = moments(d, 1)
    return moments(d, 2) - m1 * m1


def continuous_part_limit_at_zero(d: MixedDensity) -> float:
    """``f_n(0+)``."""
    if not d.segments:
        return 0.0
    return float(d.segments[0].evaluate(0.0, d.sigma))


def corollary_c_identity(d_next: MixedDensity) -> float:
    """``|c_n - sigma f_n(0+)|``, which vanishes whenever ``mu >= 0``."""
    if d_next.regime is not RegimeTag.PosMuNonNeg:
        raise ValueError("the atom/boundary-density identity holds only for mu >= 0")
    return abs(d_next.atom - d_next.sigma * continuous_part_limit_at_zero(d_next))


def basis_coefficients(d: MixedDensity) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per-segment ``(a, b)`` arrays in the textbook normalization.

    Each segment is written as ``(2 sigma)^{-n} sum_j (a_j e^{u/sigma} +
    b_j e^{-u/sigma}) (u - s)^j`` with ``s = n mu`` when ``mu > -x`` and
    ``s = (n-1) mu`` otherwise.
    """
    n = d.n
    if n < 1:
        raise ValueError("no continuous part at n = 0")
    mu = d.params.mu
    s = (n - 1) * mu if d.regime is RegimeTag.PosMuNegLarge else n * mu
    log_pref = n * math.log(2.0 * d.sigma)
    out = []
    for seg in d.segments:
        r = seg.rebased(s)
        f = math.exp(r.log_scale + log_pref)
        out.append((r.a * f, r.b * f))
    return out
