"""Exact convolution of exponential-polynomial segments with the Laplace kernel.

Given segments ``g_k`` on ``[p_k, q_k]`` and a drift ``d``, computes

    H(u) = 1/(2 sigma) sum_k int g_k(y) exp(-|u - d - y| / sigma) dy

on each requested target interval, again as an exponential-polynomial
segment.  With ``v = u - d``, a source segment lies entirely left of ``v``,
entirely right of it, or contains it; in the last case the integral is
split at ``v`` and both halves are written with :func:`poly_exp_antiderivative`.

All contributions are carried as (mantissa, log-exponent) pairs and summed
with :func:`math.fsum` relative to the largest exponent, so tails many
hundreds of orders of magnitude below unity stay representable.
"""

from __future__ import annotations

import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import ExpPolySegment, taylor_shift
from .gammainc import poly_antiderivative, poly_exp_antiderivative

__all__ = [
    "Contribution",
    "laplace_convolve",
    "segment_integral",
    "weighted_integral",
    "log_sum",
    "anchor_of",
]

# (slot, coefficient array or scalar, log-exponent); slot in {"a", "b", "c"}
Contribution = tuple


def anchor_of(lo: float, hi: float) -> float:
    """Expansion point used for a segment: its midpoint, or ``lo`` if unbounded."""
    return lo if math.isinf(hi) else 0.5 * (lo + hi)


def _polyval(p: np.ndarray, t: float) -> float:
    acc = 0.0
    for c in reversed(p.tolist()):
        acc = acc * t + c
    return acc


def _nonzero(p) -> bool:
    if isinstance(p, np.ndarray):
        return bool(p.any())
    return p != 0.0


def _exp_poly_terms(p: np.ndarray, lam: float, s: float, lo: float, hi: float,
                    base: float) -> list[tuple[float, float]]:
    """Terms of ``int_lo^hi p(y - s) e^{lam y} dy`` times ``e^{base}``."""
    if not _nonzero(p):
        return []
    if lam == 0.0:
        if math.isinf(hi):
            raise ValueError("divergent integral of a polynomial over an unbounded interval")
        q = poly_antiderivative(p)
        return [(_polyval(q, hi - s) - _polyval(q, lo - s), base)]
    P = poly_exp_antiderivative(p, lam)
    out = []
    if math.isinf(hi):
        if lam > 0:
            raise ValueError("divergent exponential integral over an unbounded interval")
    else:
        out.append((_polyval(P, hi - s), base + lam * hi))
    out.append((-_polyval(P, lo - s), base + lam * lo))
    return out


def log_sum(terms: Iterable[tuple[float, float]]) -> tuple[float, float]:
    """Collapse ``sum m_i e^{E_i}`` to a single ``(m, E)`` pair."""
    terms = [(m, e) for m, e in terms if m != 0.0 and e != -math.inf]
    if not terms:
        return 0.0, 0.0
    emax = max(e for _, e in terms)
    return math.fsum(m * math.exp(e - emax) for m, e in terms), emax


def _times_power(p: np.ndarray, s: float, k: int) -> np.ndarray:
    """Coefficients of ``p(t) * (t + s)^k``."""
    out = np.asarray(p, dtype=float)
    for _ in range(k):
        nxt = np.zeros(out.size + 1)
        nxt[1:] += out
        nxt[:-1] += s * out
        out = nxt
    return out


def weighted_integral(seg: ExpPolySegment, sigma: float, lo: float, hi: float,
                      k: int = 0, power: int = 0) -> tuple[float, float]:
    """``int_lo^hi g(y) y^power e^{k y / sigma} dy`` as ``(m, E)``."""
    if hi <= lo:
        return 0.0, 0.0
    s, L = seg.shift, seg.log_scale
    terms = []
    a = _times_power(seg.a, s, power)
    b = _times_power(seg.b, s, power)
    c = _times_power(np.array([seg.const_term]), s, power)
    terms += _exp_poly_terms(a, (1 + k) / sigma, s, lo, hi, L)
    terms += _exp_poly_terms(b, (k - 1) / sigma, s, lo, hi, L)
    terms += _exp_poly_terms(c, k / sigma, s, lo, hi, L)
    return log_sum(terms)


def segment_integral(seg: ExpPolySegment, sigma: float, lo: float | None = None,
                     hi: float | None = None) -> float:
    """Plain integral of a segment over ``[lo, hi]`` (defaults: its own bounds)."""
    lo = seg.lo if lo is None else max(lo, seg.lo)
    hi = seg.hi if hi is None else min(hi, seg.hi)
    m, e = weighted_integral(seg, sigma, lo, hi)
    return m * math.exp(e) if m else 0.0


class _Accumulator:
    """Collects coefficient contributions for one output segment."""

    def __init__(self):
        self.items: dict[str, list] = {"a": [], "b": [], "c": []}

    def add(self, slot: str, coef, expo: float):
        if expo == -math.inf or not _nonzero(coef):
            return
        if not isinstance(coef, np.ndarray):
            coef = np.array([float(coef)])
        self.items[slot].append((coef, expo))

    def finish(self) -> tuple[dict[str, np.ndarray], float]:
        exps = [e for lst in self.items.values() for _, e in lst]
        if not exps:
            return {"a": np.zeros(1), "b": np.zeros(1), "c": np.zeros(1)}, 0.0
        emax = max(exps)
        out = {}
        for slot, lst in self.items.items():
            if not lst:
                out[slot] = np.zeros(1)
                continue
            size = max(c.size for c, _ in lst)
            mat = np.zeros((len(lst), size))
            for row, (coef, e) in enumerate(lst):
                mat[row, : coef.size] = coef * math.exp(e - emax)
            out[slot] = mat[0] if len(lst) == 1 else np.array([math.fsum(col) for col in mat.T])
        scale = max(float(np.max(np.abs(v))) for v in out.values())
        if scale == 0.0:
            return out, 0.0
        return {k: v / scale for k, v in out.items()}, emax + math.log(scale)


def _classify(seg: ExpPolySegment, vlo: float, vhi: float, tol: float) -> str:
    if seg.hi <= vlo + tol:
        return "left"
    if seg.lo >= vhi - tol:
        return "right"
    if seg.lo <= vlo + tol and seg.hi >= vhi - tol:
        return "inside"
    raise ValueError(
        f"target [{vlo}, {vhi}] straddles source knot of [{seg.lo}, {seg.hi}]; "
        "targets must be aligned with shifted source knots"
    )


def laplace_convolve(
    segments: Sequence[ExpPolySegment],
    sigma: float,
    drift: float,
    targets: Sequence[tuple[float, float]],
    extra: Callable[[float, float], list[Contribution]] | None = None,
    tol: float = 1e-12,
) -> list[ExpPolySegment]:
    """Convolve with the Laplace kernel of location ``drift`` and scale ``sigma``.

    ``extra(lo, hi)`` may supply additional per-target contributions (for
    point masses or reflected mass); each is ``(slot, coef, log_exponent)``.
    Output polynomials are expanded about :func:`anchor_of` their interval.
    """
    d = drift
    log2s = math.log(2.0 * sigma)
    # int g e^{y/sigma} and int g e^{-y/sigma}, cached per source segment
    left_w = [None] * len(segments)
    right_w = [None] * len(segments)
    out = []
    for tlo, thi in targets:
        vlo, vhi = tlo - d, thi - d
        acc = _Accumulator()
        shift_out = None
        for i, seg in enumerate(segments):
            where = _classify(seg, vlo, vhi, tol)
            if where == "left":
                # source entirely below the kink: kernel is e^{-(v - y)/sigma}
                if left_w[i] is None:
                    left_w[i] = weighted_integral(seg, sigma, seg.lo, seg.hi, k=1)
                m, e = left_w[i]
                acc.add("b", m, e + d / sigma - log2s)
            elif where == "right":
                if right_w[i] is None:
                    right_w[i] = weighted_integral(seg, sigma, seg.lo, seg.hi, k=-1)
                m, e = right_w[i]
                acc.add("a", m, e - d / sigma - log2s)
            else:
                if shift_out is not None:
                    raise ValueError("target interval lies inside two source segments")
                shift_out = seg.shift + d
                _add_inside(acc, seg, sigma, d, log2s)
        if extra is not None:
            for slot, coef, e in extra(tlo, thi):
                acc.add(slot, coef, e)
        coefs, L = acc.finish()
        shift = shift_out if shift_out is not None else anchor_of(tlo, thi)
        a, b = coefs["a"], coefs["b"]
        if math.isinf(thi):
            if _nonzero(a):
                raise AssertionError("unbounded target acquired an e^{u/sigma} component")
            a = np.zeros(1)
        seg_out = ExpPolySegment(tlo, thi, shift, a, b, float(coefs["c"][0]), L)
        out.append(seg_out.rebased(anchor_of(tlo, thi)))
    return out


def _add_inside(acc: _Accumulator, seg: ExpPolySegment, sigma: float, d: float, log2s: float):
    """Contribution of a source segment that contains the kernel's kink."""
    p, q, s, L = seg.lo, seg.hi, seg.shift, seg.log_scale
    A, B, c = seg.a, seg.b, seg.const_term
    lam = 2.0 / sigma
    ea = L - d / sigma - log2s
    eb = L + d / sigma - log2s
    if _nonzero(A):
        PA = poly_exp_antiderivative(A, lam)
        QA = poly_antiderivative(A)
        # A'(t) gets PA - QA; B' constant gets -e^{2p/sigma} PA(p - s)
        diff = np.zeros(max(PA.size, QA.size))
        diff[: PA.size] += PA
        diff[: QA.size] -= QA
        acc.add("a", diff, ea)
        acc.add("b", -_polyval(PA, p - s), eb + lam * p)
        if not math.isinf(q):
            acc.add("a", _polyval(QA, q - s), ea)
    if _nonzero(B):
        PB = poly_exp_antiderivative(B, -lam)
        QB = poly_antiderivative(B)
        diff = np.zeros(max(PB.size, QB.size))
        diff[: QB.size] += QB
        diff[: PB.size] -= PB
        acc.add("b", diff, eb)
        acc.add("b", -_polyval(QB, p - s), eb)
        if not math.isinf(q):
            acc.add("a", _polyval(PB, q - s), ea - lam * q)
    if c != 0.0:
        acc.add("c", c, L)
        acc.add("b", -c * sigma, eb + p / sigma)
        if not math.isinf(q):
            acc.add("a", -c * sigma, ea - q / sigma)
