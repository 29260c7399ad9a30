"""Independent reference computations: Monte Carlo and grid quadrature.

Nothing here uses the segment algebra.  The Monte Carlo sampler runs the
Lindley recursion directly; the quadrature routines discretize the
Chapman-Kolmogorov step for the position law and the first-step
decomposition of the exit-time pmf.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve

from .core import LaplaceParams, ProcessConfig

__all__ = [
    "BLOCK",
    "default_threads",
    "sample_laplace",
    "McConfig",
    "McResult",
    "simulate",
    "simulate_exit_times",
    "GridFunction",
    "default_domain",
    "ck_convolve",
    "ck_chain",
    "ExitGrid",
    "exit_seed",
    "exit_recursion_step",
    "exit_chain",
]

BLOCK = 1 << 16
THREADS_ENV = "LINDLEY_THREADS"


def default_threads() -> int:
    raw = os.environ.get(THREADS_ENV)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    return os.cpu_count() or 1


def sample_laplace(params: LaplaceParams, uniform):
    """Inverse-CDF transform of uniforms in (0, 1)."""
    u = np.asarray(uniform, dtype=float)
    if np.any((u <= 0) | (u >= 1)):
        raise ValueError("uniforms must lie strictly inside (0, 1)")
    c = u - 0.5
    out = params.mu - params.sigma * np.sign(c) * np.log1p(-2.0 * np.abs(c))
    return out if out.ndim else float(out)


def _block_rng(seed: int, block: int) -> np.random.Generator:
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, block], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _increments(rng: np.random.Generator, params: LaplaceParams, size: int) -> np.ndarray:
    # open interval (0, 1): shift the [0, 1) draws away from 0
    u = rng.random(size)
    u[u == 0.0] = 0.5
    return sample_laplace(params, u)


def _run_blocks(fn, n_blocks: int, threads: int | None):
    threads = threads or default_threads()
    if threads == 1 or n_blocks == 1:
        return [fn(b) for b in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(n_blocks)))


@dataclass(frozen=True)
class McConfig:
    trajectories: int
    seed: int
    n_max: int
    bins: int = 200
    domain_hi: float = 20.0
    threads: int | None = None

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValueError("trajectories must be >= 1")
        if self.bins < 10:
            raise ValueError("bins must be >= 10")
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if not self.domain_hi > 0:
            raise ValueError("domain_hi must be positive")

    @property
    def edges(self) -> np.ndarray:
        """Bin edges; the last bin extends to infinity."""
        e = np.linspace(0.0, self.domain_hi, self.bins + 1)
        e[-1] = np.inf
        return e


@dataclass(frozen=True, eq=False)
class McResult:
    trajectories: int
    edges: np.ndarray
    atom_counts: np.ndarray  # (n_max,)
    histogram_counts: np.ndarray  # (n_max, bins), strictly positive values only
    fet_counts: np.ndarray  # (n_max,)

    @property
    def atom_freq_by_n(self) -> np.ndarray:
        return self.atom_counts / self.trajectories

    @property
    def histogram_by_n(self) -> np.ndarray:
        return self.histogram_counts / self.trajectories

    @property
    def fet_freq(self) -> np.ndarray:
        return self.fet_counts / self.trajectories

    @property
    def std_errors(self) -> dict[str, np.ndarray]:
        def se(p):
            return np.sqrt(p * (1.0 - p) / self.trajectories)

        return {"atom": se(self.atom_freq_by_n), "histogram": se(self.histogram_by_n),
                "fet": se(self.fet_freq)}

    def cdf_at_edges(self, n: int) -> np.ndarray:
        """Empirical ``P(W_n <= e)`` at the finite bin edges."""
        cum = np.concatenate([[0.0], np.cumsum(self.histogram_counts[n - 1])])
        return (self.atom_counts[n - 1] + cum[:-1]) / self.trajectories


def simulate(cfg: ProcessConfig, mc: McConfig) -> McResult:
    """Run ``mc.trajectories`` paths of ``W_n = max(0, W_{n-1} + Z_n)`` up to ``n_max``.

    Each block of :data:`BLOCK` paths draws from its own Philox stream keyed by
    ``(seed, block)``; counts are integers, so the result does not depend on
    the number of threads.
    """
    edges = mc.edges
    h = cfg.h
    n_blocks = -(-mc.trajectories // BLOCK)

    def one(block: int):
        size = min(BLOCK, mc.trajectories - block * BLOCK)
        rng = _block_rng(mc.seed, block)
        w = np.full(size, cfg.x, dtype=float)
        exited = np.zeros(size, dtype=bool)
        atom = np.zeros(mc.n_max, dtype=np.int64)
        hist = np.zeros((mc.n_max, mc.bins), dtype=np.int64)
        fet = np.zeros(mc.n_max, dtype=np.int64)
        for n in range(mc.n_max):
            w = np.maximum(0.0, w + _increments(rng, cfg.params, size))
            zero = w == 0.0
            atom[n] = np.count_nonzero(zero)
            hist[n] = np.histogram(w[~zero], bins=edges)[0]
            if h is not None:
                new = (~exited) & (w >= h)
                fet[n] = np.count_nonzero(new)
                exited |= new
        return atom, hist, fet

    parts = _run_blocks(one, n_blocks, mc.threads)
    atom = sum(p[0] for p in parts)
    hist = sum(p[1] for p in parts)
    fet = sum(p[2] for p in parts)
    return McResult(mc.trajectories, edges, atom, hist, fet)


def simulate_exit_times(cfg: ProcessConfig, trajectories: int, seed: int,
                        n_cap: int = 10_000, threads: int | None = None) -> np.ndarray:
    """First ``n`` with ``W_n >= h`` per path; ``n_cap + 1`` marks paths still inside."""
    if cfg.h is None:
        raise ValueError("exit times need a boundary h")
    n_blocks = -(-trajectories // BLOCK)

    def one(block: int):
        size = min(BLOCK, trajectories - block * BLOCK)
        rng = _block_rng(seed, block)
        w = np.full(size, cfg.x, dtype=float)
        out = np.full(size, n_cap + 1, dtype=np.int64)
        alive = np.arange(size)
        for n in range(1, n_cap + 1):
            if not alive.size:
                break
            # fixed draw count per step keeps streams independent of exits
            z = _increments(rng, cfg.params, size)[alive]
            w = np.maximum(0.0, w + z)
            hit = w >= cfg.h
            out[alive[hit]] = n
            alive, w = alive[~hit], w[~hit]
        return out

    return np.concatenate(_run_blocks(one, n_blocks, threads))


# ---------------------------------------------------------------------------
# Chapman-Kolmogorov quadrature for the position law


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Cell averages of a density on ``[0, U]`` plus an atom at 0.

    ``values[i]`` is the average over ``[i delta, (i+1) delta]``.  A pure
    point mass at ``dirac_at`` (the law of ``W_0``) has no cells.
    """

    delta: float
    upper: float
    values: np.ndarray
    atom: float
    dirac_at: float | None = None
    n: int = 0

    @classmethod
    def dirac(cls, x: float, upper: float, delta: float) -> "GridFunction":
        cells = int(round(upper / delta))
        return cls(delta, cells * delta, np.zeros(cells), 1.0 if x == 0 else 0.0,
                   None if x == 0 else x)

    @property
    def knots(self) -> np.ndarray:
        """Cell centres."""
        return (np.arange(self.values.size) + 0.5) * self.delta

    @property
    def total_mass(self) -> float:
        if self.dirac_at is not None:
            return 1.0
        return self.atom + math.fsum(self.values * self.delta)


def _int_cdf(params: LaplaceParams, lo, hi) -> np.ndarray:
    """``int_lo^hi F_Z(t) dt`` for ``lo <= hi``, split at the median."""
    mu, s = params.mu, params.sigma
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    a, b = np.minimum(lo, mu), np.minimum(hi, mu)
    # below the median F = e^{w}/2
    below = 0.5 * s * np.exp((b - mu) / s) * -np.expm1((a - b) / s)
    a, b = np.maximum(lo, mu), np.maximum(hi, mu)
    # above the median F = 1 - e^{-w}/2
    above = (b - a) - 0.5 * s * np.exp(-(a - mu) / s) * -np.expm1(-(b - a) / s)
    return below + above


def _int_sf(params: LaplaceParams, lo, hi) -> np.ndarray:
    """``int_lo^hi P(Z > t) dt`` for ``lo <= hi``."""
    mu, s = params.mu, params.sigma
    lo, hi = np.broadcast_arrays(np.asarray(lo, float), np.asarray(hi, float))
    a, b = np.minimum(lo, mu), np.minimum(hi, mu)
    below = (b - a) - 0.5 * s * np.exp((b - mu) / s) * -np.expm1((a - b) / s)
    a, b = np.maximum(lo, mu), np.maximum(hi, mu)
    above = 0.5 * s * np.exp(-(a - mu) / s) * -np.expm1(-(b - a) / s)
    return below + above


def _interval_prob(params: LaplaceParams, lo, hi) -> np.ndarray:
    """``P(lo < Z <= hi)`` without subtracting numbers close to 1."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    right = lo >= params.mu
    return np.where(right, np.asarray(params.sf(lo)) - np.asarray(params.sf(hi)),
                    np.asarray(params.cdf(hi)) - np.asarray(params.cdf(lo)))


def _transfer(params: LaplaceParams, k: np.ndarray, delta: float) -> np.ndarray:
    """Mass moved from a uniform unit mass on a cell to the cell ``k`` places up."""
    mu, s = params.mu, params.sigma
    t = k * delta
    far = 2.0 * (s / delta) * np.exp(-np.abs(t - mu) / s) * np.sinh(0.5 * delta / s) ** 2
    near = np.abs(t - mu) < delta
    if np.any(near):
        tn = t[near]
        far[near] = (_int_cdf(params, tn, tn + delta) - _int_cdf(params, tn - delta, tn)) / delta
    return far


def default_domain(cfg: ProcessConfig, n: int) -> float:
    """Upper truncation point whose tail mass is far below 1e-12 for ``n`` steps."""
    return cfg.x + n * max(cfg.mu, 0.0) + (30.0 + 8.0 * n) * cfg.sigma


def ck_convolve(prev: GridFunction, params: LaplaceParams, tail_tol: float = 1e-12) -> GridFunction:
    """One Chapman-Kolmogorov step with exact cell-to-cell transfer masses.

    Mass is treated as uniform within each cell, so transfers depend only
    on the cell offset and are second differences of the integrated Laplace
    CDF.  Mass leaving ``[0, U]`` is measured and must stay below ``tail_tol``.
    """
    d, cells = prev.delta, prev.values.size
    edges = np.arange(cells + 1) * d
    if prev.dirac_at is not None:
        x = prev.dirac_at
        mass = _interval_prob(params, edges[:-1] - x, edges[1:] - x)
        atom = float(params.cdf(-x))
        lost = float(params.sf(edges[-1] - x))
    else:
        m = prev.values * d
        k = np.arange(-(cells - 1), cells)
        transfer = _transfer(params, k.astype(float), d)
        mass = fftconvolve(m, transfer)[cells - 1: 2 * cells - 1]
        if prev.atom:
            mass = mass + prev.atom * _interval_prob(params, edges[:-1], edges[1:])
        # cell j -> atom: (1/d) int_{cell} F_Z(-y) dy
        to_atom = _int_cdf(params, -edges[1:], -edges[:-1]) / d
        atom = math.fsum(m * to_atom) + prev.atom * float(params.cdf(0.0))
        # cell j -> beyond U: (1/d) int_{cell} P(Z > U - y) dy
        beyond = _int_sf(params, edges[-1] - edges[1:], edges[-1] - edges[:-1]) / d
        lost = math.fsum(m * beyond) + prev.atom * float(params.sf(edges[-1]))
    if lost > tail_tol:
        raise ValueError(f"tail mass {lost:.3g} beyond U={edges[-1]:.4g}; enlarge the domain")
    return GridFunction(d, prev.upper, np.maximum(mass, 0.0) / d, atom, None, prev.n + 1)


def ck_chain(cfg: ProcessConfig, n_max: int, delta: float = 1e-3,
             upper: float | None = None) -> list[GridFunction]:
    """``[f_1, ..., f_{n_max}]`` on a common grid."""
    upper = default_domain(cfg, n_max) if upper is None else upper
    g = GridFunction.dirac(cfg.x, upper, delta)
    out = []
    for _ in range(n_max):
        g = ck_convolve(g, cfg.params)
        out.append(g)
    return out


# ---------------------------------------------------------------------------
# Exit-time quadrature


@dataclass(frozen=True, eq=False)
class ExitGrid:
    """``x -> P(n | x)`` sampled on a uniform node grid over ``[0, h]``.

    The value at ``h`` is the left limit.  ``breaks`` lists node indices
    where the function may have a derivative jump.
    """

    nodes: np.ndarray
    values: np.ndarray
    n: int = 1
    breaks: tuple = field(default=())


def _node_index(y: float, delta: float, size: int) -> int | None:
    k = y / delta
    r = round(k)
    if abs(k - r) < 1e-9 * max(1.0, abs(k)) and 0 <= r < size:
        return int(r)
    return None


def _structural_breaks(params: LaplaceParams, h: float, delta: float, size: int) -> tuple | None:
    """Nodes at ``h - k mu`` and ``-k mu`` inside ``[0, h]``; ``None`` if off-grid."""
    mu = params.mu
    pts = {0, size - 1}
    if mu != 0:
        k = 1
        while k * abs(mu) < h:
            for y in (h - k * mu, -k * mu):
                if 0 < y < h:
                    i = _node_index(y, delta, size)
                    if i is None:
                        return None
                    pts.add(i)
            k += 1
    return tuple(sorted(pts))


def _cumulative_panels(f: np.ndarray, delta: float, breaks: tuple) -> np.ndarray:
    """``C[j] = int_0^{y_j} f`` with fourth-order panels that never straddle a break."""
    out = np.zeros(f.size)
    inc = np.zeros(f.size - 1)
    for s0, s1 in zip(breaks[:-1], breaks[1:]):
        g = f[s0: s1 + 1]
        m = g.size - 1  # number of intervals
        if m == 1:
            seg = np.array([0.5 * (g[0] + g[1])])
        elif m == 2:
            seg = np.array([5 * g[0] + 8 * g[1] - g[2], -g[0] + 8 * g[1] + 5 * g[2]]) / 12.0
        else:
            seg = np.empty(m)
            seg[1:-1] = (-g[:-3] + 13 * g[1:-2] + 13 * g[2:-1] - g[3:]) / 24.0
            seg[0] = (9 * g[0] + 19 * g[1] - 5 * g[2] + g[3]) / 24.0
            seg[-1] = (g[-4] - 5 * g[-3] + 19 * g[-2] + 9 * g[-1]) / 24.0
        inc[s0:s1] = seg * delta
    out[1:] = np.cumsum(inc)
    return out


def exit_seed(cfg: ProcessConfig, points: int = 4001) -> ExitGrid:
    """``P(1 | x) = P(x + Z >= h)`` on the node grid."""
    h = cfg.h
    nodes = np.linspace(0.0, h, points)
    vals = np.asarray(cfg.params.sf(h - nodes), dtype=float)
    delta = h / (points - 1)
    return ExitGrid(nodes, vals, 1, _structural_breaks(cfg.params, h, delta, points) or ())


def exit_recursion_step(prev: ExitGrid, cfg: ProcessConfig) -> ExitGrid:
    """``P(n+1 | x) = P(Z <= -x) P(n | 0) + int_0^h f_Z(y - x) P(n | y) dy``.

    The kernel kink at ``y = x + mu`` is split exactly.  When ``mu`` and the
    structural breaks fall on nodes, fourth-order panels are used between
    breaks; otherwise a cubic spline antiderivative is used.
    """
    p = cfg.params
    h, sigma, mu = cfg.h, p.sigma, p.mu
    y = prev.nodes
    size = y.size
    delta = h / (size - 1)
    # scaled integrands keep exponentials bounded by 1 on [0, h]
    g_up = prev.values * np.exp((y - h) / sigma)
    g_dn = prev.values * np.exp(-y / sigma)
    kink = np.clip(y + mu, 0.0, h)
    breaks = _structural_breaks(p, h, delta, size)
    k = abs(mu) / delta
    shift = int(round(k)) if abs(k - round(k)) < 1e-9 * max(1.0, k) else None
    if breaks is not None and shift is not None:
        c_up = _cumulative_panels(g_up, delta, breaks)
        c_dn = _cumulative_panels(g_dn, delta, breaks)
        idx = np.clip(np.arange(size) + (shift if mu >= 0 else -shift), 0, size - 1)
        below_up, below_dn = c_up[idx], c_dn[idx]
    else:
        s_up = CubicSpline(y, g_up).antiderivative()
        s_dn = CubicSpline(y, g_dn).antiderivative()
        below_up, below_dn = s_up(kink) - s_up(0.0), s_dn(kink) - s_dn(0.0)
        c_dn = np.array([0.0, s_dn(h) - s_dn(0.0)])
    total_dn = c_dn[-1]
    # y < x + mu: e^{(y - x - mu)/sigma};  y > x + mu: e^{-(y - x - mu)/sigma}
    left = below_up * np.exp((h - y - mu) / sigma)
    right = (total_dn - below_dn) * np.exp(np.minimum((y + mu) / sigma, 700.0))
    right = np.where(y + mu >= h, 0.0, right)
    left = np.where(y + mu <= 0, 0.0, left)
    vals = (left + right) / (2.0 * sigma) + np.asarray(p.cdf(-y)) * prev.values[0]
    return ExitGrid(y, vals, prev.n + 1, prev.breaks)


def exit_chain(cfg: ProcessConfig, n_max: int, points: int = 4001) -> list[ExitGrid]:
    g = exit_seed(cfg, points)
    out = [g]
    while len(out) < n_max:
        g = exit_recursion_step(g, cfg)
        out.append(g)
    return out
