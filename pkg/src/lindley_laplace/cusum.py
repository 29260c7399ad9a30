"""CUSUM detection of a mean shift in Laplace observations.

Pre-change observations follow ``Laplace(mu, sigma)``; the post-change law
is the exponential tilt ``g(x) = f(x) exp(theta x - b(theta))`` with
``b(theta) = mu theta - log(1 - sigma^2 theta^2)``.  The log-likelihood
ratio of one observation is ``theta X - b(theta)``, again Laplace under the
pre-change law, so the CUSUM statistic started at ``x0`` is a Lindley process
and its run length is a first exit time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import fet
from .core import LaplaceParams, ProcessConfig
from .oracle import BLOCK, _block_rng, _run_blocks

__all__ = [
    "THETA_MIN",
    "CusumSpec",
    "log_mgf",
    "llr_params",
    "post_change_mean",
    "detector_config",
    "run_length_distribution",
    "average_run_length",
    "sample_post_change",
    "simulate_run_lengths",
]

THETA_MIN = 1e-6


@dataclass(frozen=True)
class CusumSpec:
    base: LaplaceParams
    theta: float
    threshold: float

    def __post_init__(self):
        s = self.base.sigma
        if not abs(self.theta * s) < 1:
            raise ValueError(f"need |theta * sigma| < 1, got theta={self.theta}, sigma={s}")
        if not self.theta >= THETA_MIN:
            raise ValueError(f"theta must be at least {THETA_MIN} (positive shift of the mean)")
        if not (self.threshold > 0 and math.isfinite(self.threshold)):
            raise ValueError("threshold must be positive and finite")


def log_mgf(spec: CusumSpec) -> float:
    """``b(theta) = log E[e^{theta X}]`` under the pre-change law."""
    mu, s, th = spec.base.mu, spec.base.sigma, spec.theta
    return mu * th - math.log1p(-(s * th) ** 2)


def llr_params(spec: CusumSpec) -> LaplaceParams:
    """Pre-change law of ``theta X - b(theta)``."""
    return LaplaceParams(spec.theta * spec.base.mu - log_mgf(spec), spec.base.sigma * spec.theta)


def post_change_mean(spec: CusumSpec) -> float:
    s, th = spec.base.sigma, spec.theta
    return spec.base.mu + 2.0 * s * s * th / (1.0 - (s * th) ** 2)


def detector_config(spec: CusumSpec, x0: float = 0.0) -> ProcessConfig:
    return ProcessConfig(llr_params(spec), x0, spec.threshold)


def run_length_distribution(spec: CusumSpec, x0: float, n_max: int) -> np.ndarray:
    """In-control ``P(run length = n)`` for ``n = 1..n_max``."""
    return fet.fet_values(detector_config(spec, x0), x0, n_max)


def average_run_length(spec: CusumSpec, x0: float = 0.0, rel_tol: float = 1e-10) -> fet.MeanExitTime:
    return fet.mean_fet(detector_config(spec, x0), x0, rel_tol, n_cap=20_000)


def sample_post_change(spec: CusumSpec, uniform) -> np.ndarray:
    """Inverse-CDF draws from the tilted law.

    The tilt of a Laplace density is an asymmetric Laplace around ``mu`` with
    rates ``1/sigma - theta`` above and ``1/sigma + theta`` below; the mass
    above ``mu`` is ``(1 + sigma theta) / 2``.
    """
    u = np.asarray(uniform, dtype=float)
    mu, s, th = spec.base.mu, spec.base.sigma, spec.theta
    up, down = 1.0 / s - th, 1.0 / s + th
    p_below = (1.0 - s * th) / 2.0
    below = u < p_below
    out = np.empty_like(u)
    out[below] = mu + np.log(u[below] / p_below) / down
    out[~below] = mu - np.log1p(-(u[~below] - p_below) / (1.0 - p_below)) / up
    return out


def simulate_run_lengths(spec: CusumSpec, x0: float, trajectories: int, seed: int,
                         n_cap: int = 10_000, post_change: bool = False,
                         threads: int | None = None) -> np.ndarray:
    """Run lengths of the raw detector ``S_n = max(0, S_{n-1} + theta X_n - b)``.

    Observations are drawn directly (pre-change Laplace, or the tilted law
    when ``post_change``) and transformed, rather than sampling the
    log-likelihood ratio law.  ``n_cap + 1`` marks paths without an alarm.
    """
    b = log_mgf(spec)
    th, h = spec.theta, spec.threshold
    n_blocks = -(-trajectories // BLOCK)

    def draw(rng, size):
        u = rng.random(size)
        u[u == 0.0] = 0.5
        if post_change:
            return sample_post_change(spec, u)
        c = u - 0.5
        return spec.base.mu - spec.base.sigma * np.sign(c) * np.log1p(-2.0 * np.abs(c))

    def one(block: int):
        size = min(BLOCK, trajectories - block * BLOCK)
        rng = _block_rng(seed, block)
        s = np.full(size, x0, dtype=float)
        out = np.full(size, n_cap + 1, dtype=np.int64)
        alive = np.arange(size)
        for n in range(1, n_cap + 1):
            if not alive.size:
                break
            x = draw(rng, size)[alive]
            s = np.maximum(0.0, s + th * x - b)
            hit = s >= h
            out[alive[hit]] = n
            alive, s = alive[~hit], s[~hit]
        return out

    return np.concatenate(_run_blocks(one, n_blocks, threads))
