"""Law of a reflected Laplace random walk after n steps.

W_n = max(0, W_{n-1} + Z_n) with Z ~ Laplace(mu, sigma) piles mass at zero
and spreads the rest over exponential-polynomial pieces.  This script prints
the atom, the mean and the variance for a few drifts and shows how the
density settles when the drift is negative.
"""

# %%
import numpy as np

from lindley_laplace import LaplaceParams, ProcessConfig
from lindley_laplace import density

# %% [markdown]
# Positive drift: the walk moves away from zero, the atom shrinks and the
# spread grows with n.

# %%
cfg = ProcessConfig(LaplaceParams(0.3, 1.0), x=1.0)
print("mu=0.3 sigma=1 x=1")
print(f"{'n':>3} {'atom':>10} {'mean':>10} {'var':>10} {'pieces':>7}")
for n in (1, 2, 3, 5, 9):
    d = density.density_at(cfg, n)
    print(f"{n:>3} {d.atom:10.6f} {density.moments(d, 1):10.6f} "
          f"{density.variance(d):10.6f} {len(d.segments):>7}")

# %% [markdown]
# The atom and the density just above zero are tied together when the drift
# is nonnegative: c_n = sigma f_n(0+).

# %%
for n in (2, 5, 9):
    d = density.density_at(cfg, n)
    print(f"n={n}: c_n={d.atom:.12f}  sigma*f_n(0+)="
          f"{d.sigma * density.continuous_part_limit_at_zero(d):.12f}")

# %% [markdown]
# Negative drift: the lowest piece (0, x + n mu) disappears once x + n mu
# drops below zero, and successive laws get closer together.

# %%
cfg = ProcessConfig(LaplaceParams(-0.3, 1.0), x=1.0)
u = np.linspace(0.0, 15.0, 3001)
prev = density.density_at(cfg, 1)(u)
for n in range(2, 10):
    d = density.density_at(cfg, n)
    cur = d(u)
    print(f"n={n}: pieces={len(d.segments)} atom={d.atom:.6f} "
          f"sup|f_n - f_(n-1)|={np.max(np.abs(cur - prev)):.2e}")
    prev = cur

# %% [markdown]
# Stronger negative drift keeps more mass at zero.

# %%
for mu in (-1.2, -0.7, -0.3):
    d = density.density_at(ProcessConfig(LaplaceParams(mu, 1.0), x=1.0), 9)
    print(f"mu={mu:+.1f}: c_9={d.atom:.6f}  P(W_9 <= 2)={density.cdf(d, 2.0):.6f}")
