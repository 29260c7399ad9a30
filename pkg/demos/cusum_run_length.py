"""CUSUM detection of an upward shift in Laplace data.

The log-likelihood ratio of the tilted alternative is again Laplace, so the
CUSUM statistic is a reflected Laplace walk and its in-control run length is
a first exit time.
"""

# %%
import numpy as np

from lindley_laplace import LaplaceParams
from lindley_laplace import cusum

spec = cusum.CusumSpec(LaplaceParams(0.0, 1.0), theta=0.5, threshold=3.0)
llr = cusum.llr_params(spec)
print(f"b(theta) = {cusum.log_mgf(spec):.7f}")
print(f"LLR increments ~ Laplace({llr.mu:.7f}, {llr.sigma})")
print(f"post-change mean = {cusum.post_change_mean(spec):.4f}")

# %% [markdown]
# A false alarm within 100 observations happens about 40% of the time at
# this threshold.

# %%
p = cusum.run_length_distribution(spec, 0.0, 400)
for n in (10, 50, 100, 200, 400):
    print(f"P(RL <= {n:3d}) = {p[:n].sum():.5f}")

# %%
rl = cusum.simulate_run_lengths(spec, 0.0, 100_000, seed=1, n_cap=100)
print(f"simulated P(RL <= 100) = {np.mean(rl <= 100):.5f}")

# %% [markdown]
# After the change the detector fires within a few observations.

# %%
rl = cusum.simulate_run_lengths(spec, 0.0, 100_000, seed=2, n_cap=1000, post_change=True)
print(f"mean detection delay = {rl.mean():.3f} (median {np.median(rl):.0f})")
