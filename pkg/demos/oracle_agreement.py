"""Cross-checks of the exact recursions against independent computations.

Three references are used: a finite-volume Chapman-Kolmogorov grid for the
position law, a first-step quadrature for exit probabilities, and plain
Monte Carlo of the walk.
"""

# %%
import numpy as np

from lindley_laplace import LaplaceParams, ProcessConfig
from lindley_laplace import density, fet, oracle

cfg = ProcessConfig(LaplaceParams(0.3, 1.0), x=1.0)
for delta in (4e-3, 2e-3, 1e-3):
    g = oracle.ck_chain(cfg, 5, delta=delta)[-1]
    d = density.density_at(cfg, 5)
    err = np.max(np.abs(d(g.knots) - g.values))
    print(f"grid delta={delta:.0e}: sup error at n=5 = {err:.2e}, atom error = {abs(d.atom - g.atom):.1e}")

# %%
for mu in (0.3, -0.3, 0.0):
    c = ProcessConfig(LaplaceParams(mu, 1.0), 1.0, 3.0)
    chain = oracle.exit_chain(c, 10)
    dist = fet.fet_distribution(c, 10)
    err = max(np.max(np.abs(dist.pmf(n)(g.nodes[:-1]) - g.values[:-1]))
              for n, g in enumerate(chain, 1))
    print(f"mu={mu:+.1f}: max exit-pmf discrepancy over n<=10 = {err:.1e}")

# %%
cfg = ProcessConfig(LaplaceParams(-0.3, 1.0), x=1.0, h=3.0)
res = oracle.simulate(cfg, oracle.McConfig(500_000, seed=42, n_max=9, bins=10, domain_hi=3.0))
d9 = density.density_at(cfg, 9)
se = res.std_errors["atom"][8]
print(f"c_9 exact {d9.atom:.5f}  simulated {res.atom_freq_by_n[8]:.5f} +- {se:.5f}")
p = fet.fet_values(cfg, 1.0, 9)
print("P(n|1) exact    ", np.array2string(p, precision=4))
print("P(n|1) simulated", np.array2string(res.fet_freq, precision=4))
