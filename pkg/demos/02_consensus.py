"""
Average consensus without a balanced start
==========================================

With every local objective set to zero the method reduces to a consensus
protocol. Weights and estimates update in the same round, yet the nodes
still agree on the exact average of their starting values.
"""

import numpy as np

from wbsubgrad.analysis import fit_trace, log_linear_fit
from wbsubgrad.engine import run
from wbsubgrad.experiment import generate_graph
from wbsubgrad.objectives import zero_objective

g = generate_graph(20, 0.2, seed=1)
x0 = np.arange(20.0)
trace = run(g, zero_objective(20), x0=x0, rounds=1500, bound="exact")

err = np.max(np.abs(trace.x[:, :, 0] - x0.mean()), axis=1)
for t in (0, 10, 100, 500, 1500):
    print(f"round {t:>5}: max |x_i - mean(x0)| = {err[t]:.3e}")

# The error falls on a straight line in log scale until it hits round-off.
tail = np.arange(50, 400)
fit = log_linear_fit(tail, err[tail])
print(f"log-error slope {fit.slope:.4f} per round, R^2 = {fit.r2:.6f}")

# %%
# Products of the round matrices
# ------------------------------
# Each round multiplies the estimates by a column-stochastic Q(t). The
# running product approaches the averaging matrix J/n geometrically; the
# fitted (C, lambda) are the constants used by the bound checks.

series, geo = fit_trace(trace)
print(f"fitted C = {geo.C:.3f}, lambda = {geo.lam:.4f} over factors {geo.window}")
for k in (1, 10, 50, 100):
    print(f"  {k:>3} factors: deviation {series.deviations[k]:.2e}, "
          f"1.5 C lambda^k = {geo.bound(k, 1.5):.2e}")
