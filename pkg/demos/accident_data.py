"""Goodness-of-fit test of the bivariate Hermite model on the bundled accident counts.

Run: python3 demos/accident_data.py
"""

import numpy as np

from hermite_gof import FitOptions, fit_mle, load_accidents, pmf_table, run_gof_command
from hermite_gof.harness import format_report

data = load_accidents()
print(f"{data.n} pairs, mean x = {data.x.mean():.3f}, mean y = {data.y.mean():.3f}")

# Maximum likelihood fit, lambda3 free and pinned to 0
for fix in (False, True):
    res = fit_mle(data, FitOptions(fix_lambda3=fix))
    th = res.theta_hat
    print(
        f"fix_lambda3={fix!s:5}  loglik = {res.loglik:.4f}  "
        f"theta = ({th.mu:.4f}, {th.sigma2:g}, {th.lambda1:.4f}, {th.lambda2:.4f}, {th.lambda3:.4f})"
    )

# Observed vs fitted counts for the corner of the table
res = fit_mle(data)
fitted = pmf_table(res.theta_hat, 3, 3).probs * data.n
observed = np.zeros((4, 4))
for x, y in zip(data.x, data.y):
    if x <= 3 and y <= 3:
        observed[x, y] += 1
print("\nobserved / fitted counts, rows x = 0..3, columns y = 0..3")
for r in range(4):
    print("  " + "  ".join(f"{observed[r, c]:4.0f}/{fitted[r, c]:5.1f}" for c in range(4)))

# Parametric bootstrap test with weight (a1, a2) = (1, 0)
print()
rep = run_gof_command(data, a1=1, a2=0, B=500, seed=1)
print(format_report(rep))
