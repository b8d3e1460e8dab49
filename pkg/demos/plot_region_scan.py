"""
Scanning the symmetric diagonal
===============================

Sweep equal per-user rates and record where a witness stops being found.
"""
# %%
from aloha_recurrence.harness import SweepSpec, region_scan

grid = tuple(round(0.10 + 0.005 * k, 3) for k in range(11))
table = region_scan(SweepSpec(axes=(grid,), dim=2, diagonal=True, mc="auto"),
                    replications=200, horizon=5000)
for row in table.rows:
    print(row.lam, row.witness_found, round(row.best_f, 5), row.verdict, row.mc_mean)
