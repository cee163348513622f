"""
Sweeping the modulating factor
==============================

Larger |gamma| gives the complement term more weight. The sweep keeps every
seed fixed and writes a gamma x dataset table.
"""

import statistics

from ccelab.harness import desk_config, gamma_sweep, report, write_gamma_table

gammas = [-1.0, -2.0, -5.0, -10.0, -50.0]
results = []
for seed in range(3):
    for kind, ratio in (("long_tailed", 100), ("step", 10)):
        results += gamma_sweep(desk_config("cce", epochs=30, seed=seed, kind=kind, ratio=ratio), gammas)

for g in gammas:
    baccs = [r.final_bacc for r in results if r.config_echo["loss_cfg"]["gamma"] == g]
    print(f"gamma {g:6.1f}  median bACC {statistics.median(baccs):.3f}")

report(results, "gamma_runs")
write_gamma_table(results, "gamma_runs/gamma_sweep.csv")
print(open("gamma_runs/gamma_sweep.csv").read())
