"""Three-cell downlink power control: value iteration rounds, then the Gaussian and heavy-tailed runs side by side."""

import numpy as np

from levyhjb import netsim

cfg = netsim.NetworkConfig()          # reference setup, alpha = 1.8
weights = netsim.CostWeights()
art = netsim.run_downlink(cfg, weights, rounds=20, seed=0,
                          progress=lambda r, ro: print(f"round {r:3d}  total cost {ro.value[0]:.4f}"))
print("round 0 cost", art.total_costs()[0])
print("SINR >= r_th fraction per UE: round 0", art.sinr_fraction(0), "last", art.sinr_fraction(-1))
ex = netsim.noise_power_exceedance(art)
print(f"noise above power in {ex['total']} of {ex['slots']} link-steps")

comp = netsim.gaussian_levy_comparison(cfg, seed=0, rounds=10)
for name, s in comp.summary.items():
    print(f"{name:8s} alpha={s['alpha']}  action changes {s['action_changes']:3d}  SINR IQR {s['sinr_iqr']:.3f}")

art.write("downlink_out")
print("CSV files written to downlink_out/")
