"""Run the full receiver family on a shared batch of desk-scale frames
and print the ordering that the batch metrics are expected to show:
training bounds below their semi-blind counterparts, the iterative
receiver between the smoothed bound and the one-shot smoother, and the
known-channel detector as the symbol-error floor.

Run:  python demos/03_receiver_comparison.py
"""

import math
from collections import defaultdict

import numpy as np

from mmep import SystemConfig, run_trial

cfg = SystemConfig(L=4, K=4, M=32, T_p=4, T_d=32, a=0.1, rho=0.0, f_d=0.01,
                   trials=10, master_seed=42)

ratios = defaultdict(list)
sers = defaultdict(list)
iters = defaultdict(list)
for i in range(cfg.trials):
    for alg, res in run_trial(cfg, i).items():
        if not math.isnan(res.delta_ratio):
            ratios[alg].append(res.delta_ratio)
        if not math.isnan(res.ser):
            sers[alg].append(res.ser)
        iters[alg].append(res.iterations)

print(f"{cfg.trials} trials at M={cfg.M}, K={cfg.K}, T_p={cfg.T_p}, "
      f"T_d={cfg.T_d}, a={cfg.a}, f_d={cfg.f_d}\n")
print(f"{'receiver':>8} {'delta_h (dB)':>13} {'SER':>10} {'iters':>6}")
for alg in ("kf_tm", "kf_m", "ks_tm", "ks_m", "ep", "pcsi"):
    db = (10 * math.log10(np.mean(ratios[alg]))
          if ratios[alg] else float("nan"))
    s = np.mean(sers[alg]) if sers[alg] else float("nan")
    print(f"{alg:>8} {db:>13.2f} {s:>10.4f} {np.mean(iters[alg]):>6.1f}")

print("\nexpected orderings: kf_tm <= kf_m; ks_tm <= ep <= ks_m <= kf_m "
      "(channel error);\n                    pcsi <= ep <= ks_m <= kf_m (SER)")
