"""Produce a small antenna-count sweep and export it as CSV, the same
path the command line drives:

    mmep run --config configs/desk.json --out desk.csv --sweep M=8,16,32

Run:  python demos/04_sweep_to_csv.py
"""

from mmep import SystemConfig, run_sweep, write_csv

cfg = SystemConfig(L=4, K=4, M=16, T_p=4, T_d=16, a=0.1, rho=0.0, f_d=0.01,
                   trials=8, master_seed=3,
                   algorithms=("kf_m", "ks_m", "ep", "pcsi"))

rows = run_sweep(cfg, "M", [8, 16])
write_csv(rows, "demo_sweep.csv")

print("wrote demo_sweep.csv:")
with open("demo_sweep.csv") as fh:
    for line in fh:
        print(" ", line.rstrip())

print("\nrender figures from a CSV like this with the companion package:")
print("  mmep-plot --csv demo_sweep.csv --spec figures/specs/delta_vs_M.json"
      " --out delta_vs_M.png")
