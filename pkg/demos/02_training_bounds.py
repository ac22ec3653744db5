"""Compare the filter and smoother with fully known symbols; these are
the performance floors every semi-blind receiver is judged against.

Run:  python demos/02_training_bounds.py
"""

import numpy as np

from mmep import (Frame, SystemConfig, build_model, delta_h_db,
                  make_constellation, make_pilots, observe, run_training,
                  simulate_trace)

cfg = SystemConfig(L=4, K=4, M=16, T_p=36, T_d=0, a=0.1, rho=0.0, f_d=0.02,
                   trials=1, pilot_design="random")
model = build_model(cfg)
c = make_constellation(4, cfg.energy)

print(f"frame of {cfg.frame_len} known symbols, M={cfg.M}, K={cfg.K}, "
      f"f_d={cfg.f_d}")
print(f"{'seed':>4} {'filter dB':>10} {'smoother dB':>12}")
for seed in range(5):
    rng = np.random.default_rng(seed)
    symbols = make_pilots(cfg.K, cfg.T_p, c, "random", rng=rng)
    frame = Frame(symbols, symbols[:, :0])
    trace = simulate_trace(model, cfg.frame_len, rng)
    obs = observe([trace], [frame], model, "gaussian", rng=rng)
    filt = run_training(obs, frame, model, "filter")
    smth = run_training(obs, frame, model, "smoother")
    print(f"{seed:>4} {delta_h_db(trace, filt.channel_means):>10.2f} "
          f"{delta_h_db(trace, smth.channel_means):>12.2f}")

print("\nthe smoother refines every step with future observations, so it"
      "\nnever does worse than the filter on the same realization")
