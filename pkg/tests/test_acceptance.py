"""Acceptance suite.

One test per acceptance criterion, each printing a single PASS/FAIL
line. Oracle checks run at fixed tolerances; batch checks run frozen
seeds at reduced (desk) scale and verify the documented orderings and
monotone trends. Gap margins below 0.5 dB are flagged, not failed,
because several receivers legitimately coincide when detection is
error-free.
"""

import math
import time
from collections import defaultdict

import numpy as np
import pytest

from mmep.channel import build_model, simulate_trace
from mmep.config import SystemConfig
from mmep.frame import (Frame, make_constellation, make_pilots, observe,
                        random_data, symbol_vectors)
from mmep.harness import run_sweep, run_trial, write_csv
from mmep.inference import (GaussianBelief, combine_fr, gradcheck,
                            moment_match_exact, moment_match_hard,
                            obs_cavity, obs_factor_from, predict)
from mmep.receivers import run_ep, run_kf_m, run_training

from oracles import (kalman_filter, mixture_moments, random_belief,
                     rts_smoother)

DESK = dict(L=4, K=4, M=32, T_p=4, T_d=32, f_d=0.01, rho=0.0, a=0.1,
            trials=50)


def _report(name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {name}: {status}" + (f"  [{detail}]" if detail else ""))
    assert ok, f"{name}: {detail}"


def _flag(name, detail):
    print(f"ACCEPTANCE {name}: FLAG  [{detail}]")


def _scenario(cfg, seed):
    model = build_model(cfg)
    c = make_constellation(4, cfg.energy)
    rng = np.random.default_rng(seed)
    pilots = make_pilots(cfg.K, cfg.T_p, c, cfg.pilot_design, rng=rng)
    data = random_data(cfg.K, cfg.T_d, c, rng)
    frame = Frame(pilots, data)
    trace = simulate_trace(model, cfg.frame_len, rng)
    obs = observe([trace], [frame], model, "gaussian", rng=rng)
    return model, c, frame, trace, obs


def test_kalman_oracle_equivalence():
    """Training filter and smoother match the textbook recursions."""
    start = time.time()
    worst = 0.0
    for seed in range(20):
        cfg = SystemConfig(L=2, K=2, M=2, T_p=10, T_d=0, a=0.1, rho=0.3,
                           f_d=0.04, trials=1, pilot_design="random")
        model, c, frame, trace, obs = _scenario(cfg, seed)
        full = Frame(frame.symbols, frame.symbols[:, :0])
        filt = run_training(obs, full, model, "filter", keep_covs=True)
        smth = run_training(obs, full, model, "smoother", keep_covs=True)
        means, covs, _, _ = kalman_filter(
            obs, frame.symbols, cfg.M, model.ar_coeff,
            model.innovation_cov, model.noise_cov, model.chan_cov)
        smeans, scovs = rts_smoother(means, covs, model.ar_coeff,
                                     model.innovation_cov)
        worst = max(worst,
                    np.max(np.abs(filt.channel_means - means)),
                    np.max(np.abs(filt.channel_covs - covs)),
                    np.max(np.abs(smth.channel_means - smeans)),
                    np.max(np.abs(smth.channel_covs - scovs)))
    elapsed = time.time() - start
    _report("kalman-oracle-equivalence",
            worst <= 1e-8 and elapsed < 1.0,
            f"max deviation {worst:.2e}, {elapsed:.2f}s")


def test_moment_matching_oracle():
    """Exact moment matching equals brute-force mixture moments."""
    start = time.time()
    rng = np.random.default_rng(321)
    c = make_constellation(4, 1.0)
    worst = 0.0
    done = 0
    for k in (1, 2):
        cfg = SystemConfig(L=2, K=k, M=2, T_p=k, T_d=2, a=0.1, rho=0.2,
                           f_d=0.01, trials=1)
        model = build_model(cfg)
        cands = symbol_vectors(c, k)
        for _ in range(50):
            mean, cov = random_belief(rng, model.dim)
            y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
            res = moment_match_exact(GaussianBelief(mean, cov), y,
                                     model.noise_cov, cands)
            omean, ocov, ow, _ = mixture_moments(
                mean, cov, y, model.noise_cov, cands, None, cfg.M)
            worst = max(worst,
                        np.max(np.abs(res.posterior.mean - omean)),
                        np.max(np.abs(res.posterior.cov - ocov)),
                        np.max(np.abs(res.symbol_pmf - ow)))
            done += 1
    elapsed = time.time() - start
    _report("moment-matching-oracle",
            worst <= 1e-8 and done == 100 and elapsed < 10.0,
            f"{done} instances, max deviation {worst:.2e}, {elapsed:.1f}s")


def test_gradient_identities():
    """Analytic evidence sensitivities match finite differences."""
    rng = np.random.default_rng(99)
    c = make_constellation(4, 1.0)
    worst = 0.0
    for i in range(100):
        k = 1 if i % 2 == 0 else 2
        cfg = SystemConfig(L=2, K=k, M=2, T_p=k, T_d=2, a=0.1, rho=0.0,
                           f_d=0.01, trials=1)
        model = build_model(cfg)
        mean, cov = random_belief(rng, model.dim)
        y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        if i % 5 == 0:
            # pilot-style point mass
            cands = c.points[rng.integers(0, 4, size=k)][None, :]
            prior = np.array([1.0])
        else:
            cands, prior = symbol_vectors(c, k), None
        worst = max(worst, gradcheck(GaussianBelief(mean, cov), y,
                                     model.noise_cov, cands, prior))
    _report("gradient-identities", worst <= 1e-4,
            f"100 instances, max deviation {worst:.2e}")


def test_factor_algebra_round_trips():
    """Factor extraction inverts cavity division; information-form
    combination reproduces the measurement update."""
    rng = np.random.default_rng(17)
    c = make_constellation(4, 1.0)
    cfg = SystemConfig(L=2, K=2, M=2, T_p=2, T_d=2, a=0.1, rho=0.3,
                       f_d=0.01, trials=1)
    model = build_model(cfg)
    worst = 0.0
    for _ in range(100):
        cmean, ccov = random_belief(rng, model.dim)
        cavity = GaussianBelief(cmean, ccov)
        s = c.points[rng.integers(0, 4, size=2)]
        y = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        post = moment_match_hard(cavity, s, y, model.noise_cov).posterior
        factor = obs_factor_from(post, cavity)
        back = obs_cavity(post, factor)
        worst = max(worst, np.max(np.abs(back.mean - cmean)),
                    np.max(np.abs(back.cov - ccov)))
        fwd = predict(cavity, model)
        post2 = moment_match_hard(fwd, s, y, model.noise_cov).posterior
        factor2 = obs_factor_from(post2, fwd)
        comb = combine_fr(fwd, factor2)
        worst = max(worst, np.max(np.abs(comb.mean - post2.mean)),
                    np.max(np.abs(comb.cov - post2.cov)))
    _report("factor-algebra-round-trips", worst <= 1e-8,
            f"100 instances, max deviation {worst:.2e}")


def test_stationarity():
    """The autoregression preserves the stationary covariance, in
    construction and in simulation."""
    start = time.time()
    cfg = SystemConfig(L=2, K=2, M=2, T_p=2, T_d=2, a=0.1, rho=0.4,
                       f_d=0.04, trials=1)
    model = build_model(cfg)
    a_mat = np.diag(model.ar_coeff)
    drift = np.max(np.abs(a_mat @ model.chan_cov @ a_mat.conj().T
                          + model.innovation_cov - model.chan_cov))
    rng = np.random.default_rng(55)
    last = np.array([simulate_trace(model, 3, rng)[-1]
                     for _ in range(10_000)])
    emp = last.T @ last.conj() / last.shape[0]
    rel = np.linalg.norm(emp - model.chan_cov) \
        / np.linalg.norm(model.chan_cov)
    elapsed = time.time() - start
    _report("stationarity",
            drift <= 1e-10 and rel <= 0.05 and elapsed < 30.0,
            f"build drift {drift:.2e}, empirical deviation {rel:.3f}, "
            f"{elapsed:.1f}s")


def _desk_batch(master_seed):
    cfg = SystemConfig(**DESK, master_seed=master_seed)
    ratios = defaultdict(list)
    sers = defaultdict(list)
    for i in range(cfg.trials):
        res = run_trial(cfg, i)
        for alg, r in res.items():
            assert not r.failed, f"trial {i} failed for {alg}: {r.error}"
            if not math.isnan(r.delta_ratio):
                ratios[alg].append(r.delta_ratio)
            if not math.isnan(r.ser):
                sers[alg].append(r.ser)
    delta_db = {alg: 10 * math.log10(np.mean(v)) for alg, v in ratios.items()}
    mean_ser = {alg: float(np.mean(v)) for alg, v in sers.items()}
    return delta_db, mean_ser


def test_ordering_suite():
    """Desk-scale batch satisfies the channel-error and SER orderings."""
    start = time.time()
    delta, mean_ser = _desk_batch(master_seed=2024)
    elapsed = time.time() - start

    tie = 1e-9
    chains = [("kf_tm", "kf_m"), ("ks_tm", "ep"), ("ep", "ks_m"),
              ("ks_m", "kf_m")]
    ok = True
    details = []
    for lo, hi in chains:
        gap = delta[hi] - delta[lo]
        ok &= gap >= -tie
        details.append(f"{lo}<={hi} gap {gap:+.2f}dB")
        if gap < 0.5:
            _flag("ordering-suite", f"gap {lo}->{hi} is {gap:.3f} dB "
                  "(below 0.5 dB margin)")
    ser_chain = [("pcsi", "ep"), ("ep", "ks_m"), ("ks_m", "kf_m")]
    for lo, hi in ser_chain:
        ok &= mean_ser[hi] >= mean_ser[lo] - tie
        details.append(f"ser {lo}<={hi}")
    ok &= elapsed < 600.0
    _report("ordering-suite", ok,
            "; ".join(details) + f"; {elapsed:.0f}s")


def _violations(values, direction):
    """Count adjacent-pair violations of a monotone trend."""
    bad = 0
    for u, v in zip(values, values[1:]):
        if direction == "down" and v > u + 1e-12:
            bad += 1
        if direction == "up" and v < u - 1e-12:
            bad += 1
    return bad


def test_monotonicity_suites():
    """Batch means move the documented way along every swept axis,
    allowing at most one adjacent-pair violation per curve."""
    start = time.time()
    algs = ("kf_m", "ks_m", "ep", "pcsi")
    desk = SystemConfig(**DESK, master_seed=77, algorithms=algs)
    small = desk.with_(M=16)

    def curves(rows, metric):
        out = defaultdict(list)
        for r in rows:
            val = getattr(r, metric)
            if not math.isnan(val):
                out[r.algorithm].append(val)
        return out

    ok = True
    details = []

    rows = run_sweep(desk, "M", [8, 16, 32])
    for alg in ("kf_m", "ks_m", "ep"):
        bad = _violations(curves(rows, "delta_h_db")[alg], "down")
        ok &= bad <= 1
        details.append(f"delta/M {alg}:{bad}")
    for alg in algs:
        bad = _violations(curves(rows, "ser")[alg], "down")
        ok &= bad <= 1
        details.append(f"ser/M {alg}:{bad}")

    rows = run_sweep(small, "a", [0.1, 0.3, 0.5])
    for alg in ("kf_m", "ks_m", "ep"):
        bad = _violations(curves(rows, "delta_h_db")[alg], "up")
        ok &= bad <= 1
        details.append(f"delta/a {alg}:{bad}")

    rows = run_sweep(small, "T_d", [16, 32, 64])
    for alg in ("kf_m", "ks_m", "ep"):
        bad = _violations(curves(rows, "ser")[alg], "down")
        ok &= bad <= 1
        details.append(f"ser/T_d {alg}:{bad}")

    rows = run_sweep(small, "f_d", [0.005, 0.01, 0.04])
    for alg in ("kf_m", "ks_m", "ep"):
        bad = _violations(curves(rows, "delta_h_db")[alg], "up")
        ok &= bad <= 1
        details.append(f"delta/f_d {alg}:{bad}")

    elapsed = time.time() - start
    _report("monotonicity-suites", ok,
            "adjacent violations " + " ".join(details) + f"; {elapsed:.0f}s")


def test_degenerate_fidelity():
    """All-pilot frames collapse the iterative receiver onto the
    training smoother; static all-pilot filtering never grows its
    covariance trace."""
    cfg = SystemConfig(L=2, K=4, M=8, T_p=12, T_d=0, a=0.1, rho=0.3,
                       f_d=0.02, trials=1, pilot_design="random")
    model, c, frame, trace, obs = _scenario(cfg, seed=0)
    ep = run_ep(obs, frame.pilots, model, cfg)
    full = Frame(frame.pilots, frame.pilots[:, :0])
    train = run_training(obs, full, model, "smoother")
    dev = np.max(np.abs(ep.channel_means - train.channel_means))
    ok = dev <= 1e-8 and ep.converged and ep.iterations_used == 2

    static = SystemConfig(L=2, K=4, M=8, T_p=12, T_d=0, a=0.1, rho=0.3,
                          f_d=0.0, trials=1, pilot_design="random")
    model2, c2, frame2, trace2, obs2 = _scenario(static, seed=1)
    full2 = Frame(frame2.symbols, frame2.symbols[:, :0])
    filt = run_training(obs2, full2, model2, "filter", keep_covs=True)
    traces_t = np.array([np.trace(v).real for v in filt.channel_covs])
    monotone = bool(np.all(np.diff(traces_t) <= 1e-9))
    ok &= monotone
    _report("degenerate-fidelity", ok,
            f"iterative-vs-training deviation {dev:.2e}, iterations "
            f"{ep.iterations_used}, static trace monotone {monotone}")


def test_determinism_across_worker_counts(tmp_path):
    """The desk-scale sweep writes byte-identical CSV for any worker
    count under one master seed."""
    cfg = SystemConfig(**DESK, master_seed=7)
    paths = []
    for workers in (1, 2):
        rows = run_sweep(cfg, "M", [8, 16, 32], workers=workers)
        path = tmp_path / f"desk_w{workers}.csv"
        write_csv(rows, path)
        paths.append(path.read_bytes())
    ok = paths[0] == paths[1]
    _report("determinism-across-worker-counts", ok,
            f"{len(paths[0])} bytes compared")
