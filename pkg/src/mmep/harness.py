"""Monte Carlo orchestration: seeded trials, metrics and CSV export.

Every trial derives its streams from ``(master_seed, trial_index,
cell_index, stream_tag)`` through the numpy seed-sequence hash, so a
batch gives identical results for any worker count and any execution
order. Trial failures are counted per algorithm and excluded from the
averages but always reported.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .channel import build_model, simulate_trace
from .config import SWEEP_FIELDS, ConfigError, SystemConfig
from .frame import Frame, make_constellation, make_pilots, observe, random_data
from .numerics import NumericalFailure
from .receivers import run_ep, run_kf_m, run_ks_m, run_pcsi, run_training

__all__ = [
    "TrialResult",
    "MetricRow",
    "CSV_HEADER",
    "delta_h_ratio",
    "delta_h_db",
    "ser",
    "run_trial",
    "run_sweep",
    "write_csv",
]

# Stream tags of the per-trial seed tree.
STREAM_CHANNEL = 0
STREAM_SYMBOLS = 1
STREAM_NOISE = 2

DB_FLOOR = -300.0

CSV_HEADER = ("sweep_name,sweep_value,algorithm,delta_h_db,ser,"
              "trials,failures,master_seed,mean_iterations")


@dataclass
class TrialResult:
    """Per-trial, per-algorithm metrics."""

    delta_ratio: float = math.nan   # linear normalized channel error
    ser: float = math.nan
    iterations: int = 1
    converged: bool = True
    failed: bool = False
    error: str = ""

    @property
    def delta_db(self) -> float:
        return _ratio_to_db(self.delta_ratio)


@dataclass
class MetricRow:
    """One aggregated CSV row."""

    sweep_name: str
    sweep_value: float
    algorithm: str
    delta_h_db: float
    ser: float
    trials: int
    failures: int
    master_seed: int
    mean_iterations: float


def _ratio_to_db(ratio: float) -> float:
    if math.isnan(ratio):
        return math.nan
    if ratio <= 0.0:
        return DB_FLOOR
    return max(10.0 * math.log10(ratio), DB_FLOOR)


def delta_h_ratio(true_trace: np.ndarray, est_means: np.ndarray) -> float:
    """Time-averaged normalized squared channel error (linear scale).

    Steps where the true channel has zero norm are excluded with a
    warning; batch aggregation averages these ratios before any dB
    conversion.
    """
    true_trace = np.asarray(true_trace)
    est_means = np.asarray(est_means)
    if true_trace.shape != est_means.shape:
        raise ValueError("trace and estimate shapes differ")
    err = np.sum(np.abs(true_trace - est_means) ** 2, axis=1)
    pwr = np.sum(np.abs(true_trace) ** 2, axis=1)
    keep = pwr > 0.0
    if not np.all(keep):
        warnings.warn("zero-power channel steps excluded from the error "
                      "average", RuntimeWarning)
    if not np.any(keep):
        return math.nan
    return float(np.mean(err[keep] / pwr[keep]))


def delta_h_db(true_trace: np.ndarray, est_means: np.ndarray) -> float:
    """Normalized channel estimation error in dB, floored at -300."""
    return _ratio_to_db(delta_h_ratio(true_trace, est_means))


def ser(true_data: np.ndarray, decisions: np.ndarray) -> float:
    """Fraction of wrong symbol decisions over all users and positions."""
    true_data = np.asarray(true_data)
    decisions = np.asarray(decisions)
    if true_data.shape != decisions.shape:
        raise ValueError("decision matrix shape differs from the data")
    if true_data.size == 0:
        return 0.0
    return float(np.mean(true_data != decisions))


def _stream(cfg: SystemConfig, trial: int, cell: int, tag: int):
    seq = np.random.SeedSequence((cfg.master_seed, trial, cell, tag))
    return np.random.default_rng(seq)


def run_trial(cfg: SystemConfig, trial_index: int) -> dict:
    """Simulate one frame and run every requested algorithm on it.

    Builds the model, channel traces (all cells), frames and
    observations once, then shares the realization across algorithms.
    Failures are recorded per algorithm without aborting the batch.
    """
    model = build_model(cfg)
    c = make_constellation(4, cfg.energy)
    steps = cfg.frame_len

    sym_rng = _stream(cfg, trial_index, 0, STREAM_SYMBOLS)
    pilots = make_pilots(cfg.K, cfg.T_p, c, cfg.pilot_design, rng=sym_rng)
    data = random_data(cfg.K, cfg.T_d, c, sym_rng)
    frames = [Frame(pilots, data)]
    traces = [simulate_trace(model, steps,
                             _stream(cfg, trial_index, 0, STREAM_CHANNEL))]
    if cfg.interference_mode == "explicit":
        scale = math.sqrt(cfg.a)
        for cell in range(1, cfg.L):
            cell_syms = random_data(
                cfg.K, steps, c, _stream(cfg, trial_index, cell, STREAM_SYMBOLS))
            frames.append(Frame(cell_syms[:, :0], cell_syms))
            traces.append(scale * simulate_trace(
                model, steps, _stream(cfg, trial_index, cell, STREAM_CHANNEL)))
    obs = observe(traces, frames, model, cfg.interference_mode,
                  rng=_stream(cfg, trial_index, 0, STREAM_NOISE))

    results: dict[str, TrialResult] = {}
    for alg in cfg.algorithms:
        try:
            results[alg] = _run_algorithm(alg, cfg, model, c, obs,
                                          traces[0], frames[0])
        except NumericalFailure as exc:
            results[alg] = TrialResult(failed=True, error=str(exc))
    return results


def _run_algorithm(alg, cfg, model, c, obs, trace, frame) -> TrialResult:
    if alg == "kf_m":
        out = run_kf_m(obs, frame.pilots, model, cfg)
    elif alg == "ks_m":
        out = run_ks_m(obs, frame.pilots, model, cfg)
    elif alg == "ep":
        out = run_ep(obs, frame.pilots, model, cfg)
    elif alg in ("kf_tm", "ks_tm"):
        full = Frame(frame.symbols, frame.symbols[:, :0])
        mode = "filter" if alg == "kf_tm" else "smoother"
        out = run_training(obs, full, model, mode)
    elif alg == "pcsi":
        out = run_pcsi(obs, trace, model, c, n_pilot=cfg.T_p)
    else:
        raise ValueError(f"unknown algorithm {alg!r}")

    res = TrialResult(iterations=out.iterations_used, converged=out.converged)
    if out.channel_means is not None:
        res.delta_ratio = delta_h_ratio(trace, out.channel_means)
    if out.decisions is not None and cfg.T_d > 0:
        res.ser = ser(frame.data, out.decisions)
    return res


def _trial_job(args):
    cfg, index = args
    return run_trial(cfg, index)


def _run_batch(cfg: SystemConfig, workers: int) -> list:
    jobs = [(cfg, i) for i in range(cfg.trials)]
    if workers <= 1:
        return [run_trial(cfg, i) for i in range(cfg.trials)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_trial_job, jobs))


def _aggregate(cfg, sweep_name, value, batch) -> list:
    rows = []
    for alg in cfg.algorithms:
        per = [trial[alg] for trial in batch]
        ok = [r for r in per if not r.failed]
        failures = len(per) - len(ok)
        ratios = [r.delta_ratio for r in ok if not math.isnan(r.delta_ratio)]
        sers = [r.ser for r in ok if not math.isnan(r.ser)]
        iters = [r.iterations for r in ok]
        rows.append(MetricRow(
            sweep_name=sweep_name,
            sweep_value=value,
            algorithm=alg,
            delta_h_db=_ratio_to_db(float(np.mean(ratios))) if ratios else math.nan,
            ser=float(np.mean(sers)) if sers else math.nan,
            trials=cfg.trials,
            failures=failures,
            master_seed=cfg.master_seed,
            mean_iterations=float(np.mean(iters)) if iters else math.nan,
        ))
    return rows


def run_sweep(cfg: SystemConfig, sweep_name: str, values, workers: int = 1) -> list:
    """Run the configured batch at every value of one swept field.

    Channel-error ratios are averaged in the linear domain before the
    final dB conversion; symbol error rates are averaged directly.
    Returns one :class:`MetricRow` per (value, algorithm).
    """
    if sweep_name not in SWEEP_FIELDS:
        raise ConfigError(f"cannot sweep {sweep_name!r}; choose from "
                          f"{SWEEP_FIELDS}")
    rows = []
    for value in values:
        cfg_v = cfg.with_(**{sweep_name: value})
        batch = _run_batch(cfg_v, workers)
        rows.extend(_aggregate(cfg_v, sweep_name, value, batch))
    return rows


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".6g")


def write_csv(rows, path) -> None:
    """Write metric rows with the fixed header, six significant digits,
    UTF-8 and LF line endings."""
    if not rows:
        raise ValueError("no rows to write")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for r in rows:
            fh.write(",".join([
                r.sweep_name,
                _fmt(r.sweep_value),
                r.algorithm,
                _fmt(float(r.delta_h_db)),
                _fmt(float(r.ser)),
                _fmt(r.trials),
                _fmt(r.failures),
                _fmt(r.master_seed),
                _fmt(float(r.mean_iterations)),
            ]) + "\n")
