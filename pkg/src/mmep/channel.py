"""Spatio-temporal channel statistics and ground-truth simulation.

Each user's antenna vector is a correlated complex Gaussian with an
exponential correlation profile; the stacked channel evolves as a
first-order autoregression whose coefficient equals the Jakes
autocorrelation at lag one. The aggregate disturbance covariance sums
the interfering cells' average power on top of unit thermal noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .config import SystemConfig
from .numerics import bessel_j0, hermitize, psd_sqrt, sample_cn, NumericalFailure

__all__ = [
    "CellGains",
    "ChannelModel",
    "build_spatial_corr",
    "build_model",
    "build_rw",
    "simulate_trace",
    "export_trace",
    "load_trace",
]


@dataclass(frozen=True)
class CellGains:
    """Large-scale gains seen by the serving base station.

    ``beta[i, k]`` is the gain of user ``k`` in cell ``i``; row 0 is the
    served cell. Under the uniform-cross-gain protocol row 0 is all ones
    and every other row equals the cross gain.
    """

    beta: np.ndarray

    def __post_init__(self):
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim != 2:
            raise ValueError("beta must be a (cells, users) matrix")
        if np.any(beta < 0):
            raise ValueError("large-scale gains must be non-negative")
        object.__setattr__(self, "beta", beta)

    @property
    def cells(self) -> int:
        return self.beta.shape[0]

    @property
    def users(self) -> int:
        return self.beta.shape[1]

    @classmethod
    def uniform_cross(cls, cells: int, users: int, cross_gain: float) -> "CellGains":
        beta = np.full((cells, users), float(cross_gain))
        beta[0, :] = 1.0
        return cls(beta)


@dataclass
class ChannelModel:
    """Statistical model of the serving cell's stacked channel.

    The stacked vector has length ``antennas * users`` with user ``k``
    occupying the contiguous block ``[k*M, (k+1)*M)``.

    Attributes
    ----------
    spatial_corr : list of (M, M) arrays
        Per-user antenna correlation, unit diagonal.
    chan_cov : (MK, MK) array
        Stationary covariance, block diagonal with blocks
        ``beta_k * spatial_corr[k]``.
    ar_coeff : (MK,) array
        Diagonal of the autoregression matrix; entry ``n`` equals the
        Jakes autocorrelation ``J0(2*pi*doppler[n])``.
    innovation_var : (MK,) array
        Diagonal of the white innovation covariance, ``1 - ar_coeff**2``.
    innovation_cov : (MK, MK) array
        Colored innovation covariance
        ``chan_cov_root @ diag(innovation_var) @ chan_cov_root``.
    noise_cov : (M, M) array
        Aggregate disturbance covariance at the serving base station.
    """

    antennas: int
    users: int
    spatial_corr: list
    chan_cov: np.ndarray
    ar_coeff: np.ndarray
    innovation_var: np.ndarray
    innovation_cov: np.ndarray
    noise_cov: np.ndarray
    doppler: np.ndarray
    chan_cov_root: np.ndarray = field(repr=False, default=None)
    innovation_cov_root: np.ndarray = field(repr=False, default=None)

    @property
    def dim(self) -> int:
        return self.antennas * self.users


def build_spatial_corr(antennas: int, rho: float) -> np.ndarray:
    """Exponential antenna correlation matrix, entry (m, n) = rho**|m-n|.

    Positive definite for any ``rho`` in [0, 1); ``rho >= 1`` is
    rejected.
    """
    if not 0.0 <= rho < 1.0:
        raise ValueError("rho must lie in [0, 1)")
    idx = np.arange(antennas)
    return np.asarray(rho, dtype=float) ** np.abs(idx[:, None] - idx[None, :])


def build_rw(energy: float, gains: CellGains, spatial_corr) -> np.ndarray:
    """Aggregate disturbance covariance at the serving base station.

    Sums ``energy * beta[i, k] * corr[i][k]`` over every interfering
    cell ``i >= 1`` and user ``k``, plus identity thermal noise.
    ``spatial_corr`` may be a single shared matrix or a nested
    per-(cell, user) sequence.
    """
    shared = isinstance(spatial_corr, np.ndarray)
    first = spatial_corr if shared else np.asarray(spatial_corr[0][0])
    m = first.shape[0]
    out = np.eye(m, dtype=complex)
    for i in range(1, gains.cells):
        for k in range(gains.users):
            corr = spatial_corr if shared else np.asarray(spatial_corr[i][k])
            out = out + energy * gains.beta[i, k] * corr
    return hermitize(out)


def build_model(cfg: SystemConfig) -> ChannelModel:
    """Assemble the serving cell's channel statistics from a scenario.

    All users share the configured Doppler and antenna correlation, and
    the served cell has unit large-scale gain, so the stationary
    covariance is block diagonal with identical blocks. When every
    autoregression coefficient is equal the construction is checked to
    leave the stationary covariance invariant.
    """
    m, k = cfg.M, cfg.K
    corr = build_spatial_corr(m, cfg.rho)
    spatial = [corr for _ in range(k)]
    dim = m * k

    chan_cov = np.zeros((dim, dim), dtype=complex)
    for u in range(k):
        chan_cov[u * m:(u + 1) * m, u * m:(u + 1) * m] = corr

    doppler = np.full(dim, float(cfg.f_d))
    ar = np.array([bessel_j0(2.0 * math.pi * fd) for fd in doppler])
    innov_var = 1.0 - ar ** 2

    chan_root = psd_sqrt(chan_cov)
    innovation_cov = hermitize((chan_root * innov_var) @ chan_root)
    innov_root = psd_sqrt(innovation_cov)

    gains = CellGains.uniform_cross(cfg.L, k, cfg.a)
    noise_cov = build_rw(cfg.energy, gains, corr)

    model = ChannelModel(
        antennas=m,
        users=k,
        spatial_corr=spatial,
        chan_cov=chan_cov,
        ar_coeff=ar,
        innovation_var=innov_var,
        innovation_cov=innovation_cov,
        noise_cov=noise_cov,
        doppler=doppler,
        chan_cov_root=chan_root,
        innovation_cov_root=innov_root,
    )

    if np.ptp(ar) == 0.0:
        # equal coefficients: a^2 R + (1 - a^2) R must reproduce R
        drift = ar[0] ** 2 * chan_cov + innovation_cov - chan_cov
        if np.max(np.abs(drift)) > 1e-10:
            raise NumericalFailure(
                "stationary covariance drifts under the autoregression "
                f"(max deviation {np.max(np.abs(drift)):.3e})")
    return model


def simulate_trace(model: ChannelModel, steps: int, rng) -> np.ndarray:
    """Simulate one cell's stacked channel over ``steps`` symbols.

    Starts from a stationary draw and applies the autoregression with
    fresh colored innovations; deterministic given the stream state.
    Returns an array of shape ``(steps, MK)``.
    """
    if steps < 1:
        raise ValueError("steps must be at least 1")
    dim = model.dim
    trace = np.empty((steps, dim), dtype=complex)
    state = sample_cn(np.zeros(dim), model.chan_cov, rng,
                      cov_root=model.chan_cov_root)
    zero = np.zeros(dim)
    for t in range(steps):
        state = model.ar_coeff * state + sample_cn(
            zero, model.innovation_cov, rng,
            cov_root=model.innovation_cov_root)
        trace[t] = state
    return trace


def export_trace(trace: np.ndarray, model: ChannelModel, path) -> None:
    """Write a trace as text: a header line naming the scenario followed
    by one line per step of interleaved real/imag values."""
    trace = np.asarray(trace)
    steps = trace.shape[0]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(
            f"M={model.antennas} K={model.users} T={steps} "
            f"f_d={model.doppler[0]:.17g} rho={_infer_rho(model):.17g}\n")
        for row in trace:
            flat = np.empty(2 * row.size)
            flat[0::2] = row.real
            flat[1::2] = row.imag
            fh.write(" ".join(f"{v:.17g}" for v in flat) + "\n")


def load_trace(path) -> tuple[np.ndarray, dict]:
    """Read a trace written by :func:`export_trace`."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        meta = {}
        for item in header.split():
            key, val = item.split("=")
            meta[key] = float(val) if "." in val or "e" in val else int(val)
        rows = []
        for line in fh:
            vals = np.array([float(v) for v in line.split()])
            rows.append(vals[0::2] + 1j * vals[1::2])
    return np.array(rows), meta


def _infer_rho(model: ChannelModel) -> float:
    corr = model.spatial_corr[0]
    return float(corr[0, 1].real) if model.antennas > 1 else 0.0
