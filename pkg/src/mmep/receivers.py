"""Receiver drivers built on the inference kernels.

Five receivers share one skeleton:

* ``run_kf_m``: a single forward pass; at each data position the symbol
  is hard-decided from the predicted belief and the belief is
  conditioned on it (a Kalman filter whose measurement matrix is
  decided on the fly).
* ``run_ks_m``: the forward pass above, a pure backward smoothing
  sweep, then re-detection from the smoothed means.
* ``run_ep``: iterative refinement. Each iteration refreshes the
  forward beliefs against the stored observation factors, then sweeps
  backward re-deciding symbols and refreshing the factors, until the
  stacked means stop moving.
* ``run_training``: filter or smoother with every symbol known
  (channel estimation only, the performance floor).
* ``run_pcsi``: hard decisions with the true channel (detection floor).

Because every observation factor here comes from conditioning on a
single decided symbol vector, its natural parameters are exactly the
information form of that Gaussian likelihood. The passes below exploit
this: factors are carried as decided symbols and applied as measurement
updates or downdates, which avoids inverting any stacked covariance;
the equivalence to the generic natural-parameter algebra is pinned by
the unit tests.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .channel import ChannelModel
from .config import SystemConfig
from .frame import (Constellation, Frame, backproject, backproject_cov,
                    make_constellation, predict_obs, project_cov,
                    project_rows, unvec_channel)
from .inference import (CAVITY_EIG_TOL, GaussianBelief, ObsFactorNat,
                        detect_ml, detect_mmse, predict, smooth_step)
from .numerics import CavityCollapse, hermitize, regularized_inverse

__all__ = [
    "ReceiverOutput",
    "EpState",
    "run_kf_m",
    "run_ks_m",
    "run_ep",
    "run_training",
    "run_pcsi",
]


@dataclass
class ReceiverOutput:
    """What a receiver hands back to the harness."""

    channel_means: np.ndarray | None         # (T, MK) estimates, or None
    channel_covs: np.ndarray | None          # (T, MK, MK) when requested
    decisions: np.ndarray | None             # (K, T_d) hard decisions
    iterations_used: int = 1
    converged: bool = True
    diagnostics: list = field(default_factory=list)


@dataclass
class EpState:
    """Per-step state of the iterative receiver.

    Observation factors are stored as the decided symbol vectors; the
    equivalent natural parameters can be materialized on demand via
    :meth:`factor_at`.
    """

    forward: list
    reverse_cavity: list
    symbols: np.ndarray       # (T, K) pilots plus current decisions
    posterior: list | None = None
    iteration: int = 0

    def factor_at(self, t: int, obs: np.ndarray, noise_cov: np.ndarray) -> ObsFactorNat:
        rw_inv = regularized_inverse(noise_cov)
        s = self.symbols[t]
        return ObsFactorNat(eta=backproject(s, rw_inv @ obs[t]),
                            lam=backproject_cov(s, rw_inv))


class _Context:
    """Bundles the quantities every pass needs."""

    def __init__(self, obs, pilots, model, constellation, detector,
                 n_pilot):
        self.obs = np.asarray(obs)
        self.pilots = np.asarray(pilots)
        self.model = model
        self.c = constellation
        self.detector = detector
        self.steps = self.obs.shape[0]
        self.n_pilot = n_pilot
        self.noise_cov = model.noise_cov
        self.rw_inv = regularized_inverse(model.noise_cov)
        if self.pilots.shape != (model.users, n_pilot):
            raise ValueError("pilot matrix shape does not match the scenario")
        if self.obs.shape[1] != model.antennas:
            raise ValueError("observation dimension does not match the model")

    def prior(self) -> GaussianBelief:
        return GaussianBelief(np.zeros(self.model.dim, dtype=complex),
                              self.model.chan_cov.astype(complex))

    def detect(self, cavity: GaussianBelief, t: int) -> np.ndarray:
        if self.detector == "ml":
            return detect_ml(cavity, self.obs[t], self.noise_cov, self.c)
        h_mat = unvec_channel(cavity.mean, self.model.antennas)
        return detect_mmse(h_mat, self.obs[t], self.noise_cov, self.c)


def _chol_obs(sigma):
    try:
        return cho_factor(sigma, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        bump = 1e-9 * max(abs(sigma.trace().real) / sigma.shape[0], 1.0)
        return cho_factor(sigma + bump * np.eye(sigma.shape[0]), lower=True,
                          check_finite=False)


def _measurement_update(belief: GaussianBelief, s, y, noise_cov) -> GaussianBelief:
    """Condition a belief on one observation with a known symbol vector.

    Matches the single-term moment-matching update exactly; written in
    gain form so nothing larger than the observation dimension gets
    factorized.
    """
    sigma = hermitize(project_cov(s, belief.cov) + noise_cov)
    chol = _chol_obs(sigma)
    resid = y - predict_obs(s, belief.mean)
    cross = project_rows(s, belief.cov)               # S V
    mean = belief.mean + cross.conj().T @ cho_solve(chol, resid,
                                                    check_finite=False)
    cov = hermitize(belief.cov - cross.conj().T
                    @ cho_solve(chol, cross, check_finite=False))
    return GaussianBelief(mean, cov)


def _cavity_downdate(ctx: _Context, belief: GaussianBelief, s, y) -> GaussianBelief:
    """Divide a decided-symbol observation factor back out of a belief.

    The residual observation covariance ``R_w - S V S^H`` must stay
    positive definite for the downdate to exist as a proper Gaussian;
    when its factorization fails the slow information-form path decides
    between a tolerable dip and a genuine cavity collapse.
    """
    cross = project_rows(s, belief.cov)
    resid_cov = hermitize(ctx.noise_cov - project_cov(s, belief.cov))
    try:
        chol = cho_factor(resid_cov, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        return _cavity_downdate_slow(ctx, belief, s, y)
    mean = belief.mean - cross.conj().T @ cho_solve(
        chol, y - predict_obs(s, belief.mean), check_finite=False)
    cov = hermitize(belief.cov + cross.conj().T
                    @ cho_solve(chol, cross, check_finite=False))
    return GaussianBelief(mean, cov)


def _cavity_downdate_slow(ctx: _Context, belief: GaussianBelief, s, y) -> GaussianBelief:
    post_prec = regularized_inverse(belief.cov)
    prec = hermitize(post_prec - backproject_cov(s, ctx.rw_inv))
    cov = regularized_inverse(prec)
    evals = np.linalg.eigvalsh(cov)
    if evals[0] < CAVITY_EIG_TOL:
        raise CavityCollapse(
            f"cavity covariance indefinite (min eigenvalue {evals[0]:.3e})")
    mean = cov @ (post_prec @ belief.mean - backproject(s, ctx.rw_inv @ y))
    return GaussianBelief(mean, hermitize(cov))


def _forward_pass(ctx: _Context, symbols=None) -> EpState:
    """One forward sweep.

    With ``symbols=None`` this is the initial semi-blind filter: data
    symbols are decided from the predicted belief as it goes. With a
    stored symbol array the pass only refreshes the forward beliefs and
    their combinations with the existing observation factors.
    """
    steps, users = ctx.steps, ctx.model.users
    fwd = [None] * steps
    rcav = [None] * steps
    out_syms = np.empty((steps, users), dtype=complex)
    prev = ctx.prior()
    for t in range(steps):
        fwd[t] = predict(prev, ctx.model)
        if symbols is not None:
            s = symbols[t]
        elif t < ctx.n_pilot:
            s = ctx.pilots[:, t]
        else:
            s = ctx.detect(fwd[t], t)
        out_syms[t] = s
        rcav[t] = _measurement_update(fwd[t], s, ctx.obs[t], ctx.noise_cov)
        prev = rcav[t]
    return EpState(forward=fwd, reverse_cavity=rcav, symbols=out_syms)


def _smoothing_pass(ctx: _Context, state: EpState, redetect=True) -> list:
    """One backward sweep with factor refresh.

    Walks from the last step down, blending in the future through the
    smoothing step, removing the step's old observation factor,
    re-deciding the symbol (data positions only) and conditioning on the
    fresh decision.
    """
    steps = ctx.steps
    post = [None] * steps
    for t in range(steps - 1, -1, -1):
        if t == steps - 1:
            prelim = state.reverse_cavity[t]
        else:
            prelim, _ = smooth_step(state.reverse_cavity[t], post[t + 1],
                                    ctx.model)
        cavity = _cavity_downdate(ctx, prelim, state.symbols[t], ctx.obs[t])
        if t >= ctx.n_pilot and redetect:
            s = ctx.detect(cavity, t)
            state.symbols[t] = s
        else:
            s = state.symbols[t]
        post[t] = _measurement_update(cavity, s, ctx.obs[t], ctx.noise_cov)
    return post


def _stack_means(beliefs) -> np.ndarray:
    return np.concatenate([b.mean for b in beliefs])


def _pack(beliefs, keep_covs):
    means = np.stack([b.mean for b in beliefs])
    covs = np.stack([b.cov for b in beliefs]) if keep_covs else None
    return means, covs


def _make_context(obs, pilots, model, cfg: SystemConfig) -> _Context:
    c = make_constellation(4, cfg.energy)
    return _Context(obs, pilots, model, c, cfg.detector, cfg.T_p)


def run_kf_m(obs, pilots, model: ChannelModel, cfg: SystemConfig,
             keep_covs: bool = False) -> ReceiverOutput:
    """Single-pass semi-blind filter with on-the-fly hard decisions."""
    ctx = _make_context(obs, pilots, model, cfg)
    state = _forward_pass(ctx)
    means, covs = _pack(state.reverse_cavity, keep_covs)
    return ReceiverOutput(channel_means=means, channel_covs=covs,
                          decisions=state.symbols[ctx.n_pilot:].T.copy())


def run_ks_m(obs, pilots, model: ChannelModel, cfg: SystemConfig,
             keep_covs: bool = False) -> ReceiverOutput:
    """Forward filter, pure backward smoothing (no factor refresh), then
    re-detection from the smoothed means."""
    ctx = _make_context(obs, pilots, model, cfg)
    state = _forward_pass(ctx)
    post = [None] * ctx.steps
    for t in range(ctx.steps - 1, -1, -1):
        if t == ctx.steps - 1:
            post[t] = state.reverse_cavity[t]
        else:
            post[t], _ = smooth_step(state.reverse_cavity[t], post[t + 1],
                                     ctx.model)
    decisions = np.empty((ctx.model.users, ctx.steps - ctx.n_pilot),
                         dtype=complex)
    for t in range(ctx.n_pilot, ctx.steps):
        h_mat = unvec_channel(post[t].mean, ctx.model.antennas)
        decisions[:, t - ctx.n_pilot] = detect_mmse(
            h_mat, ctx.obs[t], ctx.noise_cov, ctx.c)
    means, covs = _pack(post, keep_covs)
    return ReceiverOutput(channel_means=means, channel_covs=covs,
                          decisions=decisions)


def run_ep(obs, pilots, model: ChannelModel, cfg: SystemConfig,
           keep_covs: bool = False) -> ReceiverOutput:
    """Iterative receiver: initial filter pass, then alternating forward
    refreshes and backward re-deciding sweeps until the stacked means
    move less than the configured tolerance (relative change)."""
    ctx = _make_context(obs, pilots, model, cfg)
    state = _forward_pass(ctx)
    prev_stack = _stack_means(state.reverse_cavity)
    post = state.reverse_cavity
    diagnostics = []
    converged = False
    iterations = cfg.n
    for i in range(1, cfg.n + 1):
        if i > 1:
            refreshed = _forward_pass(ctx, symbols=state.symbols)
            state.forward = refreshed.forward
            state.reverse_cavity = refreshed.reverse_cavity
        post = _smoothing_pass(ctx, state)
        state.posterior = post
        state.iteration = i
        stack = _stack_means(post)
        denom = np.linalg.norm(prev_stack)
        change = np.linalg.norm(stack - prev_stack)
        rel = change / denom if denom > 0 else (0.0 if change == 0 else np.inf)
        diagnostics.append(float(rel))
        prev_stack = stack
        if rel < cfg.epsilon:
            converged = True
            iterations = i
            break
    means, covs = _pack(post, keep_covs)
    return ReceiverOutput(channel_means=means, channel_covs=covs,
                          decisions=state.symbols[ctx.n_pilot:].T.copy(),
                          iterations_used=iterations, converged=converged,
                          diagnostics=diagnostics)


def run_training(obs, frame: Frame, model: ChannelModel, mode: str = "filter",
                 keep_covs: bool = False) -> ReceiverOutput:
    """Channel estimation with every transmitted symbol known.

    ``mode="filter"`` runs the forward pass only; ``mode="smoother"``
    adds the backward sweep. No symbol decisions are produced.
    """
    if frame.n_data != 0:
        raise ValueError("training mode needs an all-pilot frame")
    if mode not in ("filter", "smoother"):
        raise ValueError(f"unknown training mode {mode!r}")
    obs = np.asarray(obs)
    c = make_constellation(4, 1.0)  # unused by known-symbol passes
    ctx = _Context(obs, frame.pilots, model, c, "mmse", frame.n_pilot)
    if ctx.steps != frame.length:
        raise ValueError("frame length does not match the observations")
    state = _forward_pass(ctx)
    beliefs = state.reverse_cavity
    if mode == "smoother":
        post = [None] * ctx.steps
        for t in range(ctx.steps - 1, -1, -1):
            if t == ctx.steps - 1:
                post[t] = beliefs[t]
            else:
                post[t], _ = smooth_step(beliefs[t], post[t + 1], ctx.model)
        beliefs = post
    means, covs = _pack(beliefs, keep_covs)
    return ReceiverOutput(channel_means=means, channel_covs=covs,
                          decisions=None)


def run_pcsi(obs, trace, model: ChannelModel, c: Constellation,
             n_pilot: int = 0) -> ReceiverOutput:
    """Hard decisions with the true channel (detection floor); no
    channel estimation is performed."""
    obs = np.asarray(obs)
    trace = np.asarray(trace)
    steps = obs.shape[0]
    decisions = np.empty((model.users, steps - n_pilot), dtype=complex)
    for t in range(n_pilot, steps):
        h_mat = unvec_channel(trace[t], model.antennas)
        decisions[:, t - n_pilot] = detect_mmse(h_mat, obs[t],
                                                model.noise_cov, c)
    return ReceiverOutput(channel_means=None, channel_covs=None,
                          decisions=decisions)
