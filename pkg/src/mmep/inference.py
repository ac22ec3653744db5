"""Gaussian message-passing kernels for the semi-blind receivers.

The pieces: forward prediction through the autoregression, evidence of
an observation under a Gaussian channel belief, moment matching of the
belief against the symbol mixture (exact enumeration and the
single-term hard-decision shortcut), natural-parameter bookkeeping for
the observation factors, and the backward smoothing step.

Beliefs are plain mean/covariance pairs over the stacked channel
vector. Observation factors are kept in natural (information) form
because their covariance component can be singular or indefinite; they
are only ever added to or subtracted from proper precisions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import logsumexp

from .channel import ChannelModel
from .frame import (Constellation, backproject, backproject_cov,
                    predict_obs, project_cov, symbol_vectors)
from .numerics import (CavityCollapse, NumericalFailure, hermitize,
                       regularized_inverse, solve_hermitian)

__all__ = [
    "ENUM_GUARD",
    "GaussianBelief",
    "ObsFactorNat",
    "MatchResult",
    "SmootherGain",
    "predict",
    "evidence_terms",
    "moment_match_exact",
    "moment_match_hard",
    "gradcheck",
    "detect_mmse",
    "detect_ml",
    "obs_factor_from",
    "obs_cavity",
    "combine_fr",
    "smooth_step",
]

# Largest symbol-vector set the exact (enumerating) routines accept.
ENUM_GUARD = 4096

# Cavity covariances may dip this far below PSD before the trial is
# declared broken.
CAVITY_EIG_TOL = -1e-6


@dataclass
class GaussianBelief:
    """Complex Gaussian over the stacked channel: mean vector plus
    Hermitian covariance."""

    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


@dataclass
class ObsFactorNat:
    """Observation factor in natural form: information vector ``eta``
    and information matrix ``lam`` (Hermitian, possibly indefinite)."""

    eta: np.ndarray
    lam: np.ndarray


@dataclass
class MatchResult:
    """Outcome of one moment-matching update."""

    posterior: GaussianBelief
    grad_mean: np.ndarray
    grad_cov: np.ndarray
    evidence: float
    log_evidence: float
    symbol_pmf: np.ndarray | None = None


@dataclass
class SmootherGain:
    """Backward-step quantities: one-step-ahead covariance and gain."""

    innovation_cov: np.ndarray
    gain: np.ndarray


def _chol(sigma: np.ndarray):
    """Cholesky factor of an observation covariance, with one jitter
    retry; these matrices sit above the unit thermal-noise floor so a
    failure means the belief is broken."""
    try:
        return cho_factor(sigma, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        bump = 1e-9 * max(abs(sigma.trace().real) / sigma.shape[0], 1.0)
        try:
            return cho_factor(sigma + bump * np.eye(sigma.shape[0]),
                              lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("observation covariance is not positive "
                                   "definite") from exc


def _cn_logpdf_chol(resid: np.ndarray, chol) -> float:
    """Log density of a circularly symmetric complex Gaussian residual
    given the Cholesky factor of its covariance."""
    lower = chol[0]
    z = cho_solve(chol, resid, check_finite=False)
    quad = float(np.real(resid.conj() @ z))
    logdet = 2.0 * float(np.sum(np.log(np.abs(np.diag(lower)))))
    m = resid.shape[0]
    return -m * math.log(math.pi) - logdet - quad


def predict(prev: GaussianBelief, model: ChannelModel) -> GaussianBelief:
    """Push a belief one step through the autoregression."""
    a = model.ar_coeff
    mean = a * prev.mean
    cov = hermitize(a[:, None] * prev.cov * a[None, :] + model.innovation_cov)
    return GaussianBelief(mean, cov)


def evidence_terms(cavity: GaussianBelief, s: np.ndarray, y: np.ndarray,
                   noise_cov: np.ndarray):
    """Likelihood of ``y`` for one candidate symbol vector under the
    cavity belief.

    Returns ``(density, sigma, resid)`` where ``sigma`` is the
    observation covariance for this candidate (belief covariance
    projected into observation space plus the disturbance) and ``resid``
    the innovation ``y - S m``.
    """
    sigma = hermitize(project_cov(s, cavity.cov) + noise_cov)
    resid = y - predict_obs(s, cavity.mean)
    val = math.exp(_cn_logpdf_chol(resid, _chol(sigma)))
    return val, sigma, resid


def _mixture_stats(cavity, y, noise_cov, symbols, prior):
    """Per-candidate log weights and reusable factorizations."""
    n_cand = symbols.shape[0]
    if n_cand > ENUM_GUARD:
        raise ValueError(
            f"{n_cand} symbol vectors exceed the enumeration guard "
            f"({ENUM_GUARD})")
    if prior is None:
        log_prior = np.full(n_cand, -math.log(n_cand))
    else:
        prior = np.asarray(prior, dtype=float)
        if prior.shape != (n_cand,):
            raise ValueError("prior pmf must match the candidate count")
        with np.errstate(divide="ignore"):
            log_prior = np.log(prior)
    logw = np.empty(n_cand)
    chols = []
    resids = []
    for i, s in enumerate(symbols):
        if np.isneginf(log_prior[i]):
            logw[i] = -np.inf
            chols.append(None)
            resids.append(None)
            continue
        sigma = hermitize(project_cov(s, cavity.cov) + noise_cov)
        resid = y - predict_obs(s, cavity.mean)
        chol = _chol(sigma)
        logw[i] = log_prior[i] + _cn_logpdf_chol(resid, chol)
        chols.append(chol)
        resids.append(resid)
    return logw, chols, resids


def moment_match_exact(cavity: GaussianBelief, y: np.ndarray,
                       noise_cov: np.ndarray, symbols: np.ndarray,
                       prior: np.ndarray | None = None) -> MatchResult:
    """Moment-match the channel belief against the full symbol mixture.

    Enumerates every candidate vector (guarded), forms the evidence and
    its mean/covariance sensitivities, and applies the standard
    exponential-family update: the matched posterior mean is the cavity
    mean shifted by the covariance times the mean sensitivity, and the
    matched covariance subtracts the curvature correction. The symbol
    marginal (responsibilities) is returned alongside.
    """
    logw, chols, resids = _mixture_stats(cavity, y, noise_cov, symbols, prior)
    logz = float(logsumexp(logw))
    w = np.exp(logw - logz)

    dim = cavity.dim
    m_obs = y.shape[0]
    grad_mean = np.zeros(dim, dtype=complex)
    grad_cov = np.zeros((dim, dim), dtype=complex)
    eye = np.eye(m_obs, dtype=complex)
    for i, s in enumerate(symbols):
        if w[i] == 0.0 or chols[i] is None:
            continue
        wht = cho_solve(chols[i], resids[i], check_finite=False)
        sigma_inv = cho_solve(chols[i], eye, check_finite=False)
        grad_mean += w[i] * backproject(s, wht)
        grad_cov += w[i] * backproject_cov(
            s, np.outer(wht, wht.conj()) - sigma_inv)
    grad_cov = hermitize(grad_cov)

    mean = cavity.mean + cavity.cov @ grad_mean
    curv = np.outer(grad_mean, grad_mean.conj()) - grad_cov
    cov = hermitize(cavity.cov - cavity.cov @ curv @ cavity.cov)
    post = GaussianBelief(mean, cov)
    return MatchResult(post, grad_mean, grad_cov,
                       evidence=math.exp(logz), log_evidence=logz,
                       symbol_pmf=w)


def moment_match_hard(cavity: GaussianBelief, s_hat: np.ndarray,
                      y: np.ndarray, noise_cov: np.ndarray) -> MatchResult:
    """Moment matching collapsed onto a single decided symbol vector.

    Identical to :func:`moment_match_exact` with a point-mass prior at
    ``s_hat``; the mixture reduces to one Gaussian term so the update is
    an exact conditioning step.
    """
    sigma = hermitize(project_cov(s_hat, cavity.cov) + noise_cov)
    resid = y - predict_obs(s_hat, cavity.mean)
    chol = _chol(sigma)
    wht = cho_solve(chol, resid, check_finite=False)
    sigma_inv = cho_solve(chol, np.eye(y.shape[0], dtype=complex),
                          check_finite=False)
    grad_mean = backproject(s_hat, wht)
    grad_cov = hermitize(backproject_cov(
        s_hat, np.outer(wht, wht.conj()) - sigma_inv))

    mean = cavity.mean + cavity.cov @ grad_mean
    # single term: the residual outer products cancel in the curvature,
    # leaving the adjoint sandwich of the inverse observation covariance
    curv = backproject_cov(s_hat, sigma_inv)
    cov = hermitize(cavity.cov - cavity.cov @ curv @ cavity.cov)
    logz = _cn_logpdf_chol(resid, chol)
    return MatchResult(GaussianBelief(mean, cov), grad_mean, grad_cov,
                       evidence=math.exp(logz), log_evidence=logz)


def gradcheck(cavity: GaussianBelief, y: np.ndarray, noise_cov: np.ndarray,
              symbols: np.ndarray, prior: np.ndarray | None = None,
              step: float = 1e-5) -> float:
    """Compare the analytic evidence sensitivities against central
    finite differences of the log evidence.

    Mean sensitivities are checked on the real and imaginary part of
    every coordinate, covariance sensitivities along every Hermitian
    coordinate direction. Returns the largest absolute deviation.
    """

    def log_evidence(mean, cov):
        probe = GaussianBelief(mean, cov)
        logw, _, _ = _mixture_stats(probe, y, noise_cov, symbols, prior)
        return float(logsumexp(logw))

    res = moment_match_exact(cavity, y, noise_cov, symbols, prior)
    dim = cavity.dim
    worst = 0.0

    for i in range(dim):
        e = np.zeros(dim, dtype=complex)
        e[i] = step
        d_re = (log_evidence(cavity.mean + e, cavity.cov)
                - log_evidence(cavity.mean - e, cavity.cov)) / (2 * step)
        d_im = (log_evidence(cavity.mean + 1j * e, cavity.cov)
                - log_evidence(cavity.mean - 1j * e, cavity.cov)) / (2 * step)
        # conjugate-coordinate derivative of a real function
        numeric = 0.5 * (d_re + 1j * d_im)
        worst = max(worst, abs(numeric - res.grad_mean[i]))

    def cov_dir(direction, analytic):
        hi = log_evidence(cavity.mean, cavity.cov + step * direction)
        lo = log_evidence(cavity.mean, cavity.cov - step * direction)
        return abs((hi - lo) / (2 * step) - analytic)

    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        worst = max(worst, cov_dir(e, float(res.grad_cov[i, i].real)))
        for j in range(i + 1, dim):
            sym = np.zeros((dim, dim), dtype=complex)
            sym[i, j] = sym[j, i] = 1.0
            worst = max(worst, cov_dir(sym, 2.0 * res.grad_cov[i, j].real))
            skew = np.zeros((dim, dim), dtype=complex)
            skew[i, j] = 1.0j
            skew[j, i] = -1.0j
            worst = max(worst, cov_dir(skew, 2.0 * res.grad_cov[i, j].imag))
    return worst


def detect_mmse(h_mat: np.ndarray, y: np.ndarray, noise_cov: np.ndarray,
                c: Constellation) -> np.ndarray:
    """Linear minimum-mean-square-error filter followed by per-user hard
    decisions.

    The filter output decouples across users, so the joint nearest
    symbol vector is the per-user nearest constellation point; ties
    break toward the lowest point index.
    """
    k = h_mat.shape[1]
    g = solve_hermitian(noise_cov, h_mat)
    gram = hermitize(h_mat.conj().T @ g + np.eye(k) / c.energy)
    x = np.linalg.solve(gram, g.conj().T @ y)
    idx = np.abs(x[:, None] - c.points[None, :]).argmin(axis=1)
    return c.points[idx]


def detect_ml(cavity: GaussianBelief, y: np.ndarray, noise_cov: np.ndarray,
              c: Constellation) -> np.ndarray:
    """Exhaustive maximum-likelihood detection under the cavity belief.

    Recomputes the observation covariance per candidate; only usable
    under the enumeration guard. Ties break toward the lowest candidate
    index.
    """
    users = cavity.dim // y.shape[0]
    cands = symbol_vectors(c, users)
    logw, _, _ = _mixture_stats(cavity, y, noise_cov, cands, None)
    return cands[int(np.argmax(logw))]


def obs_factor_from(posterior: GaussianBelief,
                    cavity: GaussianBelief) -> ObsFactorNat:
    """Natural parameters of the observation factor: the information
    content of the posterior not already present in the cavity."""
    post_prec = regularized_inverse(posterior.cov)
    cav_prec = regularized_inverse(cavity.cov)
    lam = hermitize(post_prec - cav_prec)
    eta = post_prec @ posterior.mean - cav_prec @ cavity.mean
    return ObsFactorNat(eta, lam)


def obs_cavity(posterior: GaussianBelief, factor: ObsFactorNat) -> GaussianBelief:
    """Divide an observation factor back out of a posterior belief.

    Signals :class:`CavityCollapse` when the resulting covariance is
    indefinite beyond tolerance, which tells the caller the trial went
    numerically bad rather than silently continuing.
    """
    post_prec = regularized_inverse(posterior.cov)
    prec = hermitize(post_prec - factor.lam)
    cov = regularized_inverse(prec)
    evals = np.linalg.eigvalsh(cov)
    if evals[0] < CAVITY_EIG_TOL:
        raise CavityCollapse(
            f"cavity covariance indefinite (min eigenvalue {evals[0]:.3e})")
    mean = cov @ (post_prec @ posterior.mean - factor.eta)
    return GaussianBelief(mean, hermitize(cov))


def combine_fr(forward: GaussianBelief, factor: ObsFactorNat) -> GaussianBelief:
    """Combine a forward (predicted) belief with an observation factor
    in information form."""
    fwd_prec = regularized_inverse(forward.cov)
    cov = regularized_inverse(hermitize(fwd_prec + factor.lam))
    evals = np.linalg.eigvalsh(cov)
    if evals[0] < CAVITY_EIG_TOL:
        raise CavityCollapse(
            f"combined covariance indefinite (min eigenvalue {evals[0]:.3e})")
    mean = cov @ (fwd_prec @ forward.mean + factor.eta)
    return GaussianBelief(mean, hermitize(cov))


def smooth_step(current_cavity: GaussianBelief,
                next_posterior: GaussianBelief,
                model: ChannelModel) -> tuple[GaussianBelief, SmootherGain]:
    """One backward smoothing step.

    Blends the next step's posterior into the current reverse-cavity
    belief through the autoregression, the classic fixed-interval
    recursion.
    """
    a = model.ar_coeff
    cav_cov = current_cavity.cov
    innov = hermitize(model.innovation_cov
                      + a[:, None] * cav_cov * a[None, :])
    cross = cav_cov * a[None, :]  # V A^H for diagonal real A
    gain = solve_hermitian(innov, cross.conj().T).conj().T
    mean = current_cavity.mean + gain @ (next_posterior.mean
                                         - a * current_cavity.mean)
    cov = hermitize(cav_cov
                    + gain @ (next_posterior.cov - innov) @ gain.conj().T)
    return GaussianBelief(mean, cov), SmootherGain(innov, gain)
