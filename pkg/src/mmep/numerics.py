"""Shared numerical kernels.

Complex Hermitian matrix utilities (square root, guarded inversion),
circularly symmetric Gaussian sampling, and the Bessel function that
drives the temporal fading correlation. Every covariance produced here
or downstream is passed through :func:`hermitize` so that round-off
never accumulates asymmetry.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "NumericalFailure",
    "CavityCollapse",
    "bessel_j0",
    "hermitize",
    "psd_sqrt",
    "sample_cn",
    "regularized_inverse",
    "solve_hermitian",
]

# Eigenvalues above this (negative) floor are treated as rounding debris
# of a PSD matrix.
PSD_EIG_TOL = -1e-9

# Diagonal jitter ladder, as fractions of trace/dim. Escalation stops at
# 1e-9; anything that still fails there is reported, not hidden.
_JITTER_STEPS = (0.0, 1e-12, 1e-10, 1e-9)

_SERIES_CUTOFF = 12.0


class NumericalFailure(RuntimeError):
    """Linear algebra gave up (singular system or a broken covariance)."""


class CavityCollapse(NumericalFailure):
    """A cavity covariance came out indefinite beyond tolerance."""


def bessel_j0(x: float) -> float:
    """Zero-order Bessel function of the first kind.

    Evaluated by the ascending power series for ``|x| <= 12``, where the
    series is accurate to well below 1e-12 in double precision. The
    fading model never leaves that range (its arguments are ``2*pi*f_d``
    with ``f_d <= 0.1``); larger arguments fall back to the standard
    large-argument approximation.
    """
    ax = abs(float(x))
    if ax <= _SERIES_CUTOFF:
        total = term = 1.0
        q = 0.25 * ax * ax
        k = 1
        while True:
            term *= -q / (k * k)
            total += term
            if abs(term) <= 1e-17 * (1.0 + abs(total)):
                return total
            k += 1
    # Hankel-style asymptotic fit (Abramowitz & Stegun 9.4.3).
    z = 8.0 / ax
    y = z * z
    p = 1.0 + y * (-0.1098628627e-2 + y * (0.2734510407e-4
        + y * (-0.2073370639e-5 + y * 0.2093887211e-6)))
    q = z * (-0.1562499995e-1 + y * (0.1430488765e-3
        + y * (-0.6911147651e-5 + y * (0.7621095161e-6 + y * -0.934935152e-7))))
    x0 = ax - 0.785398164
    return math.sqrt(0.636619772 / ax) * (math.cos(x0) * p - math.sin(x0) * q)


def hermitize(mat: np.ndarray) -> np.ndarray:
    """Project onto the Hermitian subspace: ``(S + S^H) / 2``."""
    return 0.5 * (mat + mat.conj().T)


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    """Hermitian square root of a PSD matrix.

    Uses the eigendecomposition; eigenvalues in ``[PSD_EIG_TOL, 0)`` are
    clipped to zero before rooting, anything lower is rejected because
    it signals a modeling bug, not round-off.
    """
    s = hermitize(np.asarray(mat))
    w, v = np.linalg.eigh(s)
    if w[0] < PSD_EIG_TOL:
        raise NumericalFailure(
            f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    w = np.clip(w, 0.0, None)
    return hermitize((v * np.sqrt(w)) @ v.conj().T)


def sample_cn(mean, cov, rng, size=None, cov_root=None):
    """Draw from a circularly symmetric complex Gaussian.

    The whitened draw has independent real and imaginary parts of
    variance 1/2 each, so complex entries have unit variance before
    coloring by the covariance square root. Passing a precomputed
    ``cov_root`` (``psd_sqrt(cov)``) skips the factorization and yields
    the same numbers for the same stream state.

    Parameters
    ----------
    mean : array, shape (n,)
    cov : array, shape (n, n)
        Hermitian PSD covariance (ignored when ``cov_root`` is given).
    rng : numpy.random.Generator
        Private stream; a fixed state gives a bit-reproducible draw.
    size : int, optional
        When given, returns ``size`` rows of independent draws.
    """
    mean = np.asarray(mean, dtype=complex)
    root = psd_sqrt(cov) if cov_root is None else cov_root
    n = mean.shape[0]
    shape = (n,) if size is None else (size, n)
    z = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    z *= math.sqrt(0.5)
    return mean + z @ root.T


def _jitter_scale(s: np.ndarray) -> float:
    scale = abs(float(np.trace(s).real)) / s.shape[0]
    return scale if scale > 0.0 else 1.0


def regularized_inverse(mat: np.ndarray) -> np.ndarray:
    """Invert a Hermitian matrix with an escalating diagonal jitter.

    The jitter starts at zero and only grows (up to ``1e-9 * trace/dim``)
    when the Cholesky factorization fails; indefinite inputs fall back
    to an LU inverse at the maximum jitter. The result is symmetrized.
    """
    s = hermitize(np.asarray(mat, dtype=complex))
    n = s.shape[0]
    eye = np.eye(n, dtype=complex)
    scale = _jitter_scale(s)
    for step in _JITTER_STEPS:
        try:
            c = cho_factor(s + (step * scale) * eye, lower=True,
                           check_finite=False)
            return hermitize(cho_solve(c, eye, check_finite=False))
        except np.linalg.LinAlgError:
            continue
    try:
        inv = np.linalg.inv(s + (_JITTER_STEPS[-1] * scale) * eye)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("inversion failed at maximum jitter") from exc
    if not np.all(np.isfinite(inv)):
        raise NumericalFailure("inverse has non-finite entries")
    return hermitize(inv)


def solve_hermitian(mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Solve ``S X = B`` for Hermitian ``S`` under the same jitter policy
    as :func:`regularized_inverse` (cheaper than forming the inverse)."""
    s = hermitize(np.asarray(mat, dtype=complex))
    rhs = np.asarray(rhs, dtype=complex)
    n = s.shape[0]
    scale = _jitter_scale(s)
    for step in _JITTER_STEPS:
        try:
            c = cho_factor(s + (step * scale) * np.eye(n), lower=True,
                           check_finite=False)
            return cho_solve(c, rhs, check_finite=False)
        except np.linalg.LinAlgError:
            continue
    try:
        out = np.linalg.solve(s + (_JITTER_STEPS[-1] * scale) * np.eye(n), rhs)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure("solve failed at maximum jitter") from exc
    if not np.all(np.isfinite(out)):
        raise NumericalFailure("solution has non-finite entries")
    return out
