"""Constellations, pilot design, frame assembly and observation synthesis.

The stacked observation operator ``(s^T kron I_M)`` is never
materialized; the helpers at the bottom apply it through the block
structure of the stacked channel vector, which keeps every receiver
update at most cubic in the stacked dimension.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import hadamard

from .channel import ChannelModel
from .numerics import psd_sqrt

__all__ = [
    "Constellation",
    "Frame",
    "make_constellation",
    "hadamard_pilots",
    "dft_pilots",
    "make_pilots",
    "random_data",
    "observe",
    "symbol_vectors",
    "vec_channel",
    "unvec_channel",
    "predict_obs",
    "project_cov",
    "project_rows",
    "backproject",
    "backproject_cov",
]


@dataclass(frozen=True)
class Constellation:
    """A zero-mean PSK symbol set with a fixed average energy."""

    order: int
    points: np.ndarray
    energy: float


def make_constellation(order: int = 4, energy: float = 1.0) -> Constellation:
    """Phase-shift-keying constellation scaled to the given average
    symbol energy.

    Order 4 gives ``sqrt(energy/2) * (+-1 +- 1j)``; the point ordering
    follows the Gray circle starting at ``1 + 1j`` and is fixed for
    reproducibility. Other orders are plain PSK rings. Orders below 2
    are rejected.
    """
    order = int(order)
    if order < 2:
        raise ValueError(f"unsupported constellation order {order}")
    if energy <= 0:
        raise ValueError("energy must be positive")
    angles = 2.0 * np.pi * np.arange(order) / order + np.pi / order
    points = math.sqrt(energy) * np.exp(1j * angles)
    return Constellation(order=order, points=points, energy=float(energy))


@dataclass(frozen=True)
class Frame:
    """One cell's transmitted frame: pilot preamble plus data block."""

    pilots: np.ndarray  # (K, T_p)
    data: np.ndarray    # (K, T_d)

    @property
    def n_pilot(self) -> int:
        return self.pilots.shape[1]

    @property
    def n_data(self) -> int:
        return self.data.shape[1]

    @property
    def length(self) -> int:
        return self.n_pilot + self.n_data

    @property
    def symbols(self) -> np.ndarray:
        return np.concatenate([self.pilots, self.data], axis=1)


def hadamard_pilots(users: int, length: int, c: Constellation) -> np.ndarray:
    """Mutually orthogonal pilot rows from a Sylvester Hadamard matrix.

    Row ``k`` is the ``k``-th Hadamard row of size ``length`` with +1
    mapped to ``sqrt(E/2)(1+1j)`` and -1 to its negative, so every entry
    is a constellation point and the Gram matrix is
    ``length * energy * I``.

    Requires ``users`` to be a power of two and ``length`` in
    ``{users, 2*users}``.
    """
    if users < 1 or users & (users - 1):
        raise ValueError("hadamard pilots need a power-of-two user count")
    if length not in (users, 2 * users):
        raise ValueError("pilot length must be the user count or twice it")
    plus = math.sqrt(c.energy / 2.0) * (1.0 + 1.0j)
    h = hadamard(length)
    return np.where(h[:users, :] > 0, plus, -plus)


def dft_pilots(users: int, length: int, c: Constellation) -> np.ndarray:
    """Orthogonal pilot rows from a DFT matrix, for user counts where
    the Hadamard construction does not exist. Entries have energy
    ``c.energy`` but are generally not constellation points."""
    if length < users:
        raise ValueError("pilot length must be at least the user count")
    k = np.arange(users)[:, None]
    t = np.arange(length)[None, :]
    return math.sqrt(c.energy) * np.exp(-2j * np.pi * k * t / length)


def random_data(users: int, count: int, c: Constellation, rng) -> np.ndarray:
    """Independent uniform draws from the constellation, shape
    ``(users, count)``."""
    if count < 0:
        raise ValueError("count must be non-negative")
    idx = rng.integers(0, c.order, size=(users, count))
    return c.points[idx]


def make_pilots(users: int, length: int, c: Constellation, design: str,
                rng=None) -> np.ndarray:
    """Dispatch on the configured pilot design."""
    if design == "hadamard":
        return hadamard_pilots(users, length, c)
    if design == "dft":
        return dft_pilots(users, length, c)
    if design == "random":
        if rng is None:
            raise ValueError("random pilots need a stream")
        return random_data(users, length, c, rng)
    raise ValueError(f"unknown pilot design {design!r}")


def observe(traces, frames, model: ChannelModel, mode: str = "explicit",
            rng=None) -> np.ndarray:
    """Synthesize the serving base station's received vectors.

    In "explicit" mode the interfering cells' channel-symbol products
    are summed on top of unit thermal noise; in "gaussian" mode only the
    served cell is used and the whole disturbance is drawn from its
    aggregate covariance. Returns an array of shape ``(T, M)``.
    """
    traces = [np.asarray(tr) for tr in traces]
    steps, dim = traces[0].shape
    m = model.antennas
    if dim != model.dim:
        raise ValueError("trace dimension does not match the model")
    for fr in frames:
        if fr.symbols.shape != (model.users, steps):
            raise ValueError("frame shape does not match the traces")
    if rng is None:
        raise ValueError("observation synthesis needs a stream")

    def cell_signal(i):
        blocks = traces[i].reshape(steps, model.users, m)
        return np.einsum("tkm,kt->tm", blocks, frames[i].symbols)

    if mode == "explicit":
        if len(traces) != len(frames):
            raise ValueError("one frame per trace is required")
        out = cell_signal(0)
        for i in range(1, len(traces)):
            out = out + cell_signal(i)
        noise = rng.standard_normal((steps, m)) + 1j * rng.standard_normal((steps, m))
        return out + math.sqrt(0.5) * noise
    if mode == "gaussian":
        out = cell_signal(0)
        root = psd_sqrt(model.noise_cov)
        z = rng.standard_normal((steps, m)) + 1j * rng.standard_normal((steps, m))
        return out + math.sqrt(0.5) * z @ root.T
    raise ValueError(f"unknown interference mode {mode!r}")


def symbol_vectors(c: Constellation, users: int) -> np.ndarray:
    """All length-``users`` symbol vectors in lexicographic point order
    (last user varies fastest), shape ``(order**users, users)``."""
    grids = np.meshgrid(*([c.points] * users), indexing="ij")
    return np.stack([g.reshape(-1) for g in grids], axis=1)


# -- implicit application of the stacked observation operator ----------
#
# With h the column-stacked channel matrix (user k occupies block k),
# the operator S = s^T kron I_M acts as:
#   S h        = H s
#   S V S^H    = sum_{k,l} s_k conj(s_l) V[block k, block l]
#   S^H x      = stack of conj(s_k) x
#   S^H W S    = blocks conj(s_k) s_l W

def vec_channel(h_mat: np.ndarray) -> np.ndarray:
    """Column-stack an (M, K) channel matrix into an (MK,) vector."""
    return np.asarray(h_mat).T.reshape(-1)


def unvec_channel(h_vec: np.ndarray, antennas: int) -> np.ndarray:
    """Inverse of :func:`vec_channel`."""
    return np.asarray(h_vec).reshape(-1, antennas).T


def predict_obs(s: np.ndarray, h_vec: np.ndarray) -> np.ndarray:
    """Noise-free observation ``S h = H s``."""
    blocks = np.asarray(h_vec).reshape(len(s), -1)
    return s @ blocks


def project_cov(s: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Observation-space projection ``S V S^H`` of a stacked covariance."""
    k = len(s)
    m = cov.shape[0] // k
    v4 = cov.reshape(k, m, k, m)
    return np.einsum("k,l,kmln->mn", s, s.conj(), v4, optimize=True)


def project_rows(s: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Half projection ``S V``, shape (M, MK)."""
    k = len(s)
    v3 = cov.reshape(k, cov.shape[0] // k, cov.shape[1])
    return np.einsum("k,kmp->mp", s, v3)


def backproject(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Adjoint application ``S^H x``: stacks ``conj(s_k) x``."""
    return (s.conj()[:, None] * x[None, :]).reshape(-1)


def backproject_cov(s: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Adjoint sandwich ``S^H W S``: block (k, l) is
    ``conj(s_k) s_l W``."""
    k = len(s)
    m = w.shape[0]
    out = np.einsum("k,l,mn->kmln", s.conj(), s, w, optimize=True)
    return out.reshape(k * m, k * m)
