"""Rank-matched assignment of features to resource blocks.

A resource block is a slot (SISO), a (transmit antenna, slot) pair
(precoding-free MIMO) or a (parallel subchannel, slot) pair (SVD MIMO).
Blocks are flattened slot by slot, block index fastest, so transmit
position p lives in slot p // N on block p % N. The i-th best block
carries the i-th most important feature:

    eta[u[i]] = v[i],  A_tilde[u[i]] = A[v[i]]

with u, v the descending sort orders of block quality and importance.
Ties keep ascending index order.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, IntegrityError
from .mimo import DEFAULT_SINR_CAP_DB, mmse_equalizer, sinr_per_tx, svd_decompose

__all__ = [
    "BlockQualityMatrix",
    "descending_order",
    "match",
    "time_allocate",
    "st_allocate_mmse",
    "st_allocate_svd",
    "inverse_allocate",
    "sinr_quality",
    "svd_quality",
    "side_info_bits",
    "is_permutation",
]


@dataclass(frozen=True)
class BlockQualityMatrix:
    """Quality per (block, slot); ``flat`` is the slot-major flattening."""

    Q: np.ndarray
    kind: str  # "abs" | "sinr" | "singular"

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 2:
            raise ConfigurationError(f"quality matrix must be 2-D, got {Q.shape}")
        if not np.all(np.isfinite(Q)) or np.any(Q < 0):
            raise ConfigurationError("block qualities must be finite and >= 0")
        object.__setattr__(self, "Q", Q)

    @property
    def flat(self):
        return self.Q.T.ravel()


def descending_order(values):
    """Indices sorting ``values`` high to low; ties in ascending index order."""
    values = np.asarray(values, dtype=float)
    return np.argsort(-values, kind="stable")


def is_permutation(eta, c=None):
    eta = np.asarray(eta)
    c = len(eta) if c is None else c
    return eta.shape == (c,) and np.array_equal(np.sort(eta), np.arange(c))


def match(A, omega, quality):
    """Core rank matching shared by every allocator. Returns (A_tilde, eta)."""
    A = np.asarray(A)
    omega = np.asarray(getattr(omega, "scores", omega), dtype=float).ravel()
    quality = np.asarray(quality, dtype=float).ravel()
    c = A.shape[0]
    if len(omega) != c or len(quality) != c:
        raise ConfigurationError(
            f"length mismatch: {c} features, {len(omega)} scores, {len(quality)} blocks"
        )
    u = descending_order(quality)
    v = descending_order(omega)
    eta = np.empty(c, dtype=int)
    eta[u] = v
    return A[eta], eta


def time_allocate(A, omega, h_pred):
    """Time-domain allocation over c slots by predicted |h|."""
    return match(A, omega, np.abs(np.asarray(h_pred)))


def _slots(H_seq, c, per_slot):
    H_seq = np.asarray(getattr(H_seq, "gains", H_seq), dtype=complex)
    if H_seq.ndim != 3:
        raise ConfigurationError(f"MIMO CSI must have shape (slots, nr, nt), got {H_seq.shape}")
    if c % per_slot:
        raise ConfigurationError(f"c = {c} is not divisible by {per_slot} blocks per slot")
    need = c // per_slot
    if H_seq.shape[0] < need:
        raise ConfigurationError(f"need {need} CSI slots, got {H_seq.shape[0]}")
    return H_seq[:need]


def sinr_quality(H_seq, power, noise_variance, cap_db=DEFAULT_SINR_CAP_DB):
    """Block quality matrix of per-antenna MMSE SINRs, shape (Nt, slots)."""
    cols = [sinr_per_tx(mmse_equalizer(H, power, noise_variance), cap_db) for H in H_seq]
    return BlockQualityMatrix(np.stack(cols, axis=1), "sinr")


def svd_quality(H_seq, streams=None):
    """Block quality matrix of singular values, shape (N, slots)."""
    cols = [svd_decompose(H).singular_values for H in H_seq]
    Q = np.stack(cols, axis=1)
    return BlockQualityMatrix(Q if streams is None else Q[:streams], "singular")


def st_allocate_mmse(A, omega, H_seq, power, noise_variance, cap_db=DEFAULT_SINR_CAP_DB):
    """Precoding-free space-time allocation.

    Returns (A_tilde, eta, u) where u is the quality order the receiver
    feeds back.
    """
    A = np.asarray(A)
    nt = np.asarray(getattr(H_seq, "gains", H_seq)).shape[-1]
    H_seq = _slots(H_seq, A.shape[0], nt)
    q = sinr_quality(H_seq, power, noise_variance, cap_db).flat
    A_t, eta = match(A, omega, q)
    return A_t, eta, descending_order(q)


def st_allocate_svd(A, omega, H_seq, streams=None):
    """Precoding-based space-time allocation over singular-value subchannels."""
    A = np.asarray(A)
    nr, nt = np.asarray(getattr(H_seq, "gains", H_seq)).shape[-2:]
    d = min(nr, nt) if streams is None else int(streams)
    if d > min(nr, nt):
        raise ConfigurationError(f"d = {d} exceeds min(Nr, Nt) = {min(nr, nt)}")
    H_seq = _slots(H_seq, A.shape[0], d)
    q = svd_quality(H_seq, d).flat
    A_t, eta = match(A, omega, q)
    return A_t, eta, descending_order(q)


def inverse_allocate(X_hat, eta_hat):
    """Restore the default feature order: A_hat[eta[p]] = X_hat[p]."""
    X_hat = np.asarray(X_hat)
    eta_hat = np.asarray(eta_hat)
    if not is_permutation(eta_hat, X_hat.shape[0]):
        raise IntegrityError(f"feature order is not a permutation of 0..{X_hat.shape[0] - 1}")
    out = np.empty_like(X_hat)
    out[eta_hat] = X_hat
    return out


def side_info_bits(c):
    """Overhead of sending a length-c permutation as fixed-width indices."""
    return int(c * int(np.ceil(np.log2(c)))) if c > 1 else 0
