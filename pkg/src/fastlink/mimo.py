"""MMSE equalization, per-antenna SINR and SVD precoding for flat MIMO links."""

from dataclasses import dataclass

import numpy as np
from scipy.special import exp1

from .errors import ConfigurationError, NumericalError
from .fading import complex_noise

__all__ = [
    "Equalizer",
    "SvdTriple",
    "DEFAULT_SINR_CAP_DB",
    "mmse_equalizer",
    "mmse_scalar_gain",
    "mean_rayleigh_gain",
    "sinr_per_tx",
    "svd_decompose",
    "transmit_mmse",
    "transmit_svd",
]

DEFAULT_SINR_CAP_DB = 300.0


@dataclass(frozen=True)
class Equalizer:
    G: np.ndarray
    H: np.ndarray
    power: float
    noise_variance: float

    def residual(self):
        """Max-abs residual of G (H H^H + sigma^2/P I) - H^H; zero for an exact G."""
        nr = self.H.shape[0]
        gram = self.H @ self.H.conj().T + (self.noise_variance / self.power) * np.eye(nr)
        return np.max(np.abs(self.G @ gram - self.H.conj().T))


@dataclass(frozen=True)
class SvdTriple:
    """H = U D V^H with singular values sorted in descending order."""

    U: np.ndarray
    D: np.ndarray
    V: np.ndarray
    singular_values: np.ndarray

    @property
    def n(self):
        return len(self.singular_values)

    def precoder(self, d):
        if d > self.n:
            raise ConfigurationError(f"d = {d} streams exceeds min(Nr, Nt) = {self.n}")
        return self.V[:, :d]


def _as_matrix(H):
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2:
        raise ConfigurationError(f"channel matrix must be 2-D, got shape {H.shape}")
    if not np.all(np.isfinite(H)):
        raise ConfigurationError("channel matrix has non-finite entries")
    return H


def mmse_equalizer(H, power, noise_variance):
    """G = H^H (H H^H + sigma^2/P I)^-1.

    ``noise_variance`` may be 0 (zero-forcing limit); a singular Gram matrix
    then raises :class:`NumericalError`.
    """
    H = _as_matrix(H)
    if not power > 0:
        raise ConfigurationError(f"power must be > 0, got {power}")
    if not noise_variance >= 0:
        raise ConfigurationError(f"noise variance must be >= 0, got {noise_variance}")
    nr = H.shape[0]
    gram = H @ H.conj().T + (noise_variance / power) * np.eye(nr)
    try:
        # G gram = H^H  <=>  gram^H G^H = H, and gram is Hermitian
        G = np.linalg.solve(gram, H).conj().T
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular MMSE Gram matrix: {exc}") from exc
    if not np.all(np.isfinite(G)):
        raise NumericalError("MMSE equalizer is not finite")
    return Equalizer(G, H, float(power), float(noise_variance))


def mmse_scalar_gain(h, power, noise_variance):
    """Elementwise 1x1 MMSE equalizer conj(h) / (|h|^2 + sigma^2/P); 0 where h = 0."""
    h = np.asarray(h, dtype=complex)
    den = np.abs(h) ** 2 + noise_variance / power
    safe = np.where(den > 0, den, 1.0)
    return np.where(den > 0, np.conj(h) / safe, 0.0)


def mean_rayleigh_gain(power, noise_variance):
    """E[|h|^2 / (|h|^2 + sigma^2/P)] for h ~ CN(0, 1).

    Closed form 1 - a e^a E1(a) with a = sigma^2 / P; 1 when noiseless.
    """
    a = noise_variance / power
    if a == 0:
        return 1.0
    return float(1.0 - a * np.exp(a) * exp1(a))


def sinr_per_tx(eq, cap_db=DEFAULT_SINR_CAP_DB):
    """Post-equalization SINR of every transmit antenna (linear scale).

    Infinite values (no interference and no noise) are reported as
    ``10**(cap_db/10)``; an all-zero equalizer row gives 0.
    """
    G, H, P, s2 = eq.G, eq.H, eq.power, eq.noise_variance
    cap = 10 ** (cap_db / 10)
    GH = G @ H  # entry (j, k) = g_j h_k
    pw = np.abs(GH) ** 2
    signal = P * np.diag(pw)
    interference = P * (pw.sum(axis=1) - np.diag(pw))
    noise = s2 * np.sum(np.abs(G) ** 2, axis=1)
    den = interference + noise
    out = np.empty(H.shape[1])
    for j in range(H.shape[1]):
        if signal[j] == 0:
            out[j] = 0.0
        elif den[j] <= 0 or signal[j] / den[j] > cap:
            out[j] = cap
        else:
            out[j] = signal[j] / den[j]
    return out


def svd_decompose(H):
    """SVD with a fixed phase convention.

    Each column of U is rotated so that its largest-magnitude entry is real
    and nonnegative; the matching column of V gets the same rotation so the
    product U D V^H is unchanged.
    """
    H = _as_matrix(H)
    nr, nt = H.shape
    U, lam, Vh = np.linalg.svd(H)
    V = Vh.conj().T
    for i in range(nr):
        k = np.argmax(np.abs(U[:, i]))
        if np.abs(U[k, i]) == 0:
            continue
        ph = U[k, i] / np.abs(U[k, i])
        U[:, i] /= ph
        if i < len(lam):
            V[:, i] /= ph
    D = np.zeros((nr, nt))
    D[np.arange(len(lam)), np.arange(len(lam))] = lam
    return SvdTriple(U, D, V, lam)


def transmit_mmse(x, H, noise, eq, rng=None):
    """x_hat = G (H x + n) for one Nt-vector (or Nt x m block)."""
    x = np.asarray(x, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if x.shape[0] != H.shape[1] or eq.G.shape != (H.shape[1], H.shape[0]):
        raise ConfigurationError(f"dimension mismatch: x {x.shape}, H {H.shape}, G {eq.G.shape}")
    rng = noise.rng() if rng is None else rng
    n = complex_noise((H.shape[0],) + x.shape[1:], noise.variance, rng)
    return eq.G @ (H @ x + n)


def transmit_svd(x, svd, noise, rng=None):
    """Precode with the first d right singular vectors, detect with U^H.

    Returns the first d entries of U^H (H Vbar x + n), i.e. lambda_k x_k plus
    rotated noise. ``x`` may be a d-vector or a d x m block.
    """
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    Vbar = svd.precoder(d)
    H = svd.U @ svd.D @ svd.V.conj().T
    rng = noise.rng() if rng is None else rng
    n = complex_noise((H.shape[0],) + x.shape[1:], noise.variance, rng)
    y = H @ (Vbar @ x) + n
    return (svd.U.conj().T @ y)[:d]
