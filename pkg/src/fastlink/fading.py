"""Correlated Rayleigh fading via the enhanced sum-of-sinusoids model.

Each path m contributes an in-phase and a quadrature sinusoid

    I_m(nTs) = a_m cos[(2 pi fd n Ts + psi_m) cos(alpha_m) + phi_m]
    Q_m(nTs) = b_m sin[(2 pi fd n Ts + psi_m) cos(alpha_m) + phi_m]

and the sample is h_n = (I + jQ) summed over paths, scaled by 1/sqrt(M).
Channels are block fading: one CSI sample per slot.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

__all__ = [
    "SosParams",
    "CsiSequence",
    "NoiseModel",
    "ChannelConfig",
    "derive_seed",
    "sos_generate",
    "sos_ensemble",
    "mimo_generate",
    "apply_siso",
    "apply_mimo",
    "complex_noise",
]


def derive_seed(seed, *keys):
    """Deterministic 64-bit child seed from a parent seed and integer keys."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in keys]])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _check_shape(num_paths, doppler_fd, sample_period):
    if int(num_paths) < 1:
        raise ConfigurationError(f"num_paths must be >= 1, got {num_paths}")
    if not sample_period > 0:
        raise ConfigurationError(f"sample_period must be > 0, got {sample_period}")
    if not doppler_fd >= 0:
        raise ConfigurationError(f"doppler_fd must be >= 0, got {doppler_fd}")


@dataclass(frozen=True)
class SosParams:
    """Per-path parameters of one sum-of-sinusoids realization.

    Use :meth:`draw` to sample the random parts from a seed.
    """

    num_paths: int
    doppler_fd: float
    sample_period: float
    a: np.ndarray
    b: np.ndarray
    alpha: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    rng_seed: int = 0

    def __post_init__(self):
        _check_shape(self.num_paths, self.doppler_fd, self.sample_period)
        for name in ("a", "b", "alpha", "phi", "psi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (self.num_paths,):
                raise ConfigurationError(
                    f"{name} must have length {self.num_paths}, got shape {arr.shape}"
                )
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def draw(cls, num_paths, doppler_fd, sample_period, seed):
        _check_shape(num_paths, doppler_fd, sample_period)
        rng = np.random.default_rng(seed)
        m = int(num_paths)
        a = rng.standard_normal(m)
        b = rng.standard_normal(m)
        alpha, phi, psi = rng.uniform(-np.pi, np.pi, size=(3, m))
        return cls(m, float(doppler_fd), float(sample_period), a, b, alpha, phi, psi, int(seed))

    def redraw(self, seed):
        """Same (M, fd, Ts), fresh random parts."""
        return SosParams.draw(self.num_paths, self.doppler_fd, self.sample_period, seed)


@dataclass(frozen=True)
class CsiSequence:
    """Time-indexed channel gains.

    ``gains`` has shape ``(t,)`` for SISO or ``(t, nr, nt)`` for MIMO.
    """

    gains: np.ndarray
    slot_period: float = 1.0

    def __post_init__(self):
        g = np.asarray(self.gains, dtype=complex)
        if g.ndim not in (1, 3):
            raise ConfigurationError(f"gains must be 1-D or 3-D, got shape {g.shape}")
        g.setflags(write=False)
        object.__setattr__(self, "gains", g)

    @property
    def is_mimo(self):
        return self.gains.ndim == 3

    @property
    def shape(self):
        """(nr, nt); (1, 1) for SISO."""
        return self.gains.shape[1:] if self.is_mimo else (1, 1)

    def __len__(self):
        return self.gains.shape[0]

    def __getitem__(self, idx):
        return self.gains[idx]

    def slice(self, start, stop=None):
        return CsiSequence(self.gains[start:stop], self.slot_period)


@dataclass(frozen=True)
class NoiseModel:
    """Circular complex AWGN; ``variance`` is the total per complex sample.

    A variance of 0 is accepted and means a noiseless channel.
    """

    variance: float
    rng_seed: int | None = None

    def __post_init__(self):
        if not self.variance >= 0:
            raise ConfigurationError(f"noise variance must be >= 0, got {self.variance}")

    def rng(self):
        return np.random.default_rng(self.rng_seed)


@dataclass(frozen=True)
class ChannelConfig:
    """Link channel used for training and distillation.

    kind is one of ``"rayleigh"`` (SOS block fading, one sample per feature),
    ``"awgn"`` (unit gain plus noise) or ``"identity"`` (unit gain, no noise).
    """

    kind: str = "rayleigh"
    snr_db: float = 13.0
    power: float = 1.0
    num_paths: int = 32
    doppler_fd: float = 50.0
    sample_period: float = 1e-3

    def __post_init__(self):
        if self.kind not in ("rayleigh", "awgn", "identity"):
            raise ConfigurationError(f"unknown channel kind {self.kind!r}")
        if not self.power > 0:
            raise ConfigurationError("power must be > 0")
        _check_shape(self.num_paths, self.doppler_fd, self.sample_period)

    @property
    def noise_variance(self):
        if self.kind == "identity" or np.isinf(self.snr_db):
            return 0.0
        return self.power / 10 ** (self.snr_db / 10)

    def draw_gains(self, slots, seed):
        """Per-slot SISO gains for one image."""
        if self.kind != "rayleigh":
            return np.ones(slots, dtype=complex)
        params = SosParams.draw(self.num_paths, self.doppler_fd, self.sample_period, seed)
        return sos_generate(params, slots).gains


def _sos_samples(a, b, alpha, phi, psi, fd, ts, n):
    # a, b, ... have shape (..., M); n has shape (t,)
    m = a.shape[-1]
    arg = (2 * np.pi * fd * ts * n[:, None] + psi[..., None, :]) * np.cos(alpha[..., None, :]) + phi[..., None, :]
    re = a[..., None, :] * np.cos(arg)
    im = b[..., None, :] * np.sin(arg)
    return (re.sum(axis=-1) + 1j * im.sum(axis=-1)) / np.sqrt(m)


def sos_generate(params, t, start=0):
    """Generate ``t`` consecutive SOS samples h_start .. h_{start+t-1}."""
    if int(t) < 1:
        raise ConfigurationError(f"slot count must be >= 1, got {t}")
    n = np.arange(start, start + int(t), dtype=float)
    h = _sos_samples(params.a, params.b, params.alpha, params.phi, params.psi,
                     params.doppler_fd, params.sample_period, n)
    return CsiSequence(h, params.sample_period)


def sos_ensemble(num_paths, doppler_fd, sample_period, t, realizations, seed):
    """Independent realizations stacked as a ``(realizations, t)`` array.

    Vectorized equivalent of calling :func:`sos_generate` on
    ``realizations`` independently drawn parameter sets; used for
    ensemble statistics.
    """
    _check_shape(num_paths, doppler_fd, sample_period)
    rng = np.random.default_rng(seed)
    r, m = int(realizations), int(num_paths)
    a = rng.standard_normal((r, m))
    b = rng.standard_normal((r, m))
    alpha, phi, psi = rng.uniform(-np.pi, np.pi, size=(3, r, m))
    n = np.arange(int(t), dtype=float)
    return _sos_samples(a, b, alpha, phi, psi, doppler_fd, sample_period, n)


def mimo_generate(template, t, nr, nt, seed):
    """Nr x Nt independent SOS links assembled into per-slot matrices.

    Link (r, c) uses ``template.redraw(derive_seed(seed, r, c))``.
    """
    if nr < 1 or nt < 1:
        raise ConfigurationError(f"antenna counts must be >= 1, got {nr}x{nt}")
    out = np.empty((int(t), nr, nt), dtype=complex)
    for r in range(nr):
        for c in range(nt):
            out[:, r, c] = sos_generate(template.redraw(derive_seed(seed, r, c)), t).gains
    return CsiSequence(out, template.sample_period)


def complex_noise(shape, variance, rng):
    """i.i.d. CN(0, variance) samples."""
    if variance == 0:
        return np.zeros(shape, dtype=complex)
    scale = np.sqrt(variance / 2)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def apply_siso(x, h, noise, rng=None):
    """y = h*x + n for one slot."""
    x = np.asarray(x, dtype=complex)
    rng = noise.rng() if rng is None else rng
    return h * x + complex_noise(x.shape, noise.variance, rng)


def apply_mimo(X, H, noise, rng=None):
    """Y = H X + N with X of shape (nt, m)."""
    X = np.asarray(X, dtype=complex)
    H = np.asarray(H, dtype=complex)
    if X.ndim == 1:
        X = X[:, None]
    if H.ndim != 2 or H.shape[1] != X.shape[0]:
        raise ConfigurationError(f"dimension mismatch: H {H.shape} vs X {X.shape}")
    rng = noise.rng() if rng is None else rng
    return H @ X + complex_noise((H.shape[0], X.shape[1]), noise.variance, rng)
