"""Reconstruction quality: MSE, PSNR and mean-SSIM with uniform windows."""

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigurationError

__all__ = ["QualityReport", "mse", "psnr", "ssim", "report", "PSNR_CAP_DB"]

PSNR_CAP_DB = 100.0


@dataclass(frozen=True)
class QualityReport:
    mse: float
    psnr: float
    ssim: float


def _arr(x):
    return np.asarray(getattr(x, "pixels", x), dtype=float)


def mse(s, s_hat):
    s, s_hat = _arr(s).ravel(), _arr(s_hat).ravel()
    if s.shape != s_hat.shape:
        raise ConfigurationError(f"length mismatch {s.shape} vs {s_hat.shape}")
    return float(np.mean((s - s_hat) ** 2))


def psnr(s, s_hat, max_val=1.0, cap=PSNR_CAP_DB):
    return psnr_from_mse(mse(s, s_hat), max_val, cap)


def psnr_from_mse(m, max_val=1.0, cap=PSNR_CAP_DB):
    """10 log10(max^2 / mse) in dB, saturating at ``cap`` (also for rounding-level MSE)."""
    if m <= 0:
        return cap
    return float(min(10 * np.log10(max_val ** 2 / m), cap))


def _as_2d(x, shape):
    if hasattr(x, "as_array"):
        a = x.as_array()
    else:
        a = np.asarray(x, dtype=float)
        if shape is not None:
            a = a.reshape(shape)
    if a.ndim == 3:  # colour: average SSIM over channels handled by caller
        return a
    if a.ndim != 2:
        raise ConfigurationError(f"SSIM needs a 2-D image, got shape {a.shape}")
    return a


def _ssim_2d(x, y, win, c1, c2):
    if win > x.shape[0] or win > x.shape[1]:
        raise ConfigurationError(f"window {win} larger than image {x.shape}")
    wx = sliding_window_view(x, (win, win))
    wy = sliding_window_view(y, (win, win))
    mx, my = wx.mean(axis=(-2, -1)), wy.mean(axis=(-2, -1))
    # centred moments so that x == y gives num == den bit for bit
    dx = wx - mx[..., None, None]
    dy = wy - my[..., None, None]
    vx = (dx * dx).mean(axis=(-2, -1))
    vy = (dy * dy).mean(axis=(-2, -1))
    cxy = (dx * dy).mean(axis=(-2, -1))
    num = (2 * mx * my + c1) * (2 * cxy + c2)
    den = (mx ** 2 + my ** 2 + c1) * (vx + vy + c2)
    return num / den


def ssim(s, s_hat, window=8, max_val=1.0, shape=None):
    """Mean SSIM over all stride-1 ``window`` x ``window`` uniform windows.

    Local statistics use population (biased) variances; C1 = (0.01 max)^2,
    C2 = (0.03 max)^2.
    """
    x, y = _as_2d(s, shape), _as_2d(s_hat, shape)
    if x.shape != y.shape:
        raise ConfigurationError(f"shape mismatch {x.shape} vs {y.shape}")
    c1, c2 = (0.01 * max_val) ** 2, (0.03 * max_val) ** 2
    if x.ndim == 3:
        return float(np.mean([_ssim_2d(x[..., i], y[..., i], window, c1, c2).mean()
                              for i in range(x.shape[-1])]))
    return float(_ssim_2d(x, y, window, c1, c2).mean())


def report(s, s_hat, max_val=1.0, window=8, cap=PSNR_CAP_DB):
    """Scores on the reconstruction clamped to [0, max_val]."""
    clamped = np.clip(_arr(s_hat), 0.0, max_val)
    if hasattr(s_hat, "as_array"):
        clamped = clamped.reshape(s_hat.as_array().shape)
    m = mse(s, clamped)
    shape = s.as_array().shape if hasattr(s, "as_array") else None
    return QualityReport(m, psnr_from_mse(m, max_val, cap), ssim(s, clamped, window, max_val, shape))
