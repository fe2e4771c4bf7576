"""CSV result files and grouped summaries."""

import csv
import math
from collections import defaultdict
from dataclasses import astuple, fields

import numpy as np
from scipy import stats

from ..errors import ConfigurationError, ParseError
from .experiment import ResultRow

__all__ = ["CSV_COLUMNS", "SUMMARY_COLUMNS", "emit_csv", "read_csv", "summarize", "emit_summary"]

CSV_COLUMNS = tuple(f.name for f in fields(ResultRow))
SUMMARY_COLUMNS = ("scheme", "mode", "snr_db", "trials", "psnr_mean", "psnr_std", "psnr_ci95",
                   "ssim_mean", "ssim_std", "mse_mean", "side_info_bits", "predictor_nmse_mean")


def _fmt(v):
    # repr gives the shortest round-tripping form, so output is platform stable
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def emit_csv(rows, path):
    if not rows:
        raise ConfigurationError("no result rows to write")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_fmt(v) for v in astuple(r)])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_COLUMNS:
            raise ParseError(f"{path}: header does not match {','.join(CSV_COLUMNS)}")
        rows = []
        for lineno, rec in enumerate(reader, 2):
            if len(rec) != len(CSV_COLUMNS):
                raise ParseError(f"{path}:{lineno}: expected {len(CSV_COLUMNS)} fields, got {len(rec)}")
            try:
                rows.append(ResultRow(rec[0], rec[1], float(rec[2]), int(rec[3]), float(rec[4]),
                                      float(rec[5]), float(rec[6]), int(rec[7]), float(rec[8])))
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: {exc}") from exc
    return rows


def summarize(rows):
    """One record per (scheme, mode, snr) in first-seen order.

    ``psnr_ci95`` is the half-width of a Student-t 95% interval of the mean.
    """
    if not rows:
        raise ConfigurationError("no result rows to summarize")
    groups = defaultdict(list)
    for r in rows:
        groups[(r.scheme, r.mode, r.snr_db)].append(r)
    out = []
    for (scheme, mode, snr), grp in groups.items():
        psnr = np.array([r.psnr for r in grp])
        ssim = np.array([r.ssim for r in grp])
        n = len(grp)
        std = float(psnr.std(ddof=1)) if n > 1 else 0.0
        ci = float(stats.t.ppf(0.975, n - 1) * std / math.sqrt(n)) if n > 1 else 0.0
        nm = np.array([r.predictor_nmse for r in grp])
        out.append({
            "scheme": scheme, "mode": mode, "snr_db": snr, "trials": n,
            "psnr_mean": float(psnr.mean()), "psnr_std": std, "psnr_ci95": ci,
            "ssim_mean": float(ssim.mean()), "ssim_std": float(ssim.std(ddof=1)) if n > 1 else 0.0,
            "mse_mean": float(np.mean([r.mse for r in grp])),
            "side_info_bits": grp[0].side_info_bits,
            "predictor_nmse_mean": float(nm.mean()) if not np.all(np.isnan(nm)) else float("nan"),
        })
    return out


def emit_summary(rows, path=None):
    """Write the summary as CSV to ``path`` (or return the text if None)."""
    lines = [",".join(SUMMARY_COLUMNS)]
    for rec in summarize(rows):
        lines.append(",".join(_fmt(rec[k]) for k in SUMMARY_COLUMNS))
    text = "\n".join(lines) + "\n"
    if path is None:
        return text
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
