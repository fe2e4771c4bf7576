"""
A small SNR sweep over all five schemes
=======================================

Same pipeline as ``fastlink run`` with fewer trials, printed as a table.
Set FASTLINK_THREADS to use more cores.
"""

import sys

import numpy as np

from fastlink.harness.config import LinkConfig
from fastlink.harness.experiment import prepare, run_experiment
from fastlink.harness.output import summarize

mode = sys.argv[1] if len(sys.argv) > 1 else "siso"
cfg = LinkConfig(modes=(mode,), trials=50, snr_db=(0.0, 10.0, 20.0))
rows = run_experiment(cfg, prepare(cfg))

table = {(r["scheme"], r["snr_db"]): r for r in summarize(rows)}
print("mode:", mode, " trials:", cfg.trials)
print("%-11s" % "scheme" + "".join("%12s" % ("%g dB" % s) for s in cfg.snr_db))
for scheme in cfg.schemes:
    cells = ["%6.2f+-%4.2f" % (table[scheme, s]["psnr_mean"], table[scheme, s]["psnr_ci95"]) for s in cfg.snr_db]
    print("%-11s" % scheme + "".join("%12s" % c for c in cells))

nm = [r.predictor_nmse for r in rows if r.scheme == "fast_pc"]
print("\nmean predictor NMSE over the transmission slots: %.3f" % np.mean(nm))
