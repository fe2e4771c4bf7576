"""
Fading channels and how far ahead they can be predicted
=======================================================

A sum-of-sinusoids Rayleigh process is sampled once per slot. We fit the
linear predictor on 512 past slots and look at multi-step error as the
Doppler spread grows.
"""

import numpy as np

from fastlink import predictor
from fastlink.fading import sos_ensemble

Ts = 1e-3
history, horizon, runs = 512, 16, 100

# the envelope of a single realization: deep fades are what allocation works around
h = sos_ensemble(32, 50.0, Ts, 200, 1, seed=0)[0]
print("envelope |h| over 200 slots: min %.3f  median %.3f  max %.3f"
      % (np.abs(h).min(), np.median(np.abs(h)), np.abs(h).max()))

print("\n fd*Ts   NMSE(step 1)   NMSE(step %d)   hold-last(step %d)" % (horizon, horizon))
for fd in (5.0, 20.0, 100.0, 200.0):
    H = sos_ensemble(32, fd, Ts, history + horizon, runs, seed=1)
    err = np.zeros(horizon)
    hold = 0.0
    power = np.mean(np.abs(H[:, history:]) ** 2)
    for row in H:
        past, future = row[:history], row[history:]
        pred = predictor.predict(predictor.fit(past, 8), horizon).gains
        err += np.abs(pred - future) ** 2
        hold += np.abs(past[-1] - future[-1]) ** 2
    err /= runs * power
    print("%6.3f   %12.2e   %12.2e   %14.2e" % (fd * Ts, err[0], err[-1], hold / (runs * power)))

# the oracle used by the known-CSI schemes replays the future exactly
future = H[0, history:]
print("\noracle NMSE:", predictor.nmse(predictor.predict(predictor.oracle(future), horizon), future))
