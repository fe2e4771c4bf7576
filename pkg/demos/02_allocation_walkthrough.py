"""
Matching features to resource blocks
====================================

The best block carries the most important feature, the second best the
second most important, and so on. The receiver undoes the permutation with
the feature order sent as side information.
"""

import numpy as np

from fastlink.allocator import (
    descending_order,
    inverse_allocate,
    side_info_bits,
    sinr_quality,
    st_allocate_mmse,
    st_allocate_svd,
    time_allocate,
)

# three features, three slots
A = np.array([["A0"], ["A1"], ["A2"]])
omega = [0.2, 0.9, 0.5]
h = [1.2, 0.3, 0.8]
print("slot order by |h|       u =", descending_order(np.abs(h)))
print("feature order by omega  v =", descending_order(omega))
A_t, eta = time_allocate(A, omega, h)
print("eta =", eta, " transmitted:", A_t.ravel())
print("restored:", inverse_allocate(A_t, eta).ravel())

# precoding-free MIMO: the block quality is the per-antenna MMSE SINR
H = np.stack([np.diag([2.0, 1.0]), np.diag([1.0, 2.0])])
Q = sinr_quality(H, 1.0, 0.01)
print("\nSINR per (antenna, slot):\n", np.round(Q.Q, 1))
_, eta, u = st_allocate_mmse(np.arange(4.0), [0.1, 1.0, 0.0, 0.8], H, 1.0, 0.01)
print("block order u =", u, " eta =", eta)

# SVD precoding: the quality is the singular value of each subchannel
H = np.broadcast_to(np.diag([3.0, 1.0]), (4, 2, 2))
omega = np.linspace(0.0, 1.0, 8)
_, eta, _ = st_allocate_svd(np.arange(8.0), omega, H)
print("\nstrong subchannel carries features", eta[0::2], "weak one", eta[1::2])

print("\nside information for c = 16 features:", side_info_bits(16), "bits")
