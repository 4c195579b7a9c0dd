"""
Exact and entropic W2 distances
===============================

Point clouds in phase space compared with the exact assignment, the
general-weight transport LP and debiased Sinkhorn.
"""
import numpy as np

from mfstokes.metrics import wasserstein2

rng = np.random.default_rng(0)
A = rng.normal(size=(200, 6))
B = rng.normal(size=(200, 6)) + 0.3

exact = wasserstein2(A, B)
print("exact:   ", exact.w2, exact.method)
entropic = wasserstein2(A, B, method="entropic")
print("entropic:", entropic.w2, "epsilon", entropic.epsilon)

# unequal sizes and weights go through the transportation LP
w = rng.uniform(size=50)
lp = wasserstein2(A[:50], B, w / w.sum(), None)
print("weighted:", lp.w2, lp.method, "plan support", lp.plan_support_size)

# a pure translation by c costs exactly |c|
print("translation by 0.7 e1:", wasserstein2(A, A + [0.7, 0, 0, 0, 0, 0]).w2)
