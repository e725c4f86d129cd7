"""
Two-phase piecewise-constant segmentation
=========================================

Alternate between the region means and a binary TV problem until the
segmentation stops changing.
"""
import numpy as np

from tvrelax import SolverParams, chan_vese
from tvrelax import synthetic as sy

clean = sy.disk(64)
noisy, sigma = sy.add_noise(clean, 0.3, seed=11)
print(f"noise sigma {sigma:.3f}")

st = chan_vese(noisy, SolverParams(beta=8e-3))
print("outer iterations:", st.outer_iters, "converged:", st.converged)
print(f"c1 = {st.c1:.4f}, c2 = {st.c2:.4f}")
for k, (obj, ch) in enumerate(zip(st.objective_history[1:], st.change_history), start=1):
    print(f"  {k}: objective {obj:.6f}, changed area {ch:.4f}")
print("agreement with the clean disk:", np.mean(st.u == clean))
