"""
Volume-constrained solves
=========================

A scalar multiplier shifts g until the binary solution has the requested
volume. The map from multiplier to volume is nonincreasing.
"""
import numpy as np

from tvrelax import SolverParams, solve_with_volume, volume_curve
from tvrelax import synthetic as sy

g = sy.ramp(16)
p = SolverParams(beta=0.01)

lams = np.linspace(-1, 1, 11)
print("W(lam):", volume_curve(g, p, lams).tolist())

for target in (4.0, 8.0, 12.0):
    res = solve_with_volume(g, p, target, 0.5)
    print(f"V = {target}: achieved {res.achieved_volume}, multiplier {res.multiplier:.4f}, "
          f"{res.evaluations} solves")

# a 2x2 block switches on all at once, so a volume of 2 cannot be met
blk = np.ones((4, 4))
blk[1:3, 1:3] = -1
res = solve_with_volume(blk, SolverParams(beta=0.05), 2.0, 0.1)
print("block, V = 2: plateau", res.plateau, "bracket volumes", res.bracket_volumes)
