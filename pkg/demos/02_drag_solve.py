"""
Hydrodynamic drag of a sedimenting pair
=======================================

Two particles, one pushed downward.  The drag fixed point is compared with
a dense direct solve, and the partner picks up a small induced force.
"""
import numpy as np

from mfstokes.micro import MicroState, solve_drag

state = MicroState.from_arrays([[0, 0, 0], [2.0, 0, 0]], [[0, 0, 1.0], [0, 0, 0]])
d = 0.2

forces, report = solve_drag(state, d, tol=1e-14)
dense, _ = solve_drag(state, d, method="dense_direct")
print("fixed point:", report)
print("forces:\n", forces.forces)
print("difference to dense solve:", np.abs(forces.forces - dense.forces).max())

# the isolated particle would feel exactly 6 pi R V
print("Stokes drag of a lone particle:", 6 * np.pi * state.R)

# moving the pair apart weakens the interaction roughly like 1/distance
for gap in (1.5, 2.0, 4.0, 8.0):
    s = MicroState.from_arrays([[0, 0, 0], [gap, 0, 0]], state.V)
    print(f"gap {gap:4.1f}: induced force on the partner {solve_drag(s, d)[0].forces[1, 2]:+.4e}")
