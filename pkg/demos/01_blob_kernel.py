"""
The ball-averaged Stokes kernel
===============================

Velocity generated by a point force smeared uniformly over a ball of
radius d, compared with the singular point kernel.
"""
import numpy as np

from mfstokes.kernel import oseen, oseen_blob

d = 0.1
e = np.array([1.0, 0.0, 0.0])

# finite at the centre, where the point kernel blows up
print("centre:", np.diag(oseen_blob(np.zeros(3), d)), "= 1/(4 pi d) =", 1 / (4 * np.pi * d))

# the relative gap to the point kernel falls off like (d/s)^2 / 5
for ratio in (1, 2, 5, 10, 20, 50):
    x = ratio * d * e
    gap = np.linalg.norm(oseen_blob(x, d) - oseen(x)) / np.linalg.norm(oseen(x))
    print(f"s = {ratio:3d} d   relative gap {gap:.3e}   (d/s)^2/5 = {0.2 / ratio**2:.3e}")

# stacked evaluation: any leading batch shape works
grid = np.stack(np.meshgrid(*[np.linspace(-0.3, 0.3, 5)] * 3, indexing="ij"), axis=-1)
print("batch output shape:", oseen_blob(grid, d).shape)
