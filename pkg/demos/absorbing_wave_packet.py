"""A wave packet started inside an absorbing region.

The norm decreases monotonically and levels off once the packet has
left the support of W; the plateau is the scattering probability.
"""
import warnings

import numpy as np

from dissipative import OpticalModel, PotentialSpec, RadialGrid
from dissipative.dynamics import gaussian_state, propagate
from dissipative.scattering import scattering_coefficients

grid = RadialGrid(200.0, 10000)
model = OpticalModel(PotentialSpec.zero(), PotentialSpec.square_well(1.0, 1.0), grid)
u0 = gaussian_state(grid, 0.5, 0.2)

# dt resolves the packet but not the stiffest grid modes; the warning says so
warnings.simplefilter("ignore")
tr = propagate(model, 0, u0, 20.0, 0.005)
for t in (0.0, 0.5, 1.0, 2.0, 5.0, 20.0):
    i = int(round(t / (tr.times[1] - tr.times[0])))
    print(f"t = {t:5.1f}   ||u_t||^2 = {tr.norms[i] ** 2:.6f}")
print(f"p_scatt = {tr.p_scatt_estimate:.5f}   p_abs = {tr.p_abs_estimate:.5f}")
print(f"monotone: {tr.monotone}   edge leakage: {tr.leakage:.1e}")

# energy-resolved absorption 1 - |S_0|^2
small = model.with_grid(RadialGrid(2.0, 400))
lams = np.array([0.5, 1.0, 2.0, 5.0, 10.0])
s0 = scattering_coefficients(small, 0, lams)
for lam, s in zip(lams, s0):
    print(f"lambda {lam:5.1f}   1 - |S0|^2 = {1 - abs(s) ** 2:.5f}")
