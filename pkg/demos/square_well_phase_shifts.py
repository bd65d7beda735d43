"""Square well without absorption: bound state, unitary S and the margin.

Run with ``python demos/square_well_phase_shifts.py``.
"""
import numpy as np

from dissipative import OpticalModel, PotentialSpec, RadialGrid
from dissipative.resolvent import Region, discrete_spectrum, refine_eigenvalue
from dissipative.scattering import scattering_coefficients
from dissipative.singularities import regularity_margin

V = PotentialSpec.square_well(-3.0, 1.0)
model = OpticalModel(V, PotentialSpec.zero(), RadialGrid(30.0, 600))

rep = discrete_spectrum(model, 0, Region((-5.0, -1e-3), (-1.0, 0.0)))
for z in rep.eigenvalues:
    z_ref, _ = refine_eigenvalue(model, 0, z)
    print(f"bound state  E = {z_ref.real:.6f}")

# S_0 = exp(2i delta_0) has modulus one when W = 0
lams = np.linspace(0.5, 8.0, 6)
s0 = scattering_coefficients(model.with_grid(RadialGrid(2.0, 400)), 0, lams)
for lam, s in zip(lams, s0):
    print(f"lambda {lam:5.2f}   |S0| = {abs(s):.10f}   delta0 = {np.angle(s) / 2:+.6f}")

# without absorption the margin is exactly one
print("margin at lambda=2:", regularity_margin(model.with_grid(RadialGrid(2.0, 400)), 2.0, 4).overall)
