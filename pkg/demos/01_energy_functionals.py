"""Energy functionals of a pair of torus potentials."""
import numpy as np

import cscktorus as ck

grid = ck.GridSpec(1, 64)
(x,) = grid.coords()

# v has metric 1 + eps cos(2 pi x); u is the flat potential
eps = 0.5
u = grid.zeros()
v = -eps * np.cos(2 * np.pi * x) / (4 * np.pi**2)

report = ck.functional_report(u, v)
for name, value in report.as_dict().items():
    if value is not None:
        print(f"{name:>9s} = {value: .6e}")

# the closed forms for this pair
print("E  closed form:", -eps**2 / (16 * np.pi**2))
print("I  closed form:", eps**2 / (8 * np.pi**2))

# cocycle check on three random potentials
rng = np.random.default_rng(0)
a, b, c = (ck.random_kahler_potential(grid, rng) for _ in range(3))
gap = ck.k_energy(a, b) + ck.k_energy(b, c) - ck.k_energy(a, c)
print("K cocycle defect:", gap)

# in two dimensions wedge products become mixed determinants
grid2 = ck.GridSpec(2, 32)
p, q = (ck.random_kahler_potential(grid2, rng) for _ in range(2))
I, J = ck.func_I(p, q), ck.func_J(p, q)
print(f"n=2: J/2 = {J / 2:.3e} <= I-J = {I - J:.3e} <= 2J = {2 * J:.3e}")
