"""One implicit step on a nearly flat potential behaves like a heat-equation filter."""
import numpy as np

import cscktorus as ck

grid = ck.GridSpec(1, 64)
(x,) = grid.coords()
eps = 1e-4
u = eps * np.cos(2 * np.pi * x)

for tau in (0.5, 1.0, 2.0):
    step = ck.solve_step(u, tau)
    v = np.asarray(step.v, dtype=float)
    ratio = 2 * np.mean(v * np.cos(2 * np.pi * x)) / eps
    print(f"tau={tau}: mode ratio {ratio:.8f}  linear prediction {1 / (1 + 4 * np.pi**2 * tau):.8f}"
          f"  newton={step.newton_iters} krylov={step.krylov_iters}")

# a strongly curved start needs more Newton work but the same equation holds:
# log det(I + Hess v) - (v - u)/tau is constant
u = -0.9 * np.cos(2 * np.pi * x) / (4 * np.pi**2)
step = ck.solve_step(u, 1.0)
v = np.asarray(step.v, dtype=np.longdouble)
gap = np.log(ck.hessian_metric(v).det) - (v - u)
print("curved start: newton", step.newton_iters, "max krylov", max(step.krylov_iters))
print("spread of log det - (v - u):", float(gap.max() - gap.min()))
print("monitors:", {k: f"{val:.3e}" for k, val in step.monitors.items()})
