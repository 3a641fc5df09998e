"""Compare iterates with the flow they discretise."""
import numpy as np

import cscktorus as ck

grid = ck.GridSpec(1, 64)
(x,) = grid.coords()
u0 = 0.01 * np.cos(2 * np.pi * x)

flow = ck.integrate_flow(ck.FlowConfig(initial=u0, t_end=0.2, dt=1e-4, record_every=250))
for t, K, mass in zip(flow.times, flow.K, flow.mass):
    print(f"t={t:.3f}  K={K:.4e}  volume={mass:.15f}")

report = ck.compare_rothe(u0, [0.1, 0.05, 0.025], t_end=0.2, dt=1e-4)
for row in zip(report.tau, report.err, report.order):
    print("tau={} err={:.4e} order={}".format(*row))

# every mode of this grid has tau |k|^2 >= 0.99 across the sweep, so implicit
# Euler is not yet in its asymptotic first-order regime here
for tau in report.tau:
    lam = 4 * np.pi**2
    print(f"tau={tau}: tau*lambda_1 = {tau * lam:.2f}, one-step factor {1 / (1 + tau * lam):.3f}"
          f" vs exact {np.exp(-tau * lam):.3f}")
