"""Ricci iteration from a random two-dimensional potential down to the flat metric."""
import numpy as np

import cscktorus as ck

grid = ck.GridSpec(2, 32)
u0 = ck.random_kahler_potential(grid, np.random.default_rng(1), strength=0.5)

for tau in (0.1, 1.0, 10.0):
    trace = ck.run(ck.IterationConfig(tau=tau, initial=u0))
    report = ck.verify_monotonicity(trace)
    print(f"\ntau={tau}: {len(trace) - 1} steps, converged={trace.converged}")
    print(" step          K       K_drop       J_step        supR")
    for rec in trace.records:
        drop = "" if rec.K_drop is None else f"{rec.K_drop:.3e}"
        gap = "" if rec.J_step is None else f"{rec.J_step:.3e}"
        print(f"{rec.step:5d} {rec.K:10.3e} {drop:>12s} {gap:>12s} {rec.supR:11.3e}")
    print("worst K slack", report.worst_energy_slack, "worst gap slack", report.worst_gap_slack)
    print("cscK stall detected:", ck.equality_case_check(trace))
