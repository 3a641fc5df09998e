"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected and shown in the pytest terminal summary.
"""
import time

import numpy as np
import pytest

from cscktorus import (
    GridSpec,
    IterationConfig,
    TwistForm,
    compare_rothe,
    emit_trace,
    energy_E,
    func_I,
    func_J,
    hessian_metric,
    integrate,
    j_chi,
    k_energy,
    quasi_d1,
    random_kahler_potential,
    run,
    solve_step,
    twisted_k_energy,
    twisted_residual,
    variation_E,
    variation_j_chi,
    variation_twisted_k,
    verify_monotonicity,
)
from cscktorus.errors import MonotonicityViolation
from cscktorus.grid import LONG_PI

from conftest import TWO_PI

GRIDS = [GridSpec(1, 64), GridSpec(2, 32)]
TAUS = [0.1, 1.0, 10.0]
SEEDS = [0, 1, 2]


def _report(log, number, title, ok, detail, elapsed, budget):
    within = elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    line = f"criterion {number} [{title}]: {status} ({detail}; {elapsed:.1f} s of {budget:.0f} s)"
    log.append(line)
    print(line)
    assert ok, line
    assert within, line


def _random(grid, rng, strength=0.5):
    return random_kahler_potential(grid, rng, strength=strength) + rng.normal()


# -- 1 ------------------------------------------------------------------------------------------

def test_criterion_1_functional_identities(acceptance_log):
    t0 = time.perf_counter()
    worst = {}

    def track(name, err):
        worst[name] = max(worst.get(name, 0.0), float(err))

    for grid in GRIDS:
        n = grid.n
        rng = np.random.default_rng(100 + n)
        for _ in range(50):
            u, v, w = (_random(grid, rng) for _ in range(3))
            chi = TwistForm(rng.uniform(0, 2), 0.1 * random_kahler_potential(grid, rng))
            mu, mv, mw = (hessian_metric(z) for z in (u, v, w))
            track("E cocycle", abs(energy_E(u, v) + energy_E(v, w) - energy_E(u, w)))
            track("Jchi cocycle", abs(j_chi(u, v, chi) + j_chi(v, w, chi) - j_chi(u, w, chi)))
            track("K cocycle", abs(k_energy(u, v) + k_energy(v, w) - k_energy(u, w)))
            track("Kchi cocycle", abs(twisted_k_energy(u, v, chi) + twisted_k_energy(v, w, chi)
                                      - twisted_k_energy(u, w, chi)))
            track("J cocycle", abs(func_J(u, v) + func_J(v, w) - func_J(u, w)
                                   - integrate((v - w) * (mu.det - mv.det))))
            IJ = lambda a, b: func_I(a, b) - func_J(a, b)  # noqa: E731
            track("I-J cocycle", abs(IJ(u, v) + IJ(v, w) - IJ(u, w)
                                     - integrate((v - u) * (mw.det - mv.det))))
            I, J = func_I(u, v), func_J(u, v)
            # inequalities are reported as their violation (0 when they hold)
            track("J/n <= I-J", max(0.0, J / n - (I - J)))
            track("I-J <= nJ", max(0.0, (I - J) - n * J))
            track("I,J,I-J >= 0", max(0.0, -I, -J, -(I - J)))
            omega_w = TwistForm.kahler_form(w)
            track("Jw(u,v)-Jw(u,w)=J(v,w)", abs(j_chi(u, v, omega_w) - j_chi(u, w, omega_w) - func_J(v, w)))
            track("J^{omega_u}=I-J", abs(j_chi(u, v, TwistForm.kahler_form(u)) - (I - J)))
            track("J^{omega_w}(u,w)=-J", abs(j_chi(u, w, omega_w) + func_J(u, w)))
    elapsed = time.perf_counter() - t0
    err = max(worst.values())
    name = max(worst, key=worst.get)
    _report(acceptance_log, 1, "functional identities, 50 triples per dimension", err < 1e-9,
            f"max error {err:.2e} in '{name}'", elapsed, 30)


# -- 2 ------------------------------------------------------------------------------------------

def test_criterion_2_variation_formulas(acceptance_log):
    t0 = time.perf_counter()
    slopes = []
    exact_cases = 0
    for case in range(10):
        grid = GRIDS[case % 2]
        rng = np.random.default_rng(200 + case)
        u, v = _random(grid, rng, 0.4), _random(grid, rng, 0.4)
        f = random_kahler_potential(grid, rng, strength=0.2) + rng.normal()
        chi = TwistForm(rng.uniform(0, 1), 0.1 * random_kahler_potential(grid, rng))
        mv = hessian_metric(v)
        checks = [
            (lambda z: energy_E(u, z), variation_E(mv, f)),
            (lambda z: j_chi(u, z, chi), variation_j_chi(mv, f, chi)),
            (lambda z: twisted_k_energy(u, z, chi), variation_twisted_k(mv, f, chi)),
        ]
        for F, exact in checks:
            errs = []
            # steps large enough that truncation error sits well above roundoff;
            # v +- h f stays Kahler since |Hess f| <= 0.2
            for h in (0.08, 0.04):
                fd = (F(v + h * f) - F(v - h * f)) / (2 * h)
                errs.append(abs(fd - exact))
            if max(errs) < 1e-12:
                # E and J^chi are polynomial along lines (degree n + 1); when the cubic
                # coefficient vanishes the central difference is exact
                exact_cases += 1
                continue
            slopes.append(np.log2(errs[0] / errs[1]))
    elapsed = time.perf_counter() - t0
    worst = min(slopes)
    _report(acceptance_log, 2, "variation formulas vs central differences", worst >= 1.9,
            f"min slope {worst:.3f} over {len(slopes)} fits, {exact_cases} exact to roundoff",
            elapsed, 30)


# -- 3 ------------------------------------------------------------------------------------------

def test_criterion_3_flat_fixed_point(acceptance_log):
    t0 = time.perf_counter()
    worst = 0.0
    for grid in GRIDS:
        for tau in (0.01, 1.0, 100.0):
            for chi0 in (None, TwistForm(0.5)):
                # stop_R_sup = 0 forces actual solves instead of stopping at step 0
                trace = run(IterationConfig(tau=tau, initial=grid.zeros(), chi0=chi0, max_steps=3, stop_R_sup=0.0))
                assert len(trace) == 4
                worst = max(worst, max(float(np.abs(r.u).max()) for r in trace.records))
    elapsed = time.perf_counter() - t0
    _report(acceptance_log, 3, "flat start is a fixed point", worst < 1e-10,
            f"max sup|u_i| {worst:.1e} over 12 runs", elapsed, 10)


# -- 4 ------------------------------------------------------------------------------------------

def test_criterion_4_linearised_step(acceptance_log):
    t0 = time.perf_counter()
    eps = 1e-4
    worst = 0.0
    for grid in GRIDS:
        xs = grid.coords(np.longdouble)
        wave = np.cos(2 * LONG_PI * xs[0])
        u0 = sum(np.longdouble(eps) * np.cos(2 * LONG_PI * x) for x in xs)
        for tau in (0.5, 1.0, 2.0):
            v = solve_step(u0, tau).v
            # coefficient of cos(2 pi x) by orthogonality
            coef = 2 * np.mean(v * wave)
            ratio = float(coef) / eps
            expected = 1 / (1 + tau * 4 * np.pi**2)
            worst = max(worst, abs(ratio / expected - 1))
    elapsed = time.perf_counter() - t0
    _report(acceptance_log, 4, "single-mode step ratio 1/(1 + 4 pi^2 tau)", worst < 1e-3,
            f"max relative error {worst:.2e}", elapsed, 30)


# -- 5, 6, 9 share the same runs ----------------------------------------------------------------

def _case_config(grid, seed, tau):
    u0 = random_kahler_potential(grid, np.random.default_rng(seed), strength=0.5)
    return IterationConfig(tau=tau, initial=u0)


@pytest.fixture(scope="module")
def sweep_runs():
    t0 = time.perf_counter()
    runs = {}
    for grid in GRIDS:
        for seed in SEEDS:
            for tau in TAUS:
                runs[(grid.n, seed, tau)] = run(_case_config(grid, seed, tau))
    return runs, time.perf_counter() - t0


def test_criterion_5_monotonicity(acceptance_log, sweep_runs):
    runs, elapsed = sweep_runs
    t0 = time.perf_counter()
    worst_energy = worst_gap = np.inf
    failures = []
    for key, trace in runs.items():
        try:
            rep = verify_monotonicity(trace, tol=1e-9)
        except MonotonicityViolation as exc:
            failures.append(f"{key}: {exc}")
            continue
        worst_energy = min(worst_energy, rep.worst_energy_slack)
        worst_gap = min(worst_gap, rep.worst_gap_slack)
    not_converged = [k for k, t in runs.items() if not t.converged]
    ok = not failures and not not_converged
    elapsed += time.perf_counter() - t0
    detail = (f"{len(runs)} runs; worst K slack {worst_energy:.1e}, worst J-gap slack {worst_gap:.1e}"
              + (f"; violations {failures}" if failures else "")
              + (f"; unconverged {not_converged}" if not_converged else ""))
    _report(acceptance_log, 5, "K-energy monotone with step-gap bound", ok, detail, elapsed, 300)


def test_criterion_6_convergence(acceptance_log, sweep_runs):
    runs, _ = sweep_runs
    t0 = time.perf_counter()
    worst_R = worst_d1 = worst_spread = 0.0
    for grid in GRIDS:
        for seed in SEEDS:
            finals = []
            for tau in TAUS:
                trace = runs[(grid.n, seed, tau)]
                worst_R = max(worst_R, trace.records[-1].supR)
                final = np.asarray(trace.final, dtype=float)
                worst_d1 = max(worst_d1, quasi_d1(final, grid.zeros()))
                finals.append(final)
            worst_spread = max(worst_spread, max(np.abs(a - finals[0]).max() for a in finals[1:]))
    ok = worst_R < 1e-8 and worst_d1 < 1e-6 and worst_spread < 1e-6
    elapsed = time.perf_counter() - t0
    _report(acceptance_log, 6, "convergence to the flat metric", ok,
            f"max sup|R| {worst_R:.1e}, max quasi_d1 {worst_d1:.1e}, max limit spread {worst_spread:.1e}",
            elapsed, 300)


def test_criterion_9_determinism(acceptance_log, sweep_runs, tmp_path):
    runs, _ = sweep_runs
    t0 = time.perf_counter()
    grid = GRIDS[0]
    emit_trace(runs[(grid.n, SEEDS[0], TAUS[0])], tmp_path / "first.csv")
    emit_trace(run(_case_config(grid, SEEDS[0], TAUS[0])), tmp_path / "second.csv")
    same = (tmp_path / "first.csv").read_bytes() == (tmp_path / "second.csv").read_bytes()
    elapsed = time.perf_counter() - t0
    _report(acceptance_log, 9, "byte-identical rerun", same,
            f"trace CSV {'identical' if same else 'differs'}", elapsed, 60)


# -- 7 ------------------------------------------------------------------------------------------

def test_criterion_7_twisted_iteration(acceptance_log):
    t0 = time.perf_counter()
    grid = GRIDS[0]
    x = grid.coords()[0]
    chi0 = TwistForm(0.5, 0.003 * np.sin(TWO_PI * x))
    finals, residuals, slacks = [], [], []
    for seed in (10, 11):
        u0 = random_kahler_potential(grid, np.random.default_rng(seed), strength=0.5)
        trace = run(IterationConfig(tau=1.0, initial=u0, chi0=chi0))
        assert trace.converged
        slacks.append(verify_monotonicity(trace, tol=1e-9).worst_energy_slack)
        residuals.append(float(np.abs(twisted_residual(trace.final, chi0)).max()))
        finals.append(np.asarray(trace.final, dtype=float))
    spread = float(np.abs(finals[0] - finals[1]).max())
    ok = spread < 1e-6 and max(residuals) < 1e-8 and min(slacks) >= -1e-9
    elapsed = time.perf_counter() - t0
    _report(acceptance_log, 7, "twisted iteration has a common limit", ok,
            f"limit spread {spread:.1e}, max twisted residual {max(residuals):.1e}, "
            f"worst K^chi slack {min(slacks):.1e}", elapsed, 120)


# -- 8 ------------------------------------------------------------------------------------------

def test_criterion_8_rothe_comparison(acceptance_log):
    t0 = time.perf_counter()
    x = GRIDS[0].coords()[0]
    report = compare_rothe(0.01 * np.cos(TWO_PI * x), [0.1, 0.05, 0.025], t_end=0.2, dt=1e-4)
    err, order = report.err, [o for o in report.order if o is not None]
    decreasing = all(b < a for a, b in zip(err, err[1:]))
    in_band = all(0.8 <= o <= 1.5 for o in order)
    elapsed = time.perf_counter() - t0
    _report(acceptance_log, 8, "iteration vs flow, first-order convergence in tau", decreasing and in_band,
            f"err {[f'{e:.3e}' for e in err]}, order {[f'{o:.3f}' for o in order]}", elapsed, 300)
