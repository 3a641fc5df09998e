"""Driver for the (optionally twisted) Ricci iteration on the flat torus.

Each step solves ``(omega_{i+1} - omega_i)/tau = -Ric(omega_{i+1}) + HRic(omega_{i+1})``
(plus the fixed twist ``chi0``) through :func:`cscktorus.solver.solve_step`.
Energies are measured against the flat background ``u = 0``.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import MonotonicityViolation, NotKahler, SolverError, StepFailed
from .functionals import TwistForm, _energy, _j_chi, normalize_E0, quasi_d1
from .grid import EPS_PD, hessian_metric, integrate, scalar_curvature
from .solver import SolverConfig, solve_step

log = logging.getLogger(__name__)

__all__ = [
    "IterationConfig",
    "StepRecord",
    "IterationTrace",
    "TRACE_COLUMNS",
    "run",
    "verify_monotonicity",
    "MonotonicityReport",
    "equality_case_check",
    "twisted_residual",
]

TRACE_COLUMNS = (
    "step", "K", "Kchi", "Ent", "J_step", "I_step", "K_drop", "supR",
    "quasi_d1_limit", "sup_u", "sup_F", "min_eig_g", "newton_iters",
)


@dataclass
class IterationConfig:
    tau: float
    initial: np.ndarray
    max_steps: int = 200
    stop_R_sup: float = 1e-8
    chi0: TwistForm | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    record_every: int = 1

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.max_steps < 1:
            raise ValueError("max_steps must be at least 1")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        self.initial = np.asarray(self.initial)
        if self.chi0 is not None:
            n, N = self.initial.ndim, self.initial.shape[0]
            if not self.chi0.is_semipositive(n, N):
                raise ValueError("chi0 must be semipositive (a*I + Hess(psi) >= 0)")


@dataclass
class StepRecord:
    """State after ``step`` iterations; step quantities refer to ``u_step -> u_{step+1}``."""

    step: int
    K: float
    Ent: float
    supR: float
    sup_u: float
    sup_F: float
    min_eig_g: float
    Kchi: float | None = None
    J_step: float | None = None
    I_step: float | None = None
    K_drop: float | None = None
    step_sup: float | None = None
    newton_iters: int | None = None
    quasi_d1_limit: float | None = None
    u: np.ndarray | None = field(default=None, repr=False)

    def row(self) -> dict:
        return {name: getattr(self, name) for name in TRACE_COLUMNS}


@dataclass
class IterationTrace:
    records: list[StepRecord]
    tau: float
    twisted: bool
    stop_R_sup: float
    converged: bool = False
    final: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.records)

    def column(self, name) -> np.ndarray:
        return np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in self.records], dtype=float)

    @property
    def energy_name(self) -> str:
        return "Kchi" if self.twisted else "K"


def twisted_residual(u, chi0: TwistForm | None = None, m=None):
    """``R(omega_u) - R_bar + chi_bar0 - tr_{omega_u} chi0`` (just ``R`` when untwisted)."""
    m = m if m is not None else hessian_metric(u)
    R = scalar_curvature(m)
    if chi0 is None:
        return R
    n, N = m.n, m.u.shape[0]
    X = chi0.matrix(n, N, m.g.dtype)
    return R + chi0.chi_bar(n) - np.einsum("...jk,...jk->...", m.inv, X)


def _state(u, chi0):
    zero = np.zeros_like(u)
    m0 = hessian_metric(zero)
    m = hessian_metric(u)
    ent = integrate(np.log(m.det) * m.det)
    # -Ric(omega) = 0 on the flat background, so K(0, u) = Ent(0, u)
    K = ent + _j_chi(m0, m, TwistForm(0.0, m0.log_det))
    Kchi = None if chi0 is None else K + _j_chi(m0, m, chi0)
    supR = np.abs(twisted_residual(u, chi0, m)).max()
    return m, float(K), float(ent), None if Kchi is None else float(Kchi), float(supR)


def run(cfg: IterationConfig, bg=None) -> IterationTrace:
    """Iterate until ``sup|residual| < stop_R_sup`` or ``max_steps`` steps.

    Raises :class:`StepFailed` (carrying the partial trace) when a step
    cannot be solved.
    """
    u = np.asarray(cfg.initial)
    mean = float(u.mean())
    if abs(mean) > 1e-14:
        warnings.warn(f"initial potential has mean {mean:.3e}; shifting to mean zero", stacklevel=2)
        u = u - mean
    u = u.astype(cfg.solver.dtype)
    hessian_metric(u, cfg.solver.eps_pd)

    chi0 = cfg.chi0
    trace = IterationTrace(records=[], tau=cfg.tau, twisted=chi0 is not None, stop_R_sup=cfg.stop_R_sup)
    m, K, ent, Kchi, supR = _state(u, chi0)
    i = 0
    pending = None
    while True:
        rec = StepRecord(
            step=i, K=K, Ent=ent, Kchi=Kchi, supR=supR,
            sup_u=float(np.abs(u).max()), sup_F=float(np.abs(m.log_det).max()),
            min_eig_g=float(m.min_eig.min()), u=u,
        )
        if pending is not None:
            pending.K_drop = pending_energy - (Kchi if chi0 is not None else K)
        recorded = i % cfg.record_every == 0
        done = supR < cfg.stop_R_sup
        if done or i >= cfg.max_steps:
            trace.records.append(rec)
            trace.converged = done
            break
        try:
            res = solve_step(u, cfg.tau, chi0, cfg.solver)
        except (SolverError, NotKahler) as exc:
            trace.records.append(rec)
            trace.final = u
            raise StepFailed(i, trace, exc) from exc
        v = res.v
        mv = hessian_metric(v, check=False)
        # J(u_{i+1}, u_i) and I(u_{i+1}, u_i)
        rec.J_step = float(integrate((u - v) * mv.det) - _energy(mv, m))
        rec.I_step = float(integrate((u - v) * (mv.det - m.det)))
        rec.step_sup = float(np.abs(v - u).max())
        rec.newton_iters = res.newton_iters
        if recorded:
            trace.records.append(rec)
        pending = rec
        pending_energy = Kchi if chi0 is not None else K
        log.info("step %d: K=%.6e supR=%.3e newton=%d", i, K, supR, res.newton_iters)
        u = v
        m, K, ent, Kchi, supR = _state(u, chi0)
        i += 1
    trace.final = u
    _fill_limit_distance(trace)
    return trace


def _fill_limit_distance(trace: IterationTrace):
    limit = normalize_E0(trace.final)
    for rec in trace.records:
        rec.quasi_d1_limit = float(quasi_d1(normalize_E0(rec.u), limit))


@dataclass
class MonotonicityReport:
    worst_energy_slack: float
    worst_energy_index: int | None
    worst_gap_slack: float
    worst_gap_index: int | None
    worst_scaled_gap_slack: float
    steps_checked: int


def verify_monotonicity(trace: IterationTrace, tol: float = 1e-9) -> MonotonicityReport:
    """Check energy decrease and the step-gap bound ``J(u_{i+1}, u_i) <= drop``.

    The monitored energy is the K-energy, or the twisted K-energy for a
    twisted run. Slacks are ``rhs - lhs`` (negative means violated). The
    scaled gap ``J/tau <= drop`` is reported but not enforced.
    """
    e_worst, e_idx = np.inf, None
    g_worst, g_idx = np.inf, None
    s_worst = np.inf
    checked = 0
    for rec in trace.records:
        if rec.K_drop is None:
            continue
        checked += 1
        if rec.K_drop < e_worst:
            e_worst, e_idx = rec.K_drop, rec.step
        gap = rec.K_drop - rec.J_step
        if gap < g_worst:
            g_worst, g_idx = gap, rec.step
        s_worst = min(s_worst, rec.K_drop - rec.J_step / trace.tau)
    if e_worst < -tol:
        raise MonotonicityViolation(e_idx, f"{trace.energy_name} monotonicity", e_worst)
    if g_worst < -tol:
        raise MonotonicityViolation(g_idx, "step gap J(u_{i+1},u_i) <= energy drop", g_worst)
    return MonotonicityReport(
        worst_energy_slack=float(e_worst), worst_energy_index=e_idx,
        worst_gap_slack=float(g_worst), worst_gap_index=g_idx,
        worst_scaled_gap_slack=float(s_worst), steps_checked=checked,
    )


def equality_case_check(trace: IterationTrace, index: int | None = None) -> bool:
    """Whether the energy stalls at a step whose state is already cscK.

    A record qualifies when its energy drop is below 1e-12, its residual is
    below ``max(10 * stop_R_sup, 1e-8)`` and the step moved the potential by less than
    1e-8. The terminal record of a converged run has no step; it qualifies
    on the residual alone. With ``index`` only that step is examined.
    """
    records = trace.records if index is None else [r for r in trace.records if r.step == index]
    last = trace.records[-1] if trace.records else None
    threshold = max(10 * trace.stop_R_sup, 1e-8)
    for rec in records:
        if rec.supR >= threshold:
            continue
        if rec.K_drop is None:
            if rec is last and trace.converged:
                return True
            continue
        if rec.K_drop < 1e-12 and rec.step_sup < 1e-8:
            return True
    return False
