"""Potential-level pseudo-Calabi flow on the flat torus.

On the torus the harmonic part of the Ricci form vanishes and the flow reduces
to ``du/dt = log det(I + Hess u) - mean``, whose implicit Euler discretisation
is exactly the Ricci iteration.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import NotKahler, Unstable
from .functionals import k_energy
from .grid import _angular_wavenumbers, hessian_metric, scalar_curvature
from .grid import integrate as quadrature
from .iteration import IterationConfig, run as run_iteration
from .solver import SolverConfig

log = logging.getLogger(__name__)

__all__ = [
    "FlowConfig",
    "FlowTrace",
    "RotheReport",
    "flow_rhs",
    "integrate",
    "compare_rothe",
]

SCHEMES = ("explicit-euler", "imex")


@dataclass
class FlowConfig:
    initial: np.ndarray
    t_end: float
    dt: float
    scheme: str = "imex"
    record_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end >= self.dt:
            raise ValueError("t_end must be at least dt")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        self.initial = np.asarray(self.initial, dtype=np.float64)


@dataclass
class FlowTrace:
    times: list[float] = field(default_factory=list)
    K: list[float] = field(default_factory=list)
    supR: list[float] = field(default_factory=list)
    mass: list[float] = field(default_factory=list)
    states: list[np.ndarray] = field(default_factory=list, repr=False)
    steps: list[int] = field(default_factory=list)
    retries: int = 0

    def state_at_step(self, step: int) -> np.ndarray:
        return self.states[self.steps.index(step)]

    @property
    def max_K_increase(self) -> float:
        k = np.asarray(self.K)
        return float(np.max(np.diff(k), initial=-np.inf))


def flow_rhs(u, bg=None) -> np.ndarray:
    """``log det g_u`` minus its mean."""
    m = hessian_metric(u)
    F = m.log_det
    return F - quadrature(F)


def _laplacian_symbol(N, n):
    k = _angular_wavenumbers(N, np.float64)
    k2 = k**2 if n == 1 else k[:, None] ** 2 + k[None, :] ** 2
    return -k2


def _flat_laplacian(u, symbol):
    return np.fft.ifftn(np.fft.fftn(u) * symbol).real


def _advance(u, dt, scheme, symbol):
    rhs = flow_rhs(u)
    if scheme == "explicit-euler":
        return u + dt * rhs
    # stiff part dt*Lap(u) implicit, remainder (rhs - Lap u) explicit
    lap = _flat_laplacian(u, symbol)
    w = u + dt * (rhs - lap)
    return np.fft.ifftn(np.fft.fftn(w) / (1 - dt * symbol)).real


def _step_with_retry(u, dt, scheme, symbol, depth=0):
    """Advance by ``dt``; on leaving the Kähler cone, split into two halves."""
    try:
        v = _advance(u, dt, scheme, symbol)
        hessian_metric(v)
        return v, depth
    except NotKahler:
        if depth >= 10:
            raise
        w, d1 = _step_with_retry(u, dt / 2, scheme, symbol, depth + 1)
        v, d2 = _step_with_retry(w, dt / 2, scheme, symbol, depth + 1)
        return v, max(d1, d2)


def _record(trace, step, t, u):
    m = hessian_metric(u)
    trace.steps.append(step)
    trace.times.append(t)
    trace.K.append(float(k_energy(np.zeros_like(u), u)))
    trace.supR.append(float(np.abs(scalar_curvature(m)).max()))
    trace.mass.append(float(quadrature(m.det)))
    trace.states.append(u.copy())


def integrate(cfg: FlowConfig, bg=None) -> FlowTrace:
    """Advance the flow to ``t_end`` with fixed step ``dt``.

    Raises :class:`NotKahler` when a step leaves the cone after ten halvings
    and :class:`Unstable` on blow-up or when an explicit step exceeds the
    heat-equation stability bound.
    """
    u = cfg.initial - cfg.initial.mean()
    hessian_metric(u)
    n, N = u.ndim, u.shape[0]
    symbol = _laplacian_symbol(N, n)
    if cfg.scheme == "explicit-euler":
        # forward Euler on the heat part needs dt |k|^2 <= 2; halving on cone exits would hide this
        limit = 2.0 / float(-symbol.min())
        if cfg.dt > limit:
            raise Unstable(f"explicit-euler needs dt <= {limit:.3g} on this grid, got {cfg.dt}")
    nsteps = int(round(cfg.t_end / cfg.dt))
    scale = max(1.0, 100 * float(np.abs(u).max()))
    trace = FlowTrace()
    _record(trace, 0, 0.0, u)
    for s in range(1, nsteps + 1):
        u, depth = _step_with_retry(u, cfg.dt, cfg.scheme, symbol)
        trace.retries += depth > 0
        if not np.all(np.isfinite(u)) or np.abs(u).max() > scale:
            raise Unstable(f"flow blew up at t={s * cfg.dt:.4g} ({cfg.scheme}, dt={cfg.dt})")
        if s % cfg.record_every == 0 or s == nsteps:
            _record(trace, s, s * cfg.dt, u)
    return trace


@dataclass
class RotheReport:
    tau: list[float]
    err: list[float]
    order: list[float | None]

    def as_dict(self) -> dict:
        return {"tau": self.tau, "err": self.err, "order": self.order}


def compare_rothe(initial, tau_list, t_end: float, bg=None, dt: float = 1e-4,
                  solver: SolverConfig | None = None) -> RotheReport:
    """Compare the Ricci iteration at step ``tau`` with the flow at ``t = i tau``.

    ``err(tau) = max_i sup|u_i - u_flow(i tau)|``; ``order`` holds
    ``log2(err(2 tau)/err(tau))`` for consecutive halvings (None otherwise).
    """
    initial = np.asarray(initial, dtype=np.float64)
    initial = initial - initial.mean()
    taus = [float(t) for t in tau_list]
    stride = []
    for tau in taus:
        ratio = tau / dt
        if abs(ratio - round(ratio)) > 1e-9 * ratio or abs(t_end / tau - round(t_end / tau)) > 1e-9:
            raise ValueError(f"tau={tau} must be a multiple of dt and divide t_end")
        stride.append(int(round(ratio)))
    record = int(np.gcd.reduce(stride))
    flow = integrate(FlowConfig(initial=initial, t_end=t_end, dt=dt, record_every=record))
    errs = []
    for tau, k in zip(taus, stride):
        steps = int(round(t_end / tau))
        trace = run_iteration(IterationConfig(
            tau=tau, initial=initial, max_steps=steps, stop_R_sup=0.0,
            solver=solver or SolverConfig(),
        ))
        err = 0.0
        for rec in trace.records[1:]:
            ref = flow.state_at_step(rec.step * k)
            err = max(err, float(np.abs(np.asarray(rec.u, dtype=np.float64) - ref).max()))
        errs.append(err)
    order = [None]
    for i in range(1, len(taus)):
        halved = np.isclose(taus[i - 1], 2 * taus[i])
        if halved and errs[i] > 0 and errs[i - 1] > 0:
            order.append(float(np.log2(errs[i - 1] / errs[i])))
        else:
            order.append(None)
    return RotheReport(tau=taus, err=errs, order=order)
