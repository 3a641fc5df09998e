"""One implicit step of the Ricci iteration.

Given the previous potential ``u_prev`` and the step ``tau`` (plus an optional
fixed twist ``chi0``), find a mean-zero ``v`` with

    R(omega_v) = R_bar - chi_bar + tr_{omega_v} chi,   chi = omega_{u_prev}/tau + chi0.

The residual is fourth order; it is driven to zero by damped inexact Newton with
a matrix-free finite-difference Jacobian inside preconditioned GMRES.
Iterates are held in ``np.longdouble``: in float64 the rounding of ``v`` itself,
amplified by the fourth-order symbol ``(pi N)^4``, leaves a residual floor near
1e-9 on a 64-point grid.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import KrylovBreakdown, MaxIterations, NotKahler, SolverError
from .functionals import TwistForm, twisted_k_energy
from .grid import (
    EPS_PD,
    BackgroundGeometry,
    _angular_wavenumbers,
    hessian_metric,
    integrate,
    scalar_curvature,
)

log = logging.getLogger(__name__)

__all__ = [
    "SolverConfig",
    "StepResult",
    "residual",
    "newton_direction",
    "solve_step",
    "linear_symbol",
]

_KRYLOV_RESTARTS = 3
_DTYPES = {"longdouble": np.longdouble, "float64": np.float64}


@dataclass(frozen=True)
class SolverConfig:
    tol_residual: float = 1e-10
    max_newton: int = 50
    max_krylov: int = 200
    krylov_tol: float = 1e-3
    damping_min: float = 1e-4
    continuation_steps: int = 0
    eps_pd: float = EPS_PD
    precision: str = "longdouble"

    def __post_init__(self):
        for name in ("tol_residual", "krylov_tol", "damping_min", "eps_pd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("max_newton", "max_krylov"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if self.continuation_steps < 0:
            raise ValueError("continuation_steps must be non-negative")
        if self.precision not in _DTYPES:
            raise ValueError(f"precision must be one of {sorted(_DTYPES)}")

    @property
    def dtype(self):
        return _DTYPES[self.precision]


@dataclass
class StepResult:
    v: np.ndarray
    F: np.ndarray
    residual_sup: float
    newton_iters: int
    krylov_iters: list[int] = field(default_factory=list)
    monitors: dict = field(default_factory=dict)
    substeps: int = 1


def linear_symbol(N: int, n: int, tau: float, a0: float = 0.0, dtype=np.float64) -> np.ndarray:
    """Fourier symbol of the residual linearised at the flat metric.

    ``-|k|^4 - |k|^2 (1/tau + a0)`` with ``|k|^2 = sum (2 pi k_i)^2``.
    """
    k = _angular_wavenumbers(N, dtype)
    if n == 1:
        k2 = k**2
    else:
        k2 = k[:, None] ** 2 + k[None, :] ** 2
    return -(k2**2) - k2 * (1 / dtype(tau) + dtype(a0))


class _StepProblem:
    """Residual map for a fixed ``(u_prev, tau, chi0)``."""

    def __init__(self, u_prev, tau, chi0, eps_pd, dtype):
        self.dtype = dtype
        self.u_prev = np.asarray(u_prev).astype(dtype)
        self.n = self.u_prev.ndim
        self.N = self.u_prev.shape[0]
        self.tau = tau
        self.chi0 = chi0
        self.eps_pd = eps_pd
        self.m_prev = hessian_metric(self.u_prev, eps_pd)
        twist = self.m_prev.g / dtype(tau)
        chi_bar = dtype(self.n) / dtype(tau)
        if chi0 is not None:
            psi = None if chi0.psi is None else np.asarray(chi0.psi).astype(dtype)
            chi0_ld = TwistForm(chi0.a, psi)
            twist = twist + chi0_ld.matrix(self.n, self.N, dtype)
            chi_bar = chi_bar + dtype(chi0.chi_bar(self.n))
        self.twist = twist
        self.chi_bar = chi_bar

    def evaluate(self, v, check=True):
        m = hessian_metric(v, self.eps_pd, check=check)
        R = scalar_curvature(m)
        tr = np.einsum("...jk,...jk->...", m.inv, self.twist)
        return R + self.chi_bar - tr, m

    def __call__(self, v, check=True):
        return self.evaluate(v, check)[0]


def residual(v, u_prev, tau: float, chi0: TwistForm | None = None, bg: BackgroundGeometry | None = None):
    """Twisted cscK residual ``R(omega_v) - R_bar + chi_bar - tr_{omega_v} chi``.

    Works in the dtype of ``v`` (float64 or longdouble).
    """
    v = np.asarray(v)
    dtype = np.longdouble if v.dtype == np.longdouble else np.float64
    prob = _StepProblem(u_prev, tau, chi0, EPS_PD, dtype)
    return prob(v.astype(dtype))


def _mean_zero(x):
    return x - x.mean()


def _direction(prob: _StepProblem, v, rhs, cfg: SolverConfig, metric=None):
    """Solve ``L_v delta = -rhs`` on mean-zero fields. Returns (delta, matvecs)."""
    dtype = prob.dtype
    shape = v.shape
    size = v.size
    if not np.any(rhs):
        return np.zeros(shape, dtype=dtype), 0
    if metric is None:
        metric = hessian_metric(v, prob.eps_pd, check=False)
    weight = np.asarray(metric.det / integrate(metric.det), dtype=np.float64)

    def project_out(y):
        # remove the det(g_v)-weighted mean: N(v) always integrates to zero against det(g_v)
        return y - np.mean(y * weight)

    v_scale = max(1.0, float(np.abs(v).max()))
    h_rel = float(np.finfo(dtype).eps) ** (1.0 / 3.0) * v_scale
    count = [0]

    def matvec(x):
        x = np.asarray(x, dtype=np.float64).reshape(shape)
        mean = x.mean()
        d = x - mean
        dmax = np.abs(d).max()
        if dmax == 0:
            return np.full(size, mean)
        count[0] += 1
        h = h_rel / dmax
        d_ld = d.astype(dtype)
        Ld = (prob(v + h * d_ld, check=False) - prob(v - h * d_ld, check=False)) / (2 * h)
        Ld = project_out(np.asarray(Ld, dtype=np.float64))
        return (Ld + mean).ravel()

    a0 = 0.0 if prob.chi0 is None else prob.chi0.a
    symbol = linear_symbol(prob.N, prob.n, prob.tau, a0)
    symbol.flat[0] = 1.0

    def precond(r):
        r = np.asarray(r, dtype=np.float64).reshape(shape)
        rh = np.fft.fftn(r) / symbol
        rh.flat[0] = 0.0
        return (np.fft.ifftn(rh).real + r.mean()).ravel()

    # right preconditioning, so the GMRES tolerance applies to the true residual;
    # restarts recompute that residual, which absorbs the finite-difference drift
    AM = LinearOperator((size, size), matvec=lambda y: matvec(precond(y)), dtype=np.float64)
    b = -project_out(np.asarray(rhs, dtype=np.float64)).ravel()
    y, info = gmres(AM, b, rtol=cfg.krylov_tol, atol=0.0, restart=cfg.max_krylov, maxiter=_KRYLOV_RESTARTS)
    x = precond(y)
    if not np.all(np.isfinite(x)):
        raise KrylovBreakdown("GMRES produced non-finite iterates")
    if info != 0:
        rel = np.linalg.norm(matvec(x) - b) / np.linalg.norm(b)
        if rel > cfg.krylov_tol:
            raise KrylovBreakdown(
                f"GMRES reached relative residual {rel:.2e} > {cfg.krylov_tol:.1e} "
                f"after {count[0]} iterations"
            )
    delta = _mean_zero(x.reshape(shape)).astype(dtype)
    return delta, count[0]


def newton_direction(v, rhs, u_prev, tau: float, chi0: TwistForm | None = None,
                     cfg: SolverConfig | None = None, return_info: bool = False):
    """Inexact Newton update: approximately solve ``L_v[delta] = -rhs``.

    ``L_v`` is the derivative of :func:`residual` at ``v``. The returned
    ``delta`` is mean-zero. With ``return_info`` the number of Krylov
    iterations is returned as well.
    """
    cfg = cfg or SolverConfig()
    prob = _StepProblem(u_prev, tau, chi0, cfg.eps_pd, cfg.dtype)
    v = np.asarray(v).astype(cfg.dtype)
    delta, iters = _direction(prob, v, np.asarray(rhs), cfg)
    return (delta, iters) if return_info else delta


def _newton(prob: _StepProblem, v0, cfg: SolverConfig) -> StepResult:
    v = _mean_zero(np.asarray(v0).astype(prob.dtype))
    r, m = prob.evaluate(v)
    krylov = []
    for it in range(cfg.max_newton + 1):
        rs = float(np.abs(r).max())
        if rs <= cfg.tol_residual:
            return StepResult(v=v, F=m.log_det, residual_sup=rs, newton_iters=it, krylov_iters=krylov)
        if it == cfg.max_newton:
            break
        delta, iters = _direction(prob, v, r, cfg, metric=m)
        krylov.append(iters)
        r_norm = float(np.sqrt(np.mean(np.asarray(r, dtype=np.float64) ** 2)))
        lam = 1.0
        left_cone = False
        while lam >= cfg.damping_min:
            trial = v + prob.dtype(lam) * delta
            try:
                rt, mt = prob.evaluate(trial)
            except NotKahler:
                left_cone = True
                lam *= 0.5
                continue
            rt_norm = float(np.sqrt(np.mean(np.asarray(rt, dtype=np.float64) ** 2)))
            if rt_norm <= (1 - 1e-4 * lam) * r_norm or float(np.abs(rt).max()) <= cfg.tol_residual:
                break
            lam *= 0.5
        else:
            if left_cone:
                raise NotKahler(*_worst_node(v + prob.dtype(cfg.damping_min) * delta), cfg.eps_pd)
            raise MaxIterations(
                f"line search stalled at residual {rs:.3e} (Newton iteration {it})",
                residual_sup=rs, iterations=it,
            )
        log.debug("newton %d: |N|=%.3e lambda=%.3g krylov=%d", it, rs, lam, iters)
        v, r, m = trial, rt, mt
    raise MaxIterations(
        f"no convergence in {cfg.max_newton} Newton iterations (residual {rs:.3e})",
        residual_sup=rs, iterations=cfg.max_newton,
    )


def _worst_node(v):
    m = hessian_metric(v, check=False)
    node = np.unravel_index(np.argmin(m.min_eig), m.min_eig.shape)
    return node, m.min_eig[node]


def _monitors(prob: _StepProblem, res: StepResult):
    m_v = hessian_metric(res.v, check=False)
    tr = np.einsum("...jk,...jk->...", m_v.inv, prob.m_prev.g)
    chi = TwistForm.kahler_form(prob.u_prev, 1.0 / prob.tau)
    if prob.chi0 is not None:
        chi = chi + prob.chi0
    return {
        "sup_F": float(np.abs(res.F).max()),
        "sup_v": float(np.abs(res.v).max()),
        "sup_trace": float(tr.max()),
        "min_eig_g": float(m_v.min_eig.min()),
        "twisted_K": float(twisted_k_energy(prob.u_prev, res.v, chi)),
    }


def solve_step(u_prev, tau: float, chi0: TwistForm | None = None,
               cfg: SolverConfig | None = None, bg: BackgroundGeometry | None = None,
               v0=None) -> StepResult:
    """Solve one implicit step starting from ``v0`` (default ``u_prev``).

    If Newton fails and ``cfg.continuation_steps > 0``, the step is retried
    with a warm start obtained by composing ``m = 2, 4, ...`` sub-steps of
    length ``tau / m``; the final solve is always the full ``tau`` step.

    Raises :class:`MaxIterations`, :class:`NotKahler` or
    :class:`KrylovBreakdown`.
    """
    cfg = cfg or SolverConfig()
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    u_prev = np.asarray(u_prev)
    if chi0 is not None and not chi0.is_semipositive(u_prev.ndim, u_prev.shape[0]):
        raise ValueError("chi0 must be semipositive")
    prob = _StepProblem(u_prev, tau, chi0, cfg.eps_pd, cfg.dtype)
    start = prob.u_prev if v0 is None else v0
    try:
        res = _newton(prob, start, cfg)
    except SolverError as exc:
        err = exc
    except NotKahler as exc:
        err = exc
    else:
        res.monitors = _monitors(prob, res)
        return res

    for level in range(1, cfg.continuation_steps + 1):
        m = 2**level
        log.info("step failed (%s); continuation with %d sub-steps", err, m)
        try:
            w = prob.u_prev
            for _ in range(m):
                sub = _StepProblem(w, tau / m, chi0, cfg.eps_pd, cfg.dtype)
                w = _newton(sub, w, cfg).v
            res = _newton(prob, w, cfg)
        except (SolverError, NotKahler) as exc:
            err = exc
            continue
        res.substeps = m
        res.monitors = _monitors(prob, res)
        return res
    raise err
