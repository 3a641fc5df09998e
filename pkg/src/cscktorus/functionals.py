"""Energy functionals on the space of torus-invariant Kähler potentials.

Wedge products of (1,1)-forms become mixed determinants of their coefficient
matrices: for n = 2, ``alpha ^ beta`` corresponds to
``mixed(A, B) = (det(A + B) - det A - det B) / 2``. The torus has unit volume,
so every ``1/V`` factor is 1.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .grid import (
    BackgroundGeometry,
    EPS_PD,
    HessianMetric,
    hessian,
    hessian_metric,
    integrate,
    scalar_curvature,
)

__all__ = [
    "TwistForm",
    "FunctionalReport",
    "mixed",
    "energy_E",
    "func_I",
    "func_J",
    "entropy",
    "j_chi",
    "k_energy",
    "twisted_k_energy",
    "quasi_d1",
    "normalize_E0",
    "ricci_twist",
    "variation_E",
    "variation_j_chi",
    "variation_twisted_k",
    "functional_report",
]


@dataclass(frozen=True)
class TwistForm:
    """Closed (1,1)-form ``chi = a * omega + i dd^c psi``; ``psi=None`` means 0."""

    a: float
    psi: np.ndarray | None = None

    def matrix(self, n: int, N: int, dtype=np.float64) -> np.ndarray:
        """Coefficient matrix ``a I + Hess(psi)`` at every node."""
        X = np.zeros((N,) * n + (n, n), dtype=dtype)
        if self.psi is not None:
            X = X + hessian(self.psi)
        return X + self.a * np.eye(n, dtype=dtype)

    def chi_bar(self, n: int) -> float:
        """Normalised class pairing ``n {chi}{omega}^{n-1} / {omega}^n``."""
        return n * self.a

    def min_eigenvalue(self, n: int, N: int) -> float:
        return float(np.linalg.eigvalsh(self.matrix(n, N).astype(np.float64)).min())

    def is_semipositive(self, n: int, N: int, tol: float = 1e-10) -> bool:
        return self.min_eigenvalue(n, N) >= -tol

    def __add__(self, other: "TwistForm") -> "TwistForm":
        if self.psi is None:
            psi = other.psi
        elif other.psi is None:
            psi = self.psi
        else:
            psi = self.psi + other.psi
        return TwistForm(self.a + other.a, psi)

    def scaled(self, s: float) -> "TwistForm":
        return TwistForm(s * self.a, None if self.psi is None else s * self.psi)

    @classmethod
    def kahler_form(cls, u, scale: float = 1.0) -> "TwistForm":
        """``scale * omega_u``."""
        return cls(scale, scale * np.asarray(u))


@dataclass
class FunctionalReport:
    E: float
    I: float
    J: float
    Ent: float
    K: float
    quasi_d1: float
    Jchi: float | None = None
    Kchi: float | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def mixed(A, B):
    """Polarised determinant of 2x2 matrix fields; ``mixed(A, A) = det A``."""
    return 0.5 * (
        A[..., 0, 0] * B[..., 1, 1]
        + A[..., 1, 1] * B[..., 0, 0]
        - A[..., 0, 1] * B[..., 1, 0]
        - A[..., 1, 0] * B[..., 0, 1]
    )


def _metrics(u, v, eps_pd=EPS_PD):
    return hessian_metric(u, eps_pd), hessian_metric(v, eps_pd)


def _as_metric(x, eps_pd=EPS_PD) -> HessianMetric:
    return x if isinstance(x, HessianMetric) else hessian_metric(x, eps_pd)


def _energy(mu: HessianMetric, mv: HessianMetric):
    n = mu.n
    if n == 1:
        dens = mu.det + mv.det
    else:
        dens = mu.det + mixed(mu.g, mv.g) + mv.det
    return integrate((mv.u - mu.u) * dens) / (n + 1)


def energy_E(u, v):
    """Monge-Ampere energy ``E(u, v)``; ``E(u, v) + E(v, w) = E(u, w)``."""
    return _energy(*_metrics(u, v))


def func_I(u, v):
    mu, mv = _metrics(u, v)
    return integrate((mv.u - mu.u) * (mu.det - mv.det))


def func_J(u, v):
    mu, mv = _metrics(u, v)
    return integrate((mv.u - mu.u) * mu.det) - _energy(mu, mv)


def entropy(u, v):
    """Relative entropy of ``omega_v^n`` with respect to ``omega_u^n``."""
    mu, mv = _metrics(u, v)
    return integrate(np.log(mv.det / mu.det) * mv.det)


def _j_chi(mu: HessianMetric, mv: HessianMetric, chi: TwistForm):
    n, N = mu.n, mu.u.shape[0]
    X = chi.matrix(n, N, dtype=mu.g.dtype)
    if n == 1:
        dens = X[..., 0, 0]
    else:
        dens = mixed(mu.g, X) + mixed(mv.g, X)
    return integrate((mv.u - mu.u) * dens) - chi.chi_bar(n) * _energy(mu, mv)


def j_chi(u, v, chi: TwistForm):
    """Twisting functional ``J^chi(u, v)``."""
    return _j_chi(*_metrics(u, v), chi)


def ricci_twist(u) -> TwistForm:
    """``-Ric(omega_u) = i dd^c log det g_u`` as a twist form (class 0 on the torus)."""
    m = _as_metric(u)
    return TwistForm(0.0, m.log_det)


def k_energy(u, v, bg: BackgroundGeometry | None = None):
    """Mabuchi K-energy ``K(u, v) = Ent(u, v) + J^{-Ric(omega_u)}(u, v)``."""
    mu, mv = _metrics(u, v)
    ent = integrate(np.log(mv.det / mu.det) * mv.det)
    return ent + _j_chi(mu, mv, TwistForm(0.0, mu.log_det))


def twisted_k_energy(u, v, chi: TwistForm, bg: BackgroundGeometry | None = None):
    mu, mv = _metrics(u, v)
    ent = integrate(np.log(mv.det / mu.det) * mv.det)
    return ent + _j_chi(mu, mv, TwistForm(0.0, mu.log_det)) + _j_chi(mu, mv, chi)


def quasi_d1(u, v):
    """``int |u - v| (omega_u^n + omega_v^n)``, a stand-in for the d1 Finsler distance."""
    mu, mv = _metrics(u, v)
    return integrate(np.abs(mu.u - mv.u) * (mu.det + mv.det))


def normalize_E0(u) -> np.ndarray:
    """Shift ``u`` by a constant so that ``E(0, u) = 0``."""
    u = np.asarray(u)
    zero = np.zeros_like(u)
    return u - energy_E(zero, u)


# First variations in the second slot, d/dt|_0 F(u, v + t f).


def variation_E(v, f):
    mv = _as_metric(v)
    return integrate(f * mv.det)


def variation_j_chi(v, f, chi: TwistForm):
    mv = _as_metric(v)
    n, N = mv.n, mv.u.shape[0]
    tr = np.einsum("...jk,...jk->...", mv.inv, chi.matrix(n, N, mv.g.dtype))
    return integrate(f * (tr - chi.chi_bar(n)) * mv.det)


def variation_twisted_k(v, f, chi: TwistForm, bg: BackgroundGeometry | None = None):
    mv = _as_metric(v)
    n, N = mv.n, mv.u.shape[0]
    R_bar = 0.0 if bg is None else bg.R_bar
    tr = np.einsum("...jk,...jk->...", mv.inv, chi.matrix(n, N, mv.g.dtype))
    R = scalar_curvature(mv, bg)
    return integrate(f * (R_bar - chi.chi_bar(n) + tr - R) * mv.det)


def functional_report(u, v, chi: TwistForm | None = None, bg=None) -> FunctionalReport:
    """All functionals of the pair ``(u, v)`` in one pass."""
    mu, mv = _metrics(u, v)
    E = _energy(mu, mv)
    I = integrate((mv.u - mu.u) * (mu.det - mv.det))
    J = integrate((mv.u - mu.u) * mu.det) - E
    Ent = integrate(np.log(mv.det / mu.det) * mv.det)
    K = Ent + _j_chi(mu, mv, TwistForm(0.0, mu.log_det))
    d1 = integrate(np.abs(mu.u - mv.u) * (mu.det + mv.det))
    report = FunctionalReport(
        E=float(E), I=float(I), J=float(J), Ent=float(Ent), K=float(K), quasi_d1=float(d1)
    )
    if chi is not None:
        Jchi = _j_chi(mu, mv, chi)
        report.Jchi = float(Jchi)
        report.Kchi = float(K + Jchi)
    return report
