"""Discrete geometry of translation-invariant Kähler metrics on the flat torus.

A torus-invariant Kähler potential on ``T^n`` is a periodic function ``u`` on the
real torus ``[0, 1)^n`` and its metric is the real Hessian metric
``g = I + Hess(u)``. Fields are plain numpy arrays of shape ``(N,)`` (n = 1) or
``(N, N)`` (n = 2, axis 0 is x, axis 1 is y). All derivatives are spectral.

Every routine keeps the floating dtype of its input, so the same code runs in
float64 and in ``np.longdouble``; the nonlinear solver relies on the latter to
push the fourth-order residual below 1e-10.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import NotKahler

__all__ = [
    "GridSpec",
    "Field",
    "HessianMetric",
    "BackgroundGeometry",
    "flat_torus",
    "spectral_derivative",
    "hessian",
    "hessian_metric",
    "laplacian",
    "trace",
    "scalar_curvature",
    "integrate",
    "random_kahler_potential",
    "EPS_PD",
    "LONG_PI",
]

EPS_PD = 1e-8
LONG_PI = np.arccos(np.longdouble(-1))


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid with ``N`` nodes per axis on the unit n-torus."""

    n: int
    N: int

    def __post_init__(self):
        if self.n not in (1, 2):
            raise ValueError(f"complex dimension n must be 1 or 2, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise ValueError(f"N must be a power of two >= 8, got {self.N}")

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.n

    @property
    def volume(self) -> float:
        return 1.0

    def coords(self, dtype=np.float64):
        """Node coordinates, one array per axis (``indexing='ij'``)."""
        x = np.arange(self.N, dtype=dtype) / dtype(self.N)
        if self.n == 1:
            return (x,)
        return tuple(np.meshgrid(x, x, indexing="ij"))

    def zeros(self, dtype=np.float64):
        return np.zeros(self.shape, dtype=dtype)

    @classmethod
    def of(cls, values) -> "GridSpec":
        values = np.asarray(values)
        if values.ndim not in (1, 2) or len(set(values.shape)) != 1:
            raise ValueError(f"not a square periodic grid: shape {values.shape}")
        return cls(values.ndim, values.shape[0])


@dataclass(frozen=True)
class Field:
    """A grid function together with its grid; the unit of persistence."""

    values: np.ndarray
    grid: GridSpec

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != self.grid.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field has non-finite values")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values) -> "Field":
        values = np.asarray(values)
        return cls(values, GridSpec.of(values))

    def __call__(self, *index):
        """Periodic node lookup, ``f(i) == f(i + N)``."""
        return self.values[tuple(i % self.grid.N for i in index)]


@dataclass(frozen=True)
class HessianMetric:
    """The metric ``g = I + Hess(u)`` at every node.

    ``g`` and ``inv`` have shape ``grid.shape + (n, n)``; ``det`` and ``min_eig``
    have the grid shape.
    """

    u: np.ndarray
    g: np.ndarray
    det: np.ndarray
    inv: np.ndarray
    min_eig: np.ndarray

    @property
    def n(self) -> int:
        return self.u.ndim

    @property
    def log_det(self) -> np.ndarray:
        return np.log(self.det)


@dataclass(frozen=True)
class BackgroundGeometry:
    """Flat background: ``Ric(omega) = 0``, average scalar curvature 0, volume 1."""

    grid: GridSpec
    ricci_potential: np.ndarray = field(default=None, repr=False)
    R_bar: float = 0.0
    V: float = 1.0

    def __post_init__(self):
        if self.ricci_potential is None:
            object.__setattr__(self, "ricci_potential", self.grid.zeros())
        if np.any(self.ricci_potential != 0) or self.R_bar != 0 or self.V != 1:
            raise ValueError("only the flat torus background is supported")


def flat_torus(n: int, N: int) -> BackgroundGeometry:
    return BackgroundGeometry(GridSpec(n, N))


def _real_dtype(a):
    dt = np.asarray(a).dtype
    if dt == np.longdouble:
        return np.longdouble
    return np.float64


@lru_cache(maxsize=None)
def _angular_wavenumbers(N, dtype):
    pi = LONG_PI if dtype is np.longdouble else np.pi
    k = np.fft.fftfreq(N, 1.0 / N).astype(dtype)
    return 2 * pi * k


def _multiplier(N, n, index, dtype):
    """Fourier symbol of the derivative ``index`` (order per axis)."""
    mult = np.ones((1,) * n, dtype=dtype)
    phase = 0
    for axis, order in enumerate(index):
        if order == 0:
            continue
        k = _angular_wavenumbers(N, dtype) ** order
        if order % 2:
            k = k.copy()
            k[N // 2] = 0
        shape = [1] * n
        shape[axis] = N
        mult = mult * k.reshape(shape)
        phase += order
    # (i k)^p = i^p k^p
    return mult * (1j) ** (phase % 4)


def _as_field(f):
    f = np.asarray(f)
    if f.dtype != np.longdouble:
        f = f.astype(np.float64, copy=False)
    return f


def _derivatives(f, indices):
    f = _as_field(f)
    dtype = _real_dtype(f)
    n, N = f.ndim, f.shape[0]
    fh = np.fft.fftn(f)
    return [np.fft.ifftn(fh * _multiplier(N, n, tuple(ix), dtype)).real for ix in indices]


def spectral_derivative(f, index) -> np.ndarray:
    """Exact derivative of the trigonometric interpolant of ``f``.

    ``index`` gives the derivative order along each axis, e.g. ``(2,)`` or
    ``(1, 1)``. Odd-order derivatives drop the Nyquist mode.
    """
    f = _as_field(f)
    index = tuple(int(i) for i in index)
    if len(index) != f.ndim:
        raise ValueError(f"multi-index {index} does not match dimension {f.ndim}")
    if sum(index) > 4 or min(index) < 0:
        raise ValueError(f"derivative order must be in 0..4, got {index}")
    return _derivatives(f, [index])[0]


def hessian(u) -> np.ndarray:
    """Real Hessian, shape ``u.shape + (n, n)``."""
    u = _as_field(u)
    n = u.ndim
    if n == 1:
        (uxx,) = _derivatives(u, [(2,)])
        return uxx[..., None, None]
    uxx, uxy, uyy = _derivatives(u, [(2, 0), (1, 1), (0, 2)])
    H = np.empty(u.shape + (2, 2), dtype=uxx.dtype)
    H[..., 0, 0] = uxx
    H[..., 0, 1] = H[..., 1, 0] = uxy
    H[..., 1, 1] = uyy
    return H


def _metric_from_matrix(u, g, eps_pd, check):
    n = u.ndim
    if n == 1:
        a = g[..., 0, 0]
        det = a
        inv = (1 / a)[..., None, None]
        min_eig = a
    else:
        a, b, c = g[..., 0, 0], g[..., 0, 1], g[..., 1, 1]
        det = a * c - b * b
        inv = np.empty_like(g)
        inv[..., 0, 0] = c / det
        inv[..., 1, 1] = a / det
        inv[..., 0, 1] = inv[..., 1, 0] = -b / det
        min_eig = 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + b * b)
    if check:
        worst = np.unravel_index(np.argmin(min_eig), min_eig.shape)
        if not min_eig[worst] > eps_pd:
            raise NotKahler(worst, min_eig[worst], eps_pd)
    return HessianMetric(u=u, g=g, det=det, inv=inv, min_eig=min_eig)


def hessian_metric(u, eps_pd: float = EPS_PD, check: bool = True) -> HessianMetric:
    """Build ``g = I + Hess(u)`` with its determinant and inverse.

    Raises :class:`NotKahler` when the smallest eigenvalue of ``g`` is not
    above ``eps_pd`` somewhere (unless ``check`` is false).
    """
    u = _as_field(u)
    g = hessian(u)
    g = g + np.eye(u.ndim, dtype=g.dtype)
    return _metric_from_matrix(u, g, eps_pd, check)


def constant_metric(n: int, N: int, matrix) -> HessianMetric:
    """A metric with the same matrix at every node (not necessarily Hessian)."""
    matrix = np.asarray(matrix, dtype=np.float64).reshape(n, n)
    shape = (N,) * n
    g = np.broadcast_to(matrix, shape + (n, n)).copy()
    return _metric_from_matrix(np.zeros(shape), g, EPS_PD, True)


def laplacian(m: HessianMetric, f) -> np.ndarray:
    """``g^{jk} d_j d_k f`` at every node."""
    H = hessian(f)
    return np.einsum("...jk,...jk->...", m.inv, H)


def trace(m_v: HessianMetric, m_u: HessianMetric) -> np.ndarray:
    """``tr_{g_v} g_u = g_v^{jk} (g_u)_{jk}``."""
    return np.einsum("...jk,...jk->...", m_v.inv, m_u.g)


def scalar_curvature(m: HessianMetric, bg: BackgroundGeometry | None = None) -> np.ndarray:
    """``R = -Laplacian_g log det g`` (flat background)."""
    return -laplacian(m, m.log_det)


def integrate(f):
    """Periodic trapezoidal rule ``sum f h^n`` (the torus has unit volume)."""
    f = np.asarray(f)
    return f.sum() / f.size


def random_kahler_potential(
    grid: GridSpec,
    rng: np.random.Generator,
    n_modes: int = 4,
    kmax: int = 3,
    strength: float = 0.5,
) -> np.ndarray:
    """Smooth random mean-zero potential with ``|Hess u| <= strength`` pointwise.

    The smallest eigenvalue of ``I + Hess u`` is therefore at least
    ``1 - strength``.
    """
    if not 0 < strength < 1:
        raise ValueError("strength must lie in (0, 1)")
    xs = grid.coords()
    u = grid.zeros()
    for _ in range(n_modes):
        k = rng.integers(-kmax, kmax + 1, size=grid.n)
        while not np.any(k):
            k = rng.integers(-kmax, kmax + 1, size=grid.n)
        phase = sum(2 * np.pi * ki * xi for ki, xi in zip(k, xs))
        a, b = rng.normal(size=2) / float(k @ k)
        u = u + a * np.cos(phase) + b * np.sin(phase)
    u -= u.mean()
    H = hessian(u)
    spread = np.abs(np.linalg.eigvalsh(H)).max()
    return u * (strength / spread)
