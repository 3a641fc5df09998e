import mpmath as mp
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from cscktorus import (
    GridSpec,
    TwistForm,
    energy_E,
    entropy,
    func_I,
    func_J,
    hessian_metric,
    integrate,
    functional_report,
    j_chi,
    k_energy,
    normalize_E0,
    quasi_d1,
    random_kahler_potential,
    ricci_twist,
    twisted_k_energy,
    variation_E,
    variation_j_chi,
    variation_twisted_k,
)

from conftest import TWO_PI, cosine_potential, random_potentials

X = sp.symbols("x", real=True)
EPS = sp.Rational(1, 2)
V_EXPR = -EPS * sp.cos(2 * sp.pi * X) / (4 * sp.pi**2)
DET_EXPR = 1 + sp.diff(V_EXPR, X, 2)

seeds = st.integers(0, 2**31 - 1)
dims = st.sampled_from([(1, 64), (2, 32)])


def _pair(n, N, seed, strength=0.5):
    rng = np.random.default_rng(seed)
    g = GridSpec(n, N)
    return (random_kahler_potential(g, rng, strength=strength) + rng.normal(),
            random_kahler_potential(g, rng, strength=strength) + rng.normal())


def _triple(n, N, seed):
    rng = np.random.default_rng(seed)
    g = GridSpec(n, N)
    return tuple(random_kahler_potential(g, rng, strength=0.5) + rng.normal() for _ in range(3))


# -- closed-form values on the cosine example (u = 0, v = -eps cos / 4pi^2) -----------

@pytest.fixture
def cosine_pair(grid1):
    return np.zeros(grid1.shape), cosine_potential(grid1, 0.5)


def test_energy_example(cosine_pair):
    oracle = sp.integrate(V_EXPR * (1 + DET_EXPR) / 2, (X, 0, 1))
    assert sp.simplify(oracle + EPS**2 / (16 * sp.pi**2)) == 0
    assert abs(energy_E(*cosine_pair) - float(oracle)) < 1e-9
    assert abs(energy_E(*cosine_pair) - (-1.58314e-3)) < 1e-8


def test_I_example(cosine_pair):
    oracle = sp.integrate(V_EXPR * (1 - DET_EXPR), (X, 0, 1))
    assert sp.simplify(oracle - EPS**2 / (8 * sp.pi**2)) == 0
    assert abs(func_I(*cosine_pair) - float(oracle)) < 1e-9
    assert abs(func_I(*cosine_pair) - 3.16629e-3) < 1e-8


def test_J_example(cosine_pair):
    oracle = sp.integrate(V_EXPR, (X, 0, 1)) - sp.integrate(V_EXPR * (1 + DET_EXPR) / 2, (X, 0, 1))
    assert abs(func_J(*cosine_pair) - float(oracle)) < 1e-9
    assert abs(func_J(*cosine_pair) - 1.58314e-3) < 1e-8


def test_entropy_example(grid1):
    mp.mp.dps = 30
    oracle = mp.quad(lambda x: (1 + 0.1 * mp.cos(2 * mp.pi * x)) * mp.log(1 + 0.1 * mp.cos(2 * mp.pi * x)), [0, 1])
    value = entropy(np.zeros(grid1.shape), cosine_potential(grid1, 0.1))
    assert abs(value - 2.5031e-3) < 1e-7
    # the integrand is analytic, so the periodic rule is spectrally accurate
    assert abs(value - float(oracle)) < 1e-14


def test_quasi_d1_example(cosine_pair, grid1):
    mp.mp.dps = 30
    eps = mp.mpf("0.5")

    def integrand(x):
        c = mp.cos(2 * mp.pi * x)
        return abs(eps * c / (4 * mp.pi**2)) * (2 + eps * c)

    nodes = mp.fsum(integrand(mp.mpf(i) / grid1.N) for i in range(grid1.N)) / grid1.N
    continuum = mp.quad(integrand, [0, 0.25, 0.75, 1])
    value = quasi_d1(*cosine_pair)
    assert abs(value - float(nodes)) < 1e-9
    # |v| has kinks, so the grid rule is only second order against the continuum integral
    assert abs(value - float(continuum)) < 2e-5


def test_quasi_d1_of_constant_shift(grid2):
    assert abs(quasi_d1(grid2.zeros(), np.full(grid2.shape, -0.3)) - 0.6) < 1e-15


@pytest.mark.parametrize("f", [energy_E, func_I, func_J, entropy, k_energy, quasi_d1])
def test_vanish_on_diagonal(f, grid2):
    u = random_kahler_potential(grid2, np.random.default_rng(5))
    assert abs(f(u, u)) < 1e-14


def test_I_is_symmetric():
    for seed in range(10):
        u, v = _pair(2, 32, seed)
        assert abs(func_I(u, v) - func_I(v, u)) < 1e-13


def test_zero_twist_gives_zero(grid1):
    u, v = _pair(1, 64, 11)
    assert j_chi(u, v, TwistForm(0.0)) == 0.0


# -- identities on random pairs (hypothesis drives the seeds) -------------------------------

@settings(max_examples=30, deadline=None)
@given(dim=dims, seed=seeds)
def test_energy_cocycle(dim, seed):
    u, v, w = _triple(*dim, seed)
    assert abs(energy_E(u, v) + energy_E(v, w) - energy_E(u, w)) < 1e-11


@settings(max_examples=30, deadline=None)
@given(dim=dims, seed=seeds)
def test_tian_inequalities(dim, seed):
    n = dim[0]
    u, v = _pair(*dim, seed)
    I, J = func_I(u, v), func_J(u, v)
    assert J / n - (I - J) <= 1e-10
    assert (I - J) - n * J <= 1e-10
    assert J >= -1e-12


@settings(max_examples=30, deadline=None)
@given(dim=dims, seed=seeds)
def test_entropy_nonnegative(dim, seed):
    u, v = _pair(*dim, seed, strength=0.8)
    assert entropy(u, v) >= 0.0


@settings(max_examples=30, deadline=None)
@given(dim=dims, seed=seeds)
def test_twist_by_first_kahler_form(dim, seed):
    u, v = _pair(*dim, seed)
    lhs = j_chi(u, v, TwistForm.kahler_form(u))
    assert abs(lhs - (func_I(u, v) - func_J(u, v))) < 1e-11


@settings(max_examples=30, deadline=None)
@given(dim=dims, seed=seeds)
def test_twist_by_target_kahler_form(dim, seed):
    u, w = _pair(*dim, seed)
    assert abs(j_chi(u, w, TwistForm.kahler_form(w)) + func_J(u, w)) < 1e-11


@settings(max_examples=30, deadline=None)
@given(dim=dims, seed=seeds)
def test_twist_by_third_kahler_form(dim, seed):
    u, v, w = _triple(*dim, seed)
    extra = integrate((w - u) * (hessian_metric(v).det - hessian_metric(u).det))
    expected = func_I(u, v) - func_J(u, v) + extra
    assert abs(j_chi(u, v, TwistForm.kahler_form(w)) - expected) < 1e-11


@settings(max_examples=30, deadline=None)
@given(dim=dims, seed=seeds)
def test_k_energy_cocycle(dim, seed):
    u, v, w = _triple(*dim, seed)
    assert abs(k_energy(u, v) + k_energy(v, w) - k_energy(u, w)) < 1e-10


@settings(max_examples=30, deadline=None)
@given(dim=dims, seed=seeds, a=st.floats(0, 2))
def test_twisted_k_energy_cocycle(dim, seed, a):
    u, v, w = _triple(*dim, seed)
    rng = np.random.default_rng(seed + 1)
    chi = TwistForm(a, 0.1 * random_kahler_potential(GridSpec(*dim), rng))
    total = twisted_k_energy(u, v, chi) + twisted_k_energy(v, w, chi)
    assert abs(total - twisted_k_energy(u, w, chi)) < 1e-10


def test_k_energy_from_flat_is_entropy(grid2):
    v = random_kahler_potential(grid2, np.random.default_rng(8))
    assert k_energy(grid2.zeros(), v) == entropy(grid2.zeros(), v)


def test_twisted_k_energy_with_zero_twist(grid2):
    u, v = _pair(2, 32, 9)
    assert twisted_k_energy(u, v, TwistForm(0.0)) == pytest.approx(k_energy(u, v), abs=1e-15)


@pytest.mark.parametrize("tau", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("dim", [(1, 64), (2, 32)])
def test_step_functional_identity(tau, dim):
    # twisting by omega_u / tau adds (I - J) / tau to the K-energy
    for seed in range(5):
        u, v = _pair(*dim, seed)
        lhs = twisted_k_energy(u, v, TwistForm.kahler_form(u, 1 / tau))
        rhs = k_energy(u, v) + (func_I(u, v) - func_J(u, v)) / tau
        assert abs(lhs - rhs) < 1e-10


def test_ricci_twist_of_flat_is_zero(grid2):
    chi = ricci_twist(grid2.zeros())
    assert chi.a == 0.0 and np.all(chi.psi == 0.0)


# -- normalisation -------------------------------------------------------------------------

def test_normalize_examples(grid2):
    u = random_kahler_potential(grid2, np.random.default_rng(12)) + 0.7
    z = normalize_E0(u)
    assert abs(energy_E(grid2.zeros(), z)) < 1e-12
    assert np.abs(normalize_E0(z) - z).max() < 1e-15
    assert np.all(normalize_E0(np.full(grid2.shape, 3.0)) == 0.0)


# -- first variations ------------------------------------------------------------------------

@pytest.mark.parametrize("dim", [(1, 64), (2, 32)])
def test_variation_formulas_match_central_differences(dim):
    rng = np.random.default_rng(21)
    g = GridSpec(*dim)
    u, v = (random_kahler_potential(g, rng, strength=0.4) for _ in range(2))
    f = random_kahler_potential(g, rng, strength=0.2) + 0.3
    chi = TwistForm(0.5, 0.2 * random_kahler_potential(g, rng))
    h = 1e-4
    cases = [
        (lambda w: energy_E(u, w), variation_E(v, f)),
        (lambda w: j_chi(u, w, chi), variation_j_chi(v, f, chi)),
        (lambda w: twisted_k_energy(u, w, chi), variation_twisted_k(v, f, chi)),
    ]
    for F, exact in cases:
        fd = (F(v + h * f) - F(v - h * f)) / (2 * h)
        assert abs(fd - exact) < 1e-7


def test_functional_report_is_consistent(grid1):
    u, v = _pair(1, 64, 30)
    chi = TwistForm(0.5)
    rep = functional_report(u, v, chi)
    assert rep.E == pytest.approx(energy_E(u, v), abs=1e-15)
    assert rep.K == pytest.approx(k_energy(u, v), abs=1e-15)
    assert rep.Kchi == pytest.approx(twisted_k_energy(u, v, chi), abs=1e-15)
    assert set(rep.as_dict()) == {"E", "I", "J", "Ent", "K", "quasi_d1", "Jchi", "Kchi"}


def test_semipositivity_check():
    g = GridSpec(1, 64)
    x = g.coords()[0]
    rough = TwistForm(0.5, 0.01 * np.sin(TWO_PI * 8 * x))
    assert not rough.is_semipositive(1, 64)
    assert TwistForm(0.5, 0.003 * np.sin(TWO_PI * x)).is_semipositive(1, 64)
