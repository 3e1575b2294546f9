import cmath
import math

import numpy as np
import pytest
from hypothesis import example, given, settings, strategies as st

import oracles
from rank2ops import elliptic as ell
from rank2ops.errors import DegenerateLattice, PoleAtLatticePoint

LATTICES = [(1.0, 0.3 + 1.1j), (1.0, 1j), (0.8 + 0.1j, -0.2 + 0.9j), (1.0, 0.5 + 0.5 * math.sqrt(3) * 1j)]


@pytest.fixture(params=LATTICES, ids=["generic", "square", "tilted", "hexagonal"])
def lat(request):
    return ell.make_lattice(*request.param)


def test_invariants_against_lattice_sums(lat):
    g2, g3 = oracles.eisenstein_g2_g3(lat.omega1, lat.omega2)
    scale = max(abs(g2), abs(g3), 1.0)
    assert abs(lat.g2 - g2) <= 1e-10 * scale
    assert abs(lat.g3 - g3) <= 1e-10 * scale


@pytest.mark.parametrize("z", [0.31 + 0.2j, -0.4 + 0.05j, 0.12 - 0.33j])
def test_values_against_lattice_sums(lat, z):
    w1, w2 = lat.omega1, lat.omega2
    assert abs(ell.wp(lat, z) - oracles.wp_sum(w1, w2, z)) < 1e-10 * abs(oracles.wp_sum(w1, w2, z))
    assert abs(ell.wp_prime(lat, z) - oracles.wp_prime_sum(w1, w2, z)) < 1e-10 * abs(ell.wp_prime(lat, z))
    assert abs(ell.zeta(lat, z) - oracles.zeta_sum(w1, w2, z)) < 1e-10 * abs(ell.zeta(lat, z))


def test_square_lattice_frozen():
    # lemniscatic case: g3 = 0 and g2 = Gamma(1/4)^8 / (256 pi^2) for periods 2, 2i
    L = ell.make_lattice(1.0, 1j)
    g2_ref = math.gamma(0.25) ** 8 / (256 * math.pi**2)
    assert abs(L.g3) < 1e-12
    assert abs(L.g2 - g2_ref) < 1e-12 * g2_ref
    # e2 = wp(omega1 + omega2) = 0 by symmetry
    assert abs(L.e2) < 1e-12


def test_half_period_values_are_cubic_roots(lat):
    es = [lat.e1, lat.e2, lat.e3]
    assert abs(sum(es)) < 1e-12 * max(map(abs, es))
    for e in es:
        assert abs(4 * e**3 - lat.g2 * e - lat.g3) < 1e-10 * max(abs(lat.g2) ** 1.5, 1.0)


def test_legendre_relation(lat):
    lhs = lat.eta1 * lat.omega2 - lat.eta2 * lat.omega1
    assert abs(lhs - 1j * math.pi / 2) < 1e-12


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-0.5, 0.5), y=st.floats(-0.5, 0.5), idx=st.integers(0, len(LATTICES) - 1))
@example(x=0.5, y=0.5, idx=1)
def test_weierstrass_ode(x, y, idx):
    L = ell.make_lattice(*LATTICES[idx])
    z = x * L.periods[0] + y * L.periods[1]
    if ell.lattice_distance(L, z) < 0.05:
        return
    p, dp = ell.wp(L, z), ell.wp_prime(L, z)
    # |g2|^1.5 floors the scale at half-periods where wp, wp' and g3 can all vanish
    scale = abs(4 * p**3) + abs(L.g2 * p) + abs(L.g3) + abs(dp) ** 2 + abs(L.g2) ** 1.5
    assert abs(dp**2 - (4 * p**3 - L.g2 * p - L.g3)) < 1e-12 * scale


@settings(max_examples=40, deadline=None)
@given(x=st.floats(-0.5, 0.5), y=st.floats(-0.5, 0.5), m=st.integers(-3, 3), k=st.integers(-3, 3))
def test_quasi_periodicity(x, y, m, k):
    L = ell.make_lattice(*LATTICES[0])
    z = x * L.periods[0] + y * L.periods[1]
    if ell.lattice_distance(L, z) < 0.05:
        return
    w = m * L.periods[0] + k * L.periods[1]
    assert abs(ell.wp(L, z + w) - ell.wp(L, z)) < 1e-11 * max(abs(ell.wp(L, z)), 1.0)
    shift = 2 * m * L.eta1 + 2 * k * L.eta2
    assert abs(ell.zeta(L, z + w) - ell.zeta(L, z) - shift) < 1e-11 * max(abs(shift), 1.0)


@settings(max_examples=25, deadline=None)
@given(x=st.floats(-0.5, 0.5), y=st.floats(-0.5, 0.5))
def test_parity(x, y):
    L = ell.make_lattice(*LATTICES[2])
    z = x * L.periods[0] + y * L.periods[1]
    if ell.lattice_distance(L, z) < 0.05:
        return
    assert abs(ell.wp(L, -z) - ell.wp(L, z)) < 1e-12 * abs(ell.wp(L, z))
    assert abs(ell.wp_prime(L, -z) + ell.wp_prime(L, z)) < 1e-12 * abs(ell.wp_prime(L, z))
    assert abs(ell.zeta(L, -z) + ell.zeta(L, z)) < 1e-12 * abs(ell.zeta(L, z))


def test_zeta_derivative_is_minus_wp(lat):
    z, h = 0.27 + 0.11j, 1e-4
    dz = (ell.zeta(lat, z + h) - ell.zeta(lat, z - h)) / (2 * h)
    assert abs(dz + ell.wp(lat, z)) < 1e-6 * abs(ell.wp(lat, z))


@pytest.mark.parametrize("which", ["WP", "WP_PRIME", "ZETA"])
def test_jet_matches_values(lat, which):
    jet = ell.laurent_at_origin(lat, which, 12)
    for z in (0.05, 0.04j, 0.03 - 0.03j):
        assert abs(jet(z) - ell.eval_special(lat, which, z)) < 1e-8 * abs(jet(z))


def test_jet_matches_fft(lat):
    jet = ell.laurent_at_origin(lat, "WP", 8)
    num = ell.jet_from_samples(lambda z: ell.batch_eval(lat, "WP", z), 0.2, -2, 8)
    for m in range(-2, 9):
        assert abs(jet.coeff(m) - num.coeff(m)) < 1e-9 * max(1.0, abs(jet.coeff(m)))


def test_wp_laurent_coefficients_frozen():
    # c2 = g2/20, c3 = g3/28, c4 = g2^2/1200, c5 = 3 g2 g3 / 6160
    g2, g3 = 2.0 + 1.0j, -0.5 + 0.25j
    c = ell.wp_laurent_coeffs(g2, g3, 5)
    assert np.allclose(c, [g2 / 20, g3 / 28, g2**2 / 1200, 3 * g2 * g3 / 6160], rtol=1e-15, atol=0)


def test_h_gamma_jet():
    L = ell.make_lattice(*LATTICES[0])
    g = 0.4 + 0.3j
    jet = ell.laurent_at_origin(L, "H_GAMMA", 10, gamma=g)
    z = 0.02 + 0.01j
    assert abs(jet(z) - (ell.zeta(L, z - g) - ell.zeta(L, z))) < 1e-10


def test_laurent_jet_arithmetic():
    a = ell.LaurentJet(-1, [1.0, 2.0, 3.0, 4.0])
    r = a.reciprocal()
    prod = a * r
    assert prod.lo == 0
    assert abs(prod.coeff(0) - 1) < 1e-15
    for m in range(1, prod.hi + 1):
        assert abs(prod.coeff(m)) < 1e-14
    with pytest.raises(IndexError):
        a.coeff(5)
    assert a.coeff(-3) == 0


def test_reduce_lands_in_cell(lat):
    w1, w2 = lat.periods
    z = 3.3 * w1 - 2.7 * w2 + 0.01
    tp = ell.reduce(lat, z)
    assert abs(ell.wp(lat, tp.z_reduced) - ell.wp(lat, z)) < 1e-10 * abs(ell.wp(lat, z))


def test_errors():
    with pytest.raises(DegenerateLattice):
        ell.make_lattice(1.0, 2.0)
    with pytest.raises(DegenerateLattice):
        ell.make_lattice(0.0, 1j)
    L = ell.make_lattice(1.0, 1j)
    with pytest.raises(PoleAtLatticePoint):
        ell.wp(L, 0.0)
    with pytest.raises(PoleAtLatticePoint):
        ell.zeta(L, L.periods[0] + L.periods[1])


def test_orientation_flip():
    a = ell.make_lattice(1.0, 0.3 - 1.1j)
    b = ell.make_lattice(1.0, -0.3 + 1.1j)
    assert a.tau.imag > 0
    assert abs(a.g2 - b.g2) < 1e-12 * abs(b.g2)


def test_tau_constructor():
    L = ell.lattice_from_tau(cmath.exp(1j * math.pi / 3))
    # hexagonal: g2 = 0
    assert abs(L.g2) < 1e-10 * abs(L.g3)
