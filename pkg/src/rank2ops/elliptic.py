"""Weierstrass elliptic functions on an arbitrary period lattice.

Values come from trigonometric (nome) series evaluated in a Gauss-reduced
basis of the lattice, so the nome satisfies ``|q| <= exp(-pi*sqrt(3)/2)``
and the series converge geometrically.  Laurent and Taylor jets of the
same functions are produced from the classical coefficient recursions.

Half-periods are used throughout: the periods are ``2*omega1`` and
``2*omega2``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DegenerateLattice, PoleAtLatticePoint

# Calls closer than this to a lattice point (in units of the shortest
# period) are rejected.
POLE_GUARD = 1e-10
SERIES_RTOL = 1e-17
_MAX_TERMS = 80


class Which(str, Enum):
    WP = "WP"
    WP_PRIME = "WP_PRIME"
    ZETA = "ZETA"


@dataclass(frozen=True)
class LatticeSpec:
    omega1: complex
    omega2: complex
    tau: complex
    q: complex
    g2: complex
    g3: complex
    eta1: complex
    eta2: complex
    e1: complex
    e2: complex
    e3: complex
    # Gauss-reduced half-period basis used by the series, with its
    # quasi-periods.  Same lattice as (omega1, omega2).
    red_omega: tuple[complex, complex] = field(repr=False, default=(1, 1j))
    red_eta: tuple[complex, complex] = field(repr=False, default=(0, 0))

    @property
    def periods(self) -> tuple[complex, complex]:
        return 2 * self.omega1, 2 * self.omega2

    @property
    def shortest_period(self) -> float:
        return abs(2 * self.red_omega[0])

    def to_json(self) -> dict:
        return {"omega1": _cj(self.omega1), "omega2": _cj(self.omega2)}


@dataclass(frozen=True)
class TorusPoint:
    z: complex
    z_reduced: complex
    dist_to_lattice: float


@dataclass(frozen=True)
class LaurentJet:
    """Truncated Laurent series ``sum_{m=lo}^{hi} coeffs[m-lo] z^m``."""

    lo: int
    coeffs: np.ndarray
    hi: int = None  # type: ignore[assignment]

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        object.__setattr__(self, "coeffs", c)
        if self.hi is None:
            object.__setattr__(self, "hi", self.lo + len(c) - 1)
        if len(c) != self.hi - self.lo + 1:
            raise ValueError("LaurentJet needs hi - lo + 1 coefficients")

    def coeff(self, m: int) -> complex:
        if m < self.lo:
            return 0j
        if m > self.hi:
            raise IndexError(f"exponent {m} beyond truncation order {self.hi}")
        return complex(self.coeffs[m - self.lo])

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        acc = np.zeros_like(z)
        for c in self.coeffs[::-1]:
            acc = acc * z + c
        return acc * z ** self.lo

    def derivative(self) -> LaurentJet:
        m = np.arange(self.lo, self.hi + 1)
        return LaurentJet(self.lo - 1, self.coeffs * m, self.hi - 1)

    def truncate(self, hi: int) -> LaurentJet:
        if hi > self.hi:
            raise IndexError("cannot extend a jet by truncation")
        if hi < self.lo:
            return LaurentJet(hi, np.zeros(1), hi)
        return LaurentJet(self.lo, self.coeffs[: hi - self.lo + 1], hi)

    def __add__(self, other: LaurentJet) -> LaurentJet:
        if not isinstance(other, LaurentJet):
            if self.hi < 0:
                raise IndexError("constant term lies beyond the truncation order")
            const = np.zeros(self.hi + 1, dtype=complex)
            const[0] = other
            return self + LaurentJet(0, const, self.hi)
        lo, hi = min(self.lo, other.lo), min(self.hi, other.hi)
        out = np.zeros(hi - lo + 1, dtype=complex)
        for j in (self, other):
            top = min(j.hi, hi)
            out[j.lo - lo : top - lo + 1] += j.coeffs[: top - j.lo + 1]
        return LaurentJet(lo, out, hi)

    __radd__ = __add__

    def __neg__(self) -> LaurentJet:
        return LaurentJet(self.lo, -self.coeffs, self.hi)

    def __sub__(self, other: LaurentJet) -> LaurentJet:
        return self + (-other)

    def __mul__(self, other) -> LaurentJet:
        if isinstance(other, LaurentJet):
            # valid through exponent min(hi_a + lo_b, hi_b + lo_a)
            hi = min(self.hi + other.lo, other.hi + self.lo)
            lo = self.lo + other.lo
            full = np.convolve(self.coeffs, other.coeffs)
            return LaurentJet(lo, full[: hi - lo + 1], hi)
        return LaurentJet(self.lo, self.coeffs * other, self.hi)

    __rmul__ = __mul__

    def reciprocal(self, tol: float = 0.0) -> LaurentJet:
        """1/f, keeping the relative truncation depth hi - lo.

        Leading coefficients below ``tol * max|coeff|`` are treated as
        cancelled to zero.
        """
        mag = np.abs(self.coeffs)
        lead = np.flatnonzero(mag > tol * mag.max()) if mag.size else []
        if len(lead) == 0:
            raise ZeroDivisionError("reciprocal of a zero jet")
        j = LaurentJet(self.lo + lead[0], self.coeffs[lead[0] :], self.hi)
        depth = j.hi - j.lo
        a = j.coeffs
        b = np.zeros(depth + 1, dtype=complex)
        b[0] = 1 / a[0]
        for m in range(1, depth + 1):
            b[m] = -np.dot(a[1 : m + 1], b[m - 1 :: -1][:m]) / a[0]
        return LaurentJet(-j.lo, b, -j.lo + depth)

    def shift(self, m: int) -> LaurentJet:
        """Multiply by ``z**m``."""
        return LaurentJet(self.lo + m, self.coeffs, self.hi + m)

    def leading(self) -> complex:
        return complex(self.coeffs[0])

    def to_json(self) -> dict:
        return {"lo": int(self.lo), "hi": int(self.hi), "coeffs": [_cj(c) for c in self.coeffs]}


def _cj(c: complex) -> list[float]:
    c = complex(c)
    return [c.real, c.imag]


# ---------------------------------------------------------------- lattice


def _gauss_reduce(w1: complex, w2: complex):
    """Return (a, b, M) with [a, b] = M @ [w1, w2], |a| <= |b|, |Re(b/a)| <= 1/2."""
    M = np.array([[1, 0], [0, 1]], dtype=np.int64)
    a, b = w1, w2
    for _ in range(200):
        if abs(b) < abs(a):
            a, b = b, a
            M = M[::-1].copy()
        m = round((b / a).real)
        if m == 0:
            break
        b = b - m * a
        M[1] -= m * M[0]
    if (b / a).imag < 0:
        b = -b
        M[1] = -M[1]
    return a, b, M


def _series_sums(q: complex, v, nmax_extra: int = 0):
    """Return the three Lambert-type trig sums at argument ``v``.

    S0 = sum Q_n sin(2nv), S1 = sum n Q_n cos(2nv), S2 = sum n^2 Q_n sin(2nv)
    with Q_n = q^{2n} / (1 - q^{2n}).
    """
    v = np.asarray(v, dtype=complex)
    s0 = np.zeros_like(v)
    s1 = np.zeros_like(v)
    s2 = np.zeros_like(v)
    q2 = q * q
    qn = 1.0 + 0j
    e2iv = np.exp(2j * v)
    em2iv = np.exp(-2j * v)
    pw = np.ones_like(v)
    pm = np.ones_like(v)
    for n in range(1, _MAX_TERMS + nmax_extra):
        qn *= q2
        Q = qn / (1 - qn)
        pw = pw * e2iv
        pm = pm * em2iv
        sin2 = (pw - pm) / 2j
        cos2 = (pw + pm) / 2
        t0 = Q * sin2
        t1 = n * Q * cos2
        t2 = n * n * Q * sin2
        s0 += t0
        s1 += t1
        s2 += t2
        # bound on |term| independent of accidental zeros of sin/cos
        bound = n * n * abs(Q) * (np.abs(pw) + np.abs(pm))
        floor = np.maximum(np.minimum(np.minimum(np.abs(s0), np.abs(s1)), np.abs(s2)), 1.0)
        if np.all(bound <= SERIES_RTOL * floor):
            break
    return s0, s1, s2


def _eisenstein(q: complex):
    """E2, E4, E6 as Lambert series in the nome q (q^2 = e^{2 pi i tau})."""
    e2 = e4 = e6 = 0j
    q2 = q * q
    qn = 1.0 + 0j
    for n in range(1, _MAX_TERMS):
        qn *= q2
        Q = qn / (1 - qn)
        t2, t4, t6 = n * Q, n**3 * Q, n**5 * Q
        e2 += t2
        e4 += t4
        e6 += t6
        if abs(t6) < SERIES_RTOL * max(abs(e6), 1.0) and n > 2:
            break
    return 1 - 24 * e2, 1 + 240 * e4, 1 - 504 * e6


def make_lattice(omega1: complex, omega2: complex) -> LatticeSpec:
    """Build the lattice with half-periods ``omega1``, ``omega2``.

    ``omega2`` is negated when needed so that ``Im(omega2/omega1) > 0``.
    """
    omega1, omega2 = complex(omega1), complex(omega2)
    if omega1 == 0 or omega2 == 0:
        raise DegenerateLattice("half-periods must be nonzero")
    ratio = omega2 / omega1
    if abs(ratio.imag) <= 1e-14 * max(1.0, abs(ratio)):
        raise DegenerateLattice(f"Im(omega2/omega1) = {ratio.imag!r} is zero")
    if ratio.imag < 0:
        omega2 = -omega2
    a, b, M = _gauss_reduce(omega1, omega2)
    rtau = b / a
    rq = cmath.exp(1j * math.pi * rtau)
    E2, E4, E6 = _eisenstein(rq)
    eta_a = math.pi**2 / (12 * a) * E2
    eta_b = (eta_a * b - 1j * math.pi / 2) / a  # Legendre relation
    g2 = (math.pi / a) ** 4 * E4 / 12
    g3 = (math.pi / a) ** 6 * E6 / 216
    Minv = np.linalg.inv(M.astype(float))
    eta1 = complex(Minv[0, 0] * eta_a + Minv[0, 1] * eta_b)
    eta2 = complex(Minv[1, 0] * eta_a + Minv[1, 1] * eta_b)
    tau = omega2 / omega1
    L = LatticeSpec(
        omega1=omega1,
        omega2=omega2,
        tau=tau,
        q=cmath.exp(1j * math.pi * tau),
        g2=complex(g2),
        g3=complex(g3),
        eta1=eta1,
        eta2=eta2,
        e1=0j,
        e2=0j,
        e3=0j,
        red_omega=(a, b),
        red_eta=(complex(eta_a), complex(eta_b)),
    )
    e1 = complex(wp(L, omega1))
    e2 = complex(wp(L, omega1 + omega2))
    e3 = complex(wp(L, omega2))
    return LatticeSpec(**{**L.__dict__, "e1": e1, "e2": e2, "e3": e3})


def lattice_from_tau(tau: complex) -> LatticeSpec:
    return make_lattice(1.0, complex(tau))


# ------------------------------------------------------------- evaluation


def _cell_coords(L: LatticeSpec, z):
    """Real coordinates (x, y) with z = 2a x + 2b y in the reduced basis."""
    a, b = L.red_omega
    z = np.asarray(z, dtype=complex)
    # solve z = 2a x + 2b y over the reals
    w = z / (2 * a)
    t = b / a
    y = w.imag / t.imag
    x = w.real - y * t.real
    return x, y


def _nearest_offset(L: LatticeSpec, z):
    """Split z = lattice point + remainder, remainder near the origin."""
    a, b = L.red_omega
    x, y = _cell_coords(L, z)
    m = np.rint(x)
    n = np.rint(y)
    zr = np.asarray(z, dtype=complex) - 2 * a * m - 2 * b * n
    # a rounded cell corner need not be the closest lattice point
    best = np.abs(zr)
    bm, bn = m.copy(), n.copy()
    for dm in (-1, 0, 1):
        for dn in (-1, 0, 1):
            if dm == 0 and dn == 0:
                continue
            cand = zr - 2 * a * dm - 2 * b * dn
            better = np.abs(cand) < best
            best = np.where(better, np.abs(cand), best)
            bm = np.where(better, m + dm, bm)
            bn = np.where(better, n + dn, bn)
    zr = np.asarray(z, dtype=complex) - 2 * a * bm - 2 * b * bn
    return zr, bm, bn


def lattice_distance(L: LatticeSpec, z):
    """Distance to the nearest lattice point, in units of the shortest period."""
    zr, _, _ = _nearest_offset(L, z)
    return np.abs(zr) / L.shortest_period


def _check_poles(L: LatticeSpec, zr):
    d = np.abs(zr) / L.shortest_period
    if np.any(d <= POLE_GUARD):
        raise PoleAtLatticePoint(
            f"argument within {float(np.min(d)):.3g} (reduced units) of a lattice point"
        )


def _eval_reduced(L: LatticeSpec, zr, which: Which):
    a, _ = L.red_omega
    eta_a = L.red_eta[0]
    b_over_a = L.red_omega[1] / a
    q = cmath.exp(1j * math.pi * b_over_a)
    k = math.pi / (2 * a)
    v = k * zr
    s0, s1, s2 = _series_sums(q, v)
    if which is Which.ZETA:
        return eta_a * zr / a + k * (1 / np.tan(v) + 4 * s0)
    csc2 = 1 / np.sin(v) ** 2
    if which is Which.WP:
        return -eta_a / a + k * k * (csc2 - 8 * s1)
    return k**3 * (-2 * csc2 / np.tan(v) + 16 * s2)


def eval_special(L: LatticeSpec, which, z):
    """Evaluate ``which`` in {WP, WP_PRIME, ZETA} at z (scalar or array)."""
    which = Which(which)
    scalar = np.ndim(z) == 0
    zr, m, n = _nearest_offset(L, z)
    _check_poles(L, zr)
    val = _eval_reduced(L, zr, which)
    if which is Which.ZETA:
        ea, eb = L.red_eta
        val = val + 2 * m * ea + 2 * n * eb
    return complex(val) if scalar else val


def wp(L: LatticeSpec, z):
    return eval_special(L, Which.WP, z)


def wp_prime(L: LatticeSpec, z):
    return eval_special(L, Which.WP_PRIME, z)


def zeta(L: LatticeSpec, z):
    return eval_special(L, Which.ZETA, z)


def reduce(L: LatticeSpec, z: complex) -> TorusPoint:
    """Representative of z in [0,1)*2*omega1 + [0,1)*2*omega2."""
    z = complex(z)
    w1, w2 = L.periods
    t = w2 / w1
    w = z / w1
    y = w.imag / t.imag
    x = w.real - y * t.real
    fx, fy = x - math.floor(x), y - math.floor(y)
    # snap coordinates that round onto the far edge back to 0
    if fx >= 1.0 - 1e-15 or abs(fx) < 1e-15:
        fx = 0.0
    if fy >= 1.0 - 1e-15 or abs(fy) < 1e-15:
        fy = 0.0
    zred = fx * w1 + fy * w2
    return TorusPoint(z=z, z_reduced=complex(zred), dist_to_lattice=float(lattice_distance(L, z)))


# ------------------------------------------------------------------ jets


def wp_laurent_coeffs(g2: complex, g3: complex, kmax: int) -> list[complex]:
    """c_k with wp = z^-2 + sum_{k>=2} c_k z^{2k-2}, for k = 2..kmax."""
    c = {2: g2 / 20, 3: g3 / 28}
    for k in range(4, kmax + 1):
        s = sum(c[m] * c[k - m] for m in range(2, k - 1))
        c[k] = 3 * s / ((2 * k + 1) * (k - 3))
    return [c[k] for k in range(2, kmax + 1)]


def _wp_jet(L: LatticeSpec, hi: int) -> LaurentJet:
    kmax = max(2, hi // 2 + 1)
    cs = wp_laurent_coeffs(L.g2, L.g3, kmax)
    coeffs = np.zeros(hi + 3, dtype=complex)
    coeffs[0] = 1.0
    for k, ck in zip(range(2, kmax + 1), cs):
        e = 2 * k - 2
        if e <= hi:
            coeffs[e + 2] = ck
    return LaurentJet(-2, coeffs, hi)


def taylor_wp(L: LatticeSpec, a: complex, order: int) -> np.ndarray:
    """Taylor coefficients p_0..p_order of wp(a + z), from wp'' = 6 wp^2 - g2/2."""
    p = np.zeros(max(order, 1) + 1, dtype=complex)
    p[0] = wp(L, a)
    p[1] = wp_prime(L, a)
    for k in range(0, order - 1):
        s = np.dot(p[: k + 1], p[k::-1])
        rhs = 6 * s - (L.g2 / 2 if k == 0 else 0)
        p[k + 2] = rhs / ((k + 2) * (k + 1))
    return p[: order + 1]


def taylor_zeta(L: LatticeSpec, a: complex, order: int) -> np.ndarray:
    """Taylor coefficients of zeta(a + z) through z^order."""
    t = np.zeros(order + 1, dtype=complex)
    t[0] = zeta(L, a)
    if order >= 1:
        p = taylor_wp(L, a, order - 1)
        t[1:] = -p / np.arange(1, order + 1)
    return t


def laurent_at_origin(L: LatticeSpec, which, hi: int, gamma: complex | None = None) -> LaurentJet:
    """Jet through z^hi at the origin of WP, WP_PRIME, ZETA or H_GAMMA.

    ``H_GAMMA`` is h(z) = zeta(z - gamma) - zeta(z); pass ``gamma``.
    """
    if hi < 2:
        raise ValueError("hi must be >= 2")
    if which == "H_GAMMA":
        if gamma is None:
            raise ValueError("H_GAMMA needs gamma")
        _check_poles(L, _nearest_offset(L, gamma)[0])
        shifted = LaurentJet(0, taylor_zeta(L, -complex(gamma), hi), hi)
        return shifted - laurent_at_origin(L, Which.ZETA, hi)
    which = Which(which)
    if which is Which.WP:
        return _wp_jet(L, hi)
    if which is Which.WP_PRIME:
        return _wp_jet(L, hi + 1).derivative()
    # zeta = -integral of wp, integration constant 0 since zeta is odd
    w = _wp_jet(L, hi - 1)
    out = np.zeros(hi + 2, dtype=complex)
    for m in range(w.lo, w.hi + 1):
        if m != -1:
            out[m + 2] = -w.coeff(m) / (m + 1)
    return LaurentJet(-1, out, hi)


def jet_from_samples(f, radius: float, lo: int, hi: int, npts: int = 128) -> LaurentJet:
    """Laurent coefficients of f on a circle by FFT (numerical cross-check)."""
    th = 2 * np.pi * np.arange(npts) / npts
    zs = radius * np.exp(1j * th)
    vals = np.asarray(f(zs), dtype=complex)
    fc = np.fft.fft(vals) / npts
    ms = np.arange(lo, hi + 1)
    coeffs = np.array([fc[m % npts] for m in ms]) / radius**ms
    return LaurentJet(lo, coeffs, hi)


def batch_eval(L: LatticeSpec, which, zs: Sequence[complex]) -> np.ndarray:
    return np.asarray(eval_special(L, which, np.asarray(zs, dtype=complex)))
