"""Closed-form rank-two operators from genus-one Tyurin data.

The transfer matrix of the Baker-Akhiezer row pair ``(psi_n, psi_{n+1})``
has the shape ``chi_n = [[0, 1], [A_n, B_n]]`` where ``A_n`` and ``B_n`` are
elliptic, with simple poles at ``gamma_{1n}, gamma_{2n}``, and ``B_n`` also
has a simple pole at the origin.  Residues at ``gamma_{sn}`` obey
``res A_n = alpha_{sn} res B_n``, the zeros of ``A_n`` are the next Tyurin
points, and ``alpha_{s,n+1} = -B_n(gamma_{s,n+1})``.  Everything below is
read off from that ansatz:

* ``c_{n+1} = -A_n(0)``, ``v_{n+1}`` is minus the constant term of ``B_n``;
* ``kappa_n`` (the ``z`` coefficient of ``B_n``) gives the potential
  ``u_n = -(kappa_n + kappa_{n-1})`` of ``L_wp = L_2^2 + u``.

The ``PRINTED`` variant evaluates an older set of closed forms that does
not follow from the ansatz; it is kept for discrepancy reports.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from . import elliptic as ell
from .diffop import BandedOp, Seq, Window, compose, diag, from_bands, lincomb, restrict_valid
from .elliptic import LatticeSpec
from .errors import (
    AlphaCollision,
    DegenerateGamma,
    DenominatorCollision,
    IllConditionedFit,
    IndexOutOfData,
    NoPartner,
    WindowTooSmall,
)

GAMMA_MARGIN = 1e-8
ALPHA_SEPARATION = 1e-12
NULL_RTOL = 1e-9
MIN_NULL_GAP = 1e6
MAX_NORMAL_COND = 1e12


class Variant(str, Enum):
    CORRECTED = "corrected"
    PRINTED = "printed"


def _cj(x) -> list[float]:
    x = complex(x)
    return [x.real, x.imag]


def _seq_json(s: Seq) -> dict:
    return {"lo": s.window.lo, "values": [_cj(x) for x in s.values]}


def _seq_from_json(d: dict) -> Seq:
    arr = np.array(d["values"], dtype=float).reshape(-1, 2)
    return Seq.from_list(int(d["lo"]), arr[:, 0] + 1j * arr[:, 1])


@dataclass(frozen=True)
class InverseData:
    lattice: LatticeSpec
    gamma: Seq
    v: Seq
    alpha0: tuple[complex, complex]
    c_sum: complex = 0j

    def __post_init__(self):
        if self.gamma.window.lo != 0:
            raise IndexOutOfData("gamma must be indexed from 0")
        if self.v.window != self.gamma.window:
            raise IndexOutOfData("gamma and v must share a window")
        a1, a2 = (complex(a) for a in self.alpha0)
        object.__setattr__(self, "alpha0", (a1, a2))
        object.__setattr__(self, "c_sum", complex(self.c_sum))
        _check_alpha(a1, a2, 0)

    @property
    def n_sites(self) -> int:
        return self.gamma.window.size

    def gamma_pair(self, n: int) -> tuple[complex, complex]:
        g = complex(self.gamma[n])
        return g, self.c_sum - g

    def check_nondegenerate(self, upto: int | None = None) -> None:
        """Raise DegenerateGamma if a zeta/wp argument used up to site ``upto`` hits the lattice."""
        upto = self.n_sites - 1 if upto is None else upto
        L = self.lattice
        for n in range(upto + 1):
            g1, g2 = self.gamma_pair(n)
            args = {"gamma_n": g1, "gamma_1n - gamma_2n": g1 - g2}
            if n + 1 <= upto:
                h1, h2 = self.gamma_pair(n + 1)
                args.update({
                    "gamma_{n+1}": h1,
                    "gamma_{n+1} - gamma_n": h1 - g1,
                    "gamma_{n+1} + gamma_n": h1 - g2,
                })
            for name, x in args.items():
                if ell.lattice_distance(L, x) <= GAMMA_MARGIN:
                    raise DegenerateGamma(f"{name} at n={n} is within {GAMMA_MARGIN} of the lattice")

    def to_json(self) -> dict:
        return {
            "lattice": self.lattice.to_json(),
            "gamma": _seq_json(self.gamma),
            "v": _seq_json(self.v),
            "alpha0": [_cj(a) for a in self.alpha0],
            "c_sum": _cj(self.c_sum),
        }

    @classmethod
    def from_json(cls, d: dict) -> InverseData:
        L = ell.make_lattice(complex(*d["lattice"]["omega1"]), complex(*d["lattice"]["omega2"]))
        a = [complex(*x) for x in d["alpha0"]]
        return cls(L, _seq_from_json(d["gamma"]), _seq_from_json(d["v"]), (a[0], a[1]), complex(*d["c_sum"]))


@dataclass(frozen=True)
class DerivedCoefficients:
    alpha1: Seq
    alpha2: Seq
    b: Seq
    c_coeff: Seq
    u: Seq
    kappa: Seq
    valid_window: Window
    variant: Variant = Variant.CORRECTED

    def to_json(self) -> dict:
        return {
            "variant": self.variant.value,
            "alpha1": _seq_json(self.alpha1),
            "alpha2": _seq_json(self.alpha2),
            "b": _seq_json(self.b),
            "c": _seq_json(self.c_coeff),
            "u": _seq_json(self.u),
            "kappa": _seq_json(self.kappa),
            "valid_window": self.valid_window.to_json(),
        }


def _check_alpha(a1: complex, a2: complex, n: int) -> None:
    if abs(a1 - a2) < ALPHA_SEPARATION * max(abs(a1), 1.0):
        raise AlphaCollision(f"alpha_1 and alpha_2 collide at n={n}")


def _zeta(L, x, what: str) -> complex:
    if ell.lattice_distance(L, x) <= GAMMA_MARGIN:
        raise DegenerateGamma(f"zeta argument {what} lies on the lattice")
    return complex(ell.zeta(L, x))


def _wp(L, x, what: str) -> complex:
    if ell.lattice_distance(L, x) <= GAMMA_MARGIN:
        raise DegenerateGamma(f"wp argument {what} lies on the lattice")
    return complex(ell.wp(L, x))


def _need(d: InverseData, *sites: int) -> None:
    for m in sites:
        if m < 0 or m >= d.n_sites:
            raise IndexOutOfData(f"site {m} outside data window [0, {d.n_sites - 1}]")


# --------------------------------------------------------- transfer-matrix pieces


@dataclass(frozen=True)
class _ChiData:
    """Residue weights of chi_n: B_n = zeta(z) + D1 zeta(z - g1) + D2 zeta(z - g2) + beta0."""

    g1: complex
    g2: complex
    D1: complex
    D2: complex
    E: complex  # residue of A_n at g1
    beta0: complex


def _chi_parts(L: LatticeSpec, g1: complex, g2: complex, v_next: complex, a1: complex, a2: complex) -> _ChiData:
    den = a1 - a2
    D1, D2 = a2 / den, -a1 / den
    beta0 = -v_next + D1 * _zeta(L, g1, "gamma_1n") + D2 * _zeta(L, g2, "gamma_2n")
    return _ChiData(g1, g2, D1, D2, a1 * a2 / den, beta0)


def _chi_data(d: InverseData, a1: complex, a2: complex, n: int) -> _ChiData:
    _need(d, n + 1)
    _check_alpha(a1, a2, n)
    g1, g2 = d.gamma_pair(n)
    return _chi_parts(d.lattice, g1, g2, complex(d.v[n + 1]), a1, a2)


def _B(L: LatticeSpec, ch: _ChiData, z: complex) -> complex:
    return (
        _zeta(L, z, "z")
        + ch.D1 * _zeta(L, z - ch.g1, "z - gamma_1n")
        + ch.D2 * _zeta(L, z - ch.g2, "z - gamma_2n")
        + ch.beta0
    )


def _c_next(L: LatticeSpec, ch: _ChiData, h1: complex) -> complex:
    """-A_n(0) given the next Tyurin point h1."""
    return ch.E * (
        _zeta(L, h1 - ch.g1, "gamma_1,n+1 - gamma_1n")
        - _zeta(L, h1 - ch.g2, "gamma_1,n+1 - gamma_2n")
        + _zeta(L, ch.g1, "gamma_1n")
        - _zeta(L, ch.g2, "gamma_2n")
    )


# ----------------------------------------------------------------- formulas


def alpha_recursion(d: InverseData, upto: int, variant: Variant = Variant.CORRECTED) -> tuple[Seq, Seq]:
    """alpha_{s,n} for n = 0..upto, seeded from ``d.alpha0``."""
    variant = Variant(variant)
    _need(d, upto)
    L = d.lattice
    a1 = np.zeros(upto + 1, dtype=complex)
    a2 = np.zeros(upto + 1, dtype=complex)
    a1[0], a2[0] = d.alpha0
    for n in range(upto):
        _check_alpha(a1[n], a2[n], n)
        if variant is Variant.CORRECTED:
            ch = _chi_data(d, a1[n], a2[n], n)
            h1, h2 = d.gamma_pair(n + 1)
            a1[n + 1] = -_B(L, ch, h1)
            a2[n + 1] = -_B(L, ch, h2)
        else:
            g, h = complex(d.gamma[n]), complex(d.gamma[n + 1])
            den = a1[n] - a2[n]
            br = (
                _zeta(L, h, "gamma_{n+1}")
                + a1[n] / den * _zeta(L, h - g, "gamma_{n+1} - gamma_n")
                + a2[n] / den * _zeta(L, h + g, "gamma_{n+1} + gamma_n")
            )
            vn = complex(d.v[n + 1])
            a1[n + 1], a2[n + 1] = -vn + br, -vn - br
    _check_alpha(a1[upto], a2[upto], upto)
    return Seq.from_list(0, a1), Seq.from_list(0, a2)


def coeff_c(d: InverseData, alphas: tuple[Seq, Seq], n: int, variant: Variant = Variant.CORRECTED) -> complex:
    """The T^{-1} coefficient c_n of L_2.

    Corrected: ``c_n = -A_{n-1}(0)``, built from the Tyurin data at n-1 and
    the zeros at n.  Printed: the older expression at n (uses n and n+1).
    """
    variant = Variant(variant)
    L = d.lattice
    if variant is Variant.CORRECTED:
        m = n - 1
        _need(d, m, n)
        a1, a2 = complex(alphas[0][m]), complex(alphas[1][m])
        ch = _chi_data(d, a1, a2, m)
        return _c_next(L, ch, d.gamma_pair(n)[0])
    _need(d, n, n + 1)
    a1, a2 = complex(alphas[0][n]), complex(alphas[1][n])
    _check_alpha(a1, a2, n)
    g, h = complex(d.gamma[n]), complex(d.gamma[n + 1])
    br = _zeta(L, h - g, "gamma_{n+1} - gamma_n") - _zeta(L, h + g, "gamma_{n+1} + gamma_n") + 2 * _zeta(L, g, "gamma_n")
    return br / (a1 - a2)


def coeff_b(d: InverseData, n: int) -> complex:
    """The printed b_n, reading its bracket as wp(g_{n+1}+g_n) - wp(g_{n+1}-g_n)."""
    _need(d, n, n + 1)
    L = d.lattice
    g, h = complex(d.gamma[n]), complex(d.gamma[n + 1])
    for name, x in (("gamma_n", g), ("gamma_{n+1} + gamma_n", h + g), ("gamma_{n+1} - gamma_n", h - g)):
        if ell.lattice_distance(L, x) <= GAMMA_MARGIN:
            raise DegenerateGamma(f"{name} lies on the lattice")
    dp_plus, dp_minus = complex(ell.wp_prime(L, h + g)), complex(ell.wp_prime(L, h - g))
    den = dp_plus - dp_minus
    if abs(den) <= ALPHA_SEPARATION * max(abs(dp_plus), abs(dp_minus), 1.0):
        raise DenominatorCollision(f"wp'(g_(n+1)+g_n) = wp'(g_(n+1)-g_n) at n={n}")
    num = complex(ell.wp(L, h + g)) - complex(ell.wp(L, h - g))
    return 2 * complex(ell.wp_prime(L, g)) * num / den


def kappa_closed(d: InverseData, alphas: tuple[Seq, Seq], n: int) -> complex:
    """Coefficient of z in B_n: -(D1 wp(gamma_1n) + D2 wp(gamma_2n)); equals wp(gamma_n) when c_sum = 0."""
    _need(d, n, n + 1)
    ch = _chi_data(d, complex(alphas[0][n]), complex(alphas[1][n]), n)
    L = d.lattice
    return -(ch.D1 * _wp(L, ch.g1, "gamma_1n") + ch.D2 * _wp(L, ch.g2, "gamma_2n"))


def potential_u(d: InverseData, n: int, variant: Variant = Variant.CORRECTED) -> complex:
    """Diagonal term u_n of L_wp = L_2^2 + u."""
    variant = Variant(variant)
    L = d.lattice
    if variant is Variant.CORRECTED:
        _require_symmetric(d)
        _need(d, n - 1, n)
        return -(_wp(L, complex(d.gamma[n]), "gamma_n") + _wp(L, complex(d.gamma[n - 1]), "gamma_{n-1}"))
    _need(d, n - 2, n)
    g1, g2 = complex(d.gamma[n - 1]), complex(d.gamma[n - 2])
    return -(_wp(L, g1, "gamma_{n-1}") + _wp(L, g2, "gamma_{n-2}")) + coeff_b(d, n - 1) + coeff_b(d, n - 2)


def _require_symmetric(d: InverseData) -> None:
    if abs(d.c_sum) > 0:
        raise ValueError("the closed-form L_lambda needs c_sum = 0")


def derive(d: InverseData, variant: Variant = Variant.CORRECTED) -> DerivedCoefficients:
    """All coefficient sequences on the data window; unavailable sites hold NaN."""
    variant = Variant(variant)
    N = d.n_sites
    if N < 4:
        raise WindowTooSmall("need at least 4 sites")
    d.check_nondegenerate()
    al = alpha_recursion(d, N - 1, variant)
    nan = np.full(N, np.nan + 0j)
    b, c, u, kap = nan.copy(), nan.copy(), nan.copy(), nan.copy()
    for n in range(N - 1):
        b[n] = coeff_b(d, n)
    if variant is Variant.CORRECTED:
        for n in range(1, N):
            c[n] = coeff_c(d, al, n, variant)
        for n in range(N - 1):
            kap[n] = kappa_closed(d, al, n)
        if d.c_sum == 0:
            for n in range(1, N):
                u[n] = potential_u(d, n, variant)
        valid = Window(1, N - 1)
    else:
        for n in range(N - 1):
            c[n] = coeff_c(d, al, n, variant)
        for n in range(2, N):
            u[n] = potential_u(d, n, variant)
        valid = Window(2, N - 2)
    w = Window(0, N - 1)
    return DerivedCoefficients(al[0], al[1], Seq(w, b), Seq(w, c), Seq(w, u), Seq(w, kap), valid, variant)


# ---------------------------------------------------------------- operators


def build_L2(d: InverseData, derived: DerivedCoefficients | None = None) -> BandedOp:
    """L_2 = T + v_n + c_n T^{-1} on the sites where c_n is defined."""
    derived = derive(d) if derived is None else derived
    w = d.gamma.window
    vw = derived.valid_window
    c = np.where(np.isnan(derived.c_coeff.values), 0, derived.c_coeff.values)
    return from_bands(w, {1: 1.0, 0: d.v.values, -1: c}, vw)


def build_Llambda(d: InverseData, derived: DerivedCoefficients | None = None) -> BandedOp:
    """L_lambda = L_2^2 + u, bands (2, 2)."""
    _require_symmetric(d)
    derived = derive(d) if derived is None else derived
    L2 = build_L2(d, derived)
    sq = compose(L2, L2)
    u = np.where(np.isnan(derived.u.values), 0, derived.u.values)
    U = restrict_valid(diag(Seq(d.gamma.window, u)), sq.valid)
    return lincomb([(1.0, sq), (1.0, U)])


# ------------------------------------------------------- commuting partner


def commutant_matrix(L4: BandedOp, m_lower: int = 3, n_upper: int = 3):
    """Matrix of X -> [L4, X] for band-(M, N) operators X.

    Equations live on the interior I = L4.valid shrunk by (M, N); the
    unknown coefficients of X live on I widened by L4's bandwidths, which
    is exactly the set of sites the commutator on I reads.
    Returns (A, I, Wx) with unknowns ordered band-major.
    """
    V = L4.valid
    ml, nl = L4.m_lower, L4.n_upper
    I = Window(V.lo + m_lower, V.hi - n_upper)
    Wx = Window(I.lo - ml, I.hi + nl)
    if not L4.window.covers(Wx):
        raise WindowTooSmall("partner window leaves the storage window")
    nb = m_lower + n_upper + 1
    r0, r1 = -(m_lower + ml), n_upper + nl
    A = np.zeros(((r1 - r0 + 1) * I.size, nb * Wx.size), dtype=complex)
    ms = I.sites()
    base = L4.window.lo

    def row(r):
        return (r - r0) * I.size + np.arange(I.size)

    def col(p, sites):
        return (p + m_lower) * Wx.size + (sites - Wx.lo)

    for q in L4.bands:
        for p in range(-m_lower, n_upper + 1):
            # (L4 X)_{q+p, n} = l_{q,n} x_{p,n+q};  (X L4)_{p+q, n} = x_{p,n} l_{q,n+p}
            A[row(q + p), col(p, ms + q)] += L4.band(q)[ms - base]
            A[row(p + q), col(p, ms)] -= L4.band(q)[ms + p - base]
    return A, I, Wx


def _equilibrate(A: np.ndarray, sweeps: int = 5):
    """Alternate column/row 2-norm scaling; returns (scaled A, column scales)."""
    cs = np.ones(A.shape[1])
    for _ in range(sweeps):
        cn = np.linalg.norm(A, axis=0)
        cn[cn == 0] = 1
        A = A / cn
        cs = cs * cn
        rn = np.linalg.norm(A, axis=1)
        rn[rn == 0] = 1
        A = A / rn[:, None]
    return A, cs


@dataclass
class CommutantResult:
    basis_dim: int
    L6: BandedOp
    singular_values: np.ndarray = field(repr=False)
    gap: float
    residual: float
    interior: Window
    basis: list[BandedOp] = field(repr=False, default_factory=list)

    def to_json(self) -> dict:
        return {
            "basis_dim": self.basis_dim,
            "gap": self.gap,
            "residual": self.residual,
            "interior": self.interior.to_json(),
            "smallest_singular_values": [float(s) for s in self.singular_values[-8:]],
        }


def _op_from_vector(L4: BandedOp, x: np.ndarray, Wx: Window, ml: int, nu: int) -> BandedOp:
    w = L4.window
    c = np.zeros((ml + nu + 1, w.size), dtype=complex)
    i0 = Wx.lo - w.lo
    c[:, i0 : i0 + Wx.size] = x.reshape(ml + nu + 1, Wx.size)
    return BandedOp(w, ml, nu, c, Wx)


def _vec(op: BandedOp, sub: Window, m_lower: int, n_upper: int) -> np.ndarray:
    """Coefficients of bands -m_lower..n_upper on ``sub`` as a flat vector."""
    i0 = sub.lo - op.window.lo
    return np.concatenate([op.band(p)[i0 : i0 + sub.size] for p in range(-m_lower, n_upper + 1)])


def _commutator_rel(A: BandedOp, B: BandedOp) -> tuple[float, Window]:
    from .diffop import band_residual_norm, commutator

    C = commutator(A, B)
    return band_residual_norm(C) / (A.scale_estimate() * B.scale_estimate()), C.valid


def _commutant_svd(L4: BandedOp, M: int, N: int, rtol: float):
    A, I, Wx = commutant_matrix(L4, M, N)
    if I.size < 12:
        raise WindowTooSmall(f"interior has {I.size} sites, need at least 12")
    As, cs = _equilibrate(A)
    _, s, vh = np.linalg.svd(As)
    s_full = np.zeros(As.shape[1])
    s_full[: len(s)] = s
    null = s_full <= rtol * s_full[0]
    dim = int(null.sum())
    kept = s_full[~null]
    gap = float(kept[-1] / max(s_full[null][0], 1e-300)) if dim and len(kept) else float("inf")
    return dim, gap, s_full, vh, cs, I, Wx


def commutant_nullity(L4: BandedOp, bands: tuple[int, int] = (3, 3), rtol: float = NULL_RTOL) -> tuple[int, float]:
    """(dimension, singular-value gap) of the band-(M, N) commutant of L4."""
    dim, gap, *_ = _commutant_svd(L4, *bands, rtol)
    return dim, gap


def find_commuting_partner(L4: BandedOp, bands: tuple[int, int] = (3, 3), rtol: float = NULL_RTOL) -> CommutantResult:
    """Numerical commutant of L4 among band-(M, N) operators and a normalized L6."""
    M, N = bands
    dim, gap, s_full, vh, cs, I, Wx = _commutant_svd(L4, M, N, rtol)
    if dim < 3:
        raise NoPartner(f"commutant dimension {dim} < 3")
    vecs = vh[-dim:].conj().T / cs[:, None]
    basis = [_op_from_vector(L4, vecs[:, i], Wx, M, N) for i in range(dim)]
    L6 = _normalize_partner(L4, basis, M, N)
    res, _ = _commutator_rel(L4, L6)
    return CommutantResult(dim, L6, s_full, gap, res, I, basis)


def _normalize_partner(L4: BandedOp, basis: list[BandedOp], M: int, N: int) -> BandedOp:
    """Top band -2, then strip the L4 and identity parts by completing the square.

    Fits L6^2 - 4 L4^3 ~ a L4^2 + b L4 L6 + c L6 + d L4 + e and returns
    L6 - (b/2) L4 - c/2, whose square has no L4 L6 or L6 terms.
    """
    V = basis[0].valid
    top = np.stack([op.band(N)[V.lo - op.window.lo : V.hi + 1 - op.window.lo] for op in basis], axis=1)
    x, *_ = np.linalg.lstsq(top, np.full(V.size, -2.0 + 0j), rcond=None)
    L6 = lincomb([(complex(xi), op) for xi, op in zip(x, basis)])
    L4w = restrict_valid(L4, L4.valid.intersect(L6.valid))
    ident = from_bands(L4.window, {0: 1.0}, L6.valid)
    sq6 = compose(L6, L6)
    L4_2 = compose(L4, L4)
    L4_3 = compose(L4_2, L4)
    L46 = compose(L4w, L6)
    sub = sq6.valid.intersect(L4_3.valid).intersect(L46.valid)
    K = 2 * max(M, N)
    y = _vec(sq6, sub, K, K) - 4 * _vec(L4_3, sub, K, K)
    cols = [_vec(op, sub, K, K) for op in (L4_2, L46, L6, L4w, ident)]
    Amat = np.stack(cols, axis=1)
    sc = np.linalg.norm(Amat, axis=0)
    sc[sc == 0] = 1
    coef, *_ = np.linalg.lstsq(Amat / sc, y, rcond=None)
    coef = coef / sc
    return lincomb([(1.0, L6), (-coef[1] / 2, L4w), (-coef[2] / 2, ident)])


@dataclass(frozen=True)
class CurveFit:
    g2_hat: complex
    g3_hat: complex
    residual: float
    condition: float

    def to_json(self) -> dict:
        return {"g2_hat": _cj(self.g2_hat), "g3_hat": _cj(self.g3_hat), "residual": self.residual, "condition": self.condition}


def fit_spectral_curve(L4: BandedOp, L6: BandedOp) -> CurveFit:
    """Least squares for L6^2 = 4 L4^3 - g2 L4 - g3 over interior coefficients."""
    sq6 = compose(L6, L6)
    L4_3 = compose(compose(L4, L4), L4)
    sub = sq6.valid.intersect(L4_3.valid)
    K = max(sq6.m_lower, sq6.n_upper, L4_3.m_lower, L4_3.n_upper)
    lhs = _vec(sq6, sub, K, K)
    y = lhs - 4 * _vec(L4_3, sub, K, K)
    ident = from_bands(L4.window, {0: 1.0}, sub)
    A = np.stack([-_vec(L4, sub, K, K), -_vec(ident, sub, K, K)], axis=1)
    sc = np.linalg.norm(A, axis=0)
    if np.any(sc == 0):
        raise IllConditionedFit("a fit column vanishes")
    An = A / sc
    cond = float(np.linalg.cond(An.conj().T @ An))
    if not np.isfinite(cond) or cond > MAX_NORMAL_COND:
        raise IllConditionedFit(f"normal-system condition {cond:.3g} exceeds {MAX_NORMAL_COND:g}")
    x, *_ = np.linalg.lstsq(An, y, rcond=None)
    g2, g3 = x / sc
    res = float(np.linalg.norm(An @ x - y) / max(np.linalg.norm(lhs), 1e-300))
    return CurveFit(complex(g2), complex(g3), res, cond)


# ------------------------------------------------------------ data generator


def generate_inverse_data(
    lattice: LatticeSpec,
    n_sites: int,
    seed: int,
    center: complex = 0.5 + 0.5j,
    radius: float = 0.2,
    v_scale: float = 0.3,
    alpha0: Sequence[complex] = (0.7, -0.4),
    margin: float = 1e-2,
    wp_sep: float | None = 0.5,
    x_max: float | None = 10.0,
    max_tries: int = 2000,
) -> InverseData:
    """gamma_n = center + radius*eps_n, v_n = v_scale*eps'_n with complex normal eps.

    The pair (gamma_n, v_n) is redrawn when

    * a zeta/wp argument comes within ``margin`` (shortest-period units)
      of the lattice;
    * |wp(gamma_n) - wp(gamma_{n-1})| < ``wp_sep``;
    * |X_n| > ``x_max`` where X_n = wp'(gamma_n)(a1 + a2)/(a1 - a2).

    Along the alpha recursion X_n changes sign and gains
    2 v_n (wp(gamma_n) - wp(gamma_{n-1})) at each step, and
    c_{n+1} = (X_n^2 - wp'(gamma_n)^2) / (4 dwp_n dwp_{n+1}).  The two
    extra tests therefore bound |c_n|; unbounded drift makes later fits
    lose digits roughly as max|c|^2.
    """
    rng = np.random.default_rng(seed)

    def cnorm():
        return complex(rng.normal(), rng.normal())

    a0 = (complex(alpha0[0]), complex(alpha0[1]))
    _check_alpha(*a0, 0)
    gam = np.empty(n_sites, dtype=complex)
    v = np.empty(n_sites, dtype=complex)
    a1, a2 = a0
    for n in range(n_sites):
        for _ in range(max_tries):
            g = center + radius * cnorm()
            vn = v_scale * cnorm()
            pts = [g, 2 * g]
            if n > 0:
                pts += [g - gam[n - 1], g + gam[n - 1]]
            if min(ell.lattice_distance(lattice, p) for p in pts) <= margin:
                continue
            if n == 0:
                b1, b2 = a1, a2
            else:
                if wp_sep is not None and abs(complex(ell.wp(lattice, g)) - complex(ell.wp(lattice, gam[n - 1]))) < wp_sep:
                    continue
                ch = _chi_parts(lattice, gam[n - 1], -gam[n - 1], vn, a1, a2)
                b1, b2 = -_B(lattice, ch, g), -_B(lattice, ch, -g)
                if abs(b1 - b2) < 1e-6 * max(abs(b1), 1.0):
                    continue
            X = complex(ell.wp_prime(lattice, g)) * (b1 + b2) / (b1 - b2)
            if x_max is not None and abs(X) > x_max:
                continue
            a1, a2 = b1, b2
            break
        else:
            raise DegenerateGamma(f"could not draw an admissible gamma at n={n}")
        gam[n], v[n] = g, vn
    w = Window(0, n_sites - 1)
    return InverseData(lattice, Seq(w, gam), Seq(w, v), a0, 0j)
