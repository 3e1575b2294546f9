"""Genus-one, rank-two Baker-Akhiezer functions.

``psi_n`` is a row 2-vector of elliptic functions with simple poles at a
fixed pair of points ``gamma_1, gamma_2`` (residues tied by the ratios
``alpha_s``) and a pole at the origin whose order is dictated by the
background matrix ``Psi0_n``.  It is found by solving a small linear system
over an explicit Riemann-Roch basis: residue rows plus Laurent matching of
``psi_n * Psi0_n^{-1}`` against ``eta0 + O(k^{-1})`` with ``k = 1/z``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from . import elliptic as ell
from .diffop import BandedOp, Window, band_residual_norm
from .elliptic import LatticeSpec, LaurentJet
from .errors import (
    DegenerateGamma,
    IndexOutOfData,
    InsufficientJetOrder,
    NonGenericData,
    PoleAtLatticePoint,
    RankDeficientFit,
    SingularPsiHat,
    WindowTooSmall,
    ZeroCountMismatch,
)

EPS = np.finfo(float).eps
# solve_ba is declared non-generic past these thresholds
MAX_SOLVE_RESIDUAL = 1e-8
MIN_UNIQUENESS_GAP = 1.0


# ------------------------------------------------------- polynomial matrices


@dataclass(frozen=True)
class PolyMatrix:
    """l x l matrix of polynomials in k; ``coeffs[i, j, d]`` multiplies k^d."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        deg = c.shape[2] - 1
        while deg > 0 and not np.any(c[:, :, deg]):
            deg -= 1
        object.__setattr__(self, "coeffs", c[:, :, : deg + 1])

    @property
    def size(self) -> int:
        return self.coeffs.shape[0]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[2] - 1

    def entry_degree(self, i: int, j: int) -> int:
        nz = np.nonzero(self.coeffs[i, j])[0]
        return int(nz[-1]) if len(nz) else -1

    def column_degrees(self) -> list[int]:
        return [max(0, max(self.entry_degree(i, j) for i in range(self.size))) for j in range(self.size)]

    def __matmul__(self, other: PolyMatrix) -> PolyMatrix:
        a, b = self.coeffs, other.coeffs
        out = np.zeros((a.shape[0], b.shape[1], a.shape[2] + b.shape[2] - 1), dtype=complex)
        for i in range(a.shape[0]):
            for j in range(b.shape[1]):
                for m in range(a.shape[1]):
                    out[i, j] += np.convolve(a[i, m], b[m, j])
        return PolyMatrix(out)

    def __call__(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=complex)
        acc = np.zeros(self.coeffs.shape[:2] + k.shape, dtype=complex)
        for d in range(self.degree, -1, -1):
            acc = acc * k + self.coeffs[:, :, d].reshape(self.coeffs.shape[:2] + (1,) * k.ndim)
        return acc

    def det2(self) -> np.ndarray:
        c = self.coeffs
        return np.polysub(
            np.convolve(c[0, 0][::-1], c[1, 1][::-1]), np.convolve(c[0, 1][::-1], c[1, 0][::-1])
        )[::-1]

    def adjugate2(self) -> PolyMatrix:
        c = self.coeffs
        return PolyMatrix(np.array([[c[1, 1], -c[0, 1]], [-c[1, 0], c[0, 0]]]))

    def jet(self, i: int, j: int, hi: int) -> LaurentJet:
        """Entry (i, j) as a Laurent jet in z = 1/k, exact through z^hi."""
        d = self.degree
        out = np.zeros(d + hi + 1, dtype=complex)
        out[: d + 1] = self.coeffs[i, j][::-1]
        return LaurentJet(-d, out, hi)

    def to_json(self) -> list:
        return [[[[float(x.real), float(x.imag)] for x in self.coeffs[i, j]] for j in range(self.size)] for i in range(self.size)]


def chi0_matrix(c_next: complex, v_next: complex) -> PolyMatrix:
    """[[0, 1], [-c_{m+1}, k - v_{m+1}]]."""
    m = np.zeros((2, 2, 2), dtype=complex)
    m[0, 1, 0] = 1
    m[1, 0, 0] = -c_next
    m[1, 1, 0] = -v_next
    m[1, 1, 1] = 1
    return PolyMatrix(m)


def background_product(c: Sequence[complex], v: Sequence[complex], n: int) -> PolyMatrix:
    """Psi0_n = chi0_{n-1} ... chi0_0 with chi0_m built from (c[m+1], v[m+1])."""
    if n < 0:
        raise IndexOutOfData("n must be non-negative")
    if n > 0 and (len(c) < n + 1 or len(v) < n + 1):
        raise IndexOutOfData(f"background needs c, v through index {n}")
    P = PolyMatrix(np.eye(2, dtype=complex)[:, :, None])
    for m in range(n):
        P = chi0_matrix(c[m + 1], v[m + 1]) @ P
    return P


# ----------------------------------------------------------- Riemann-Roch


@dataclass(frozen=True)
class BasisFunction:
    name: str
    pole_order: int
    residues: tuple[complex, complex]  # at gamma_1, gamma_2
    evaluate: Callable = field(repr=False)
    jet_fn: Callable[[int], LaurentJet] = field(repr=False)


@dataclass(frozen=True)
class RRBasis:
    lattice: LatticeSpec
    gamma_pair: tuple[complex, complex]
    d: int
    elements: tuple[BasisFunction, ...]

    def evaluate(self, coeffs, z) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros_like(z)
        for c, e in zip(coeffs, self.elements):
            if c != 0:
                out = out + c * e.evaluate(z)
        return out


def _power_jet(j: LaurentJet, p: int, hi: int) -> LaurentJet:
    out = LaurentJet(0, np.r_[1.0, np.zeros(hi)], hi)
    for _ in range(p):
        out = out * j
    return out


def rr_basis(L: LatticeSpec, g1: complex, g2: complex, d: int) -> RRBasis:
    """Basis of functions with at most simple poles at g1, g2 and a pole of order <= d at 0."""
    for name, x in (("gamma_1", g1), ("gamma_2", g2), ("gamma_1 - gamma_2", g1 - g2)):
        if ell.lattice_distance(L, x) <= 1e-8:
            raise DegenerateGamma(f"{name} lies on the lattice")
    if d < 0:
        raise ValueError("pole order must be non-negative")

    def G(z):
        return ell.zeta(L, z - g1) - ell.zeta(L, z - g2)

    def G_jet(hi):
        return LaurentJet(0, ell.taylor_zeta(L, -g1, hi) - ell.taylor_zeta(L, -g2, hi), hi)

    def h1(z):
        return ell.zeta(L, z - g1) - ell.zeta(L, z)

    elems = [
        BasisFunction("1", 0, (0j, 0j), lambda z: np.ones_like(np.asarray(z, dtype=complex)), lambda hi: LaurentJet(0, np.r_[1.0, np.zeros(hi)], hi)),
        BasisFunction("G", 0, (1 + 0j, -1 + 0j), G, G_jet),
    ]
    if d >= 1:
        elems.append(BasisFunction("h1", 1, (1 + 0j, 0j), h1, lambda hi: ell.laurent_at_origin(L, "H_GAMMA", hi, gamma=g1)))
    for m in range(2, d + 1):
        a, b = (m // 2, 0) if m % 2 == 0 else ((m - 3) // 2, 1)

        def f(z, a=a, b=b):
            z = np.asarray(z, dtype=complex)
            out = ell.wp(L, z) ** a
            return out * ell.wp_prime(L, z) if b else out

        def fj(hi, a=a, b=b):
            need = hi + 2 * a + 3 * b + 2
            wpj = ell.laurent_at_origin(L, "WP", need)
            out = _power_jet(wpj, a, need)
            if b:
                out = out * ell.laurent_at_origin(L, "WP_PRIME", need)
            return out.truncate(hi)

        name = "*".join(["wp"] * a + ["wp'"] * b)
        elems.append(BasisFunction(name, m, (0j, 0j), f, fj))
    return RRBasis(L, (complex(g1), complex(g2)), d, tuple(elems))


# ------------------------------------------------------------------- solve


@dataclass
class BAFunction:
    n: int
    lattice: LatticeSpec
    bases: tuple[RRBasis, RRBasis]
    components: tuple[np.ndarray, np.ndarray]
    eta: np.ndarray  # shape (K+1, 2): eta[p] multiplies k^{-p}
    solve_residual: float
    uniqueness_gap: float
    background: PolyMatrix
    eta0: np.ndarray
    # background sequences (c, v) the solve was built from; the transfer
    # matrix jets need the factors chi0_n and chi0_{n+1}
    bg_c: np.ndarray = field(default=None, repr=False)
    bg_v: np.ndarray = field(default=None, repr=False)

    def __call__(self, z) -> np.ndarray:
        """Values of (psi^1, psi^2) at z; shape (2,) + z.shape."""
        return np.stack([b.evaluate(c, z) for b, c in zip(self.bases, self.components)])

    def component_jets(self, hi: int) -> list[LaurentJet]:
        out = []
        for b, coeffs in zip(self.bases, self.components):
            acc = LaurentJet(-b.d, np.zeros(hi + b.d + 1), hi)
            for c, e in zip(coeffs, b.elements):
                acc = acc + c * e.jet_fn(hi)
            out.append(acc)
        return out

    def residues(self) -> np.ndarray:
        """res_{gamma_s} psi^i as array [s, i]."""
        r = np.zeros((2, 2), dtype=complex)
        for i, (b, coeffs) in enumerate(zip(self.bases, self.components)):
            for c, e in zip(coeffs, b.elements):
                r[:, i] += c * np.array(e.residues)
        return r

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "eta": [[[float(x.real), float(x.imag)] for x in row] for row in self.eta],
            "components": [[[float(x.real), float(x.imag)] for x in c] for c in self.components],
            "solve_residual": self.solve_residual,
            "uniqueness_gap": self.uniqueness_gap,
        }


def _matched_jets(basis_jets, adj: PolyMatrix, det: complex, hi: int):
    """Jet of e_b * adj[i, j] / det for every component i, element b, column j."""
    out = []
    for i, jets in enumerate(basis_jets):
        row = []
        for jb in jets:
            row.append([(jb * adj.jet(i, j, hi + adj.degree - jb.lo + 1)).truncate(hi) * (1 / det) for j in range(2)])
        out.append(row)
    return out


def solve_ba_raw(
    L: LatticeSpec,
    gammas: tuple[complex, complex],
    alphas: tuple[complex, complex],
    c: Sequence[complex],
    v: Sequence[complex],
    n: int,
    eta0=(0.0, 1.0),
    K_tail: int | None = None,
    K_eta: int | None = None,
) -> BAFunction:
    """Solve for psi_n given the background sequences c, v (indices 0..)."""
    eta0 = np.asarray(eta0, dtype=complex)
    P = background_product(c, v, n)
    d1, d2 = P.column_degrees()
    dmax = max(d1, d2)
    K_tail = dmax + 8 if K_tail is None else K_tail
    K_eta = dmax + 8 if K_eta is None else K_eta
    if K_tail < dmax:
        raise InsufficientJetOrder("K_tail below the pole order of the background")
    bases = (rr_basis(L, *gammas, d1), rr_basis(L, *gammas, d2))
    adj = P.adjugate2()
    det_poly = P.det2()
    det = complex(det_poly[0])
    if len(det_poly) > 1 and np.any(np.abs(det_poly[1:]) > 1e-12 * abs(det)):
        raise NonGenericData("background determinant depends on k")
    if det == 0:
        raise NonGenericData("background determinant vanishes")
    hi = K_eta
    jet_hi = hi + adj.degree + 2
    basis_jets = [[e.jet_fn(jet_hi) for e in b.elements] for b in bases]
    mj = _matched_jets(basis_jets, adj, det, hi)

    sizes = [len(b.elements) for b in bases]
    nunk = sum(sizes)
    offs = [0, sizes[0]]
    rows, rhs = [], []
    # residue rows: res psi^2 = alpha_s res psi^1
    for s in range(2):
        r = np.zeros(nunk, dtype=complex)
        for b_i, e in enumerate(bases[1].elements):
            r[offs[1] + b_i] += e.residues[s]
        for b_i, e in enumerate(bases[0].elements):
            r[offs[0] + b_i] -= alphas[s] * e.residues[s]
        rows.append(r)
        rhs.append(0j)
    # matching rows: coefficient of z^m (m = -K_tail .. 0) of (psi Psi0^{-1})_j
    lo_all = min(mj[i][b][j].lo for i in range(2) for b in range(sizes[i]) for j in range(2))
    for j in range(2):
        for m in range(max(-K_tail, lo_all), 1):
            r = np.zeros(nunk, dtype=complex)
            for i in range(2):
                for b_i in range(sizes[i]):
                    r[offs[i] + b_i] = mj[i][b_i][j].coeff(m)
            if np.any(r):
                rows.append(r)
                rhs.append(eta0[j] if m == 0 else 0j)
    A = np.array(rows)
    y = np.array(rhs)
    # equilibrate rows then columns
    rs = np.linalg.norm(A, axis=1)
    rs[rs == 0] = 1
    A1 = A / rs[:, None]
    y1 = y / rs
    cs = np.linalg.norm(A1, axis=0)
    cs[cs == 0] = 1
    A2 = A1 / cs
    sv = np.linalg.svd(A2, compute_uv=False)
    x2, *_ = np.linalg.lstsq(A2, y1, rcond=None)
    x = x2 / cs
    resid = float(np.linalg.norm(A2 @ x2 - y1) / max(np.linalg.norm(y1), 1e-300))
    if A2.shape[0] < nunk:
        gap = 0.0
    else:
        gap = float(sv[-1] / (sv[0] * EPS * max(A2.shape)))
    # eta_p = coefficient of z^p of psi Psi0^{-1}
    eta = np.zeros((hi + 1, 2), dtype=complex)
    for j in range(2):
        for p in range(hi + 1):
            eta[p, j] = sum(
                x[offs[i] + b_i] * mj[i][b_i][j].coeff(p) for i in range(2) for b_i in range(sizes[i])
            )
    comps = (x[: sizes[0]], x[sizes[0] :])
    ba = BAFunction(n, L, bases, comps, eta, resid, gap, P, eta0, np.asarray(c, dtype=complex), np.asarray(v, dtype=complex))
    if gap < MIN_UNIQUENESS_GAP or resid > MAX_SOLVE_RESIDUAL:
        raise NonGenericData(f"BA solve at n={n}: residual {resid:.3g}, uniqueness gap {gap:.3g}")
    return ba


def background_transfer(d, derived, n: int) -> PolyMatrix:
    """Psi0_n built from the constructed c_n and the chosen v_n."""
    return background_product(derived.c_coeff.values, d.v.values, n)


def solve_ba(d, derived, n: int, eta0=(0.0, 1.0), K_tail: int | None = None) -> BAFunction:
    """psi_n for InverseData ``d``: poles at the site-0 pair, residue ratios alpha0."""
    return solve_ba_raw(
        d.lattice, d.gamma_pair(0), d.alpha0, derived.c_coeff.values, d.v.values, n, eta0, K_tail, K_tail
    )


def solve_family(d, derived, n_max: int, K_tail: int | None = None, pad: int = 0) -> list[BAFunction]:
    """psi_0 .. psi_{n_max}.  ``pad`` adds to the default matching depth of every site."""
    out = []
    for n in range(n_max + 1):
        K = K_tail
        if K is None and pad:
            K = max(background_transfer(d, derived, n).column_degrees()) + 8 + pad
        out.append(solve_ba(d, derived, n, K_tail=K))
    return out


# ------------------------------------------------------ operators from psi


class Fn(str, Enum):
    WP = "WP"
    WP_PRIME = "WP_PRIME"


# band counts (tau(j-1), tau(l-j+1)) with j = 2, l = 2 and tau the pole order
DEFAULT_BANDS = {Fn.WP: (2, 2), Fn.WP_PRIME: (3, 3)}
MAX_FIT_COND = 1e12


def f_values(L: LatticeSpec, f, z) -> np.ndarray:
    f = Fn(f)
    return ell.wp(L, z) if f is Fn.WP else ell.wp_prime(L, z)


def sample_points(L: LatticeSpec, count: int, seed: int, avoid: Sequence[complex] = (), min_dist: float = 0.08) -> np.ndarray:
    """Random points of the fundamental cell kept ``min_dist`` (reduced units) away from 0 and ``avoid`` (mod lattice)."""
    rng = np.random.default_rng(seed)
    w1, w2 = L.periods
    pts = []
    while len(pts) < count:
        z = complex(rng.uniform(-0.5, 0.5) * w1 + rng.uniform(-0.5, 0.5) * w2)
        if all(ell.lattice_distance(L, z - a) > min_dist for a in (0j, *avoid)):
            pts.append(z)
    return np.array(pts)


@dataclass
class OperatorFit:
    op: BandedOp
    site_residuals: np.ndarray  # relative least-squares residual per fitted site
    conditions: np.ndarray

    def to_json(self) -> dict:
        return {
            "op": self.op.to_json(),
            "site_residuals": [float(r) for r in self.site_residuals],
            "conditions": [float(c) for c in self.conditions],
        }


def _family_values(family: Sequence[BAFunction], z) -> tuple[int, np.ndarray]:
    ns = [b.n for b in family]
    if ns != list(range(ns[0], ns[0] + len(ns))):
        raise ValueError("family must cover consecutive sites")
    return ns[0], np.array([b(z) for b in family])  # [site, component, sample]


def fit_operator(family: Sequence[BAFunction], f, samples, bands: tuple[int, int] | None = None) -> OperatorFit:
    """Least-squares L_f with sum_p u_{p,n} psi_{n+p} = f psi_n at every site the family covers."""
    f = Fn(f)
    M, N = DEFAULT_BANDS[f] if bands is None else bands
    zs = np.asarray(samples, dtype=complex)
    if zs.size < 3 * (M + N + 1):
        raise RankDeficientFit(f"need at least {3 * (M + N + 1)} samples, got {zs.size}")
    n0, vals = _family_values(family, zs)
    fz = f_values(family[0].lattice, f, zs)
    window = Window(n0, n0 + len(family) - 1)
    sites = Window(n0 + M, window.hi - N) if len(family) > M + N else None
    if sites is None:
        raise WindowTooSmall("family too short for the requested bands")
    coeffs = np.zeros((M + N + 1, window.size), dtype=complex)
    res, conds = [], []
    for n in sites.sites():
        i = n - n0
        A = np.stack([vals[i + p].ravel() for p in range(-M, N + 1)], axis=1)
        y = (fz[None, :] * vals[i]).ravel()
        rs = np.abs(y) + np.abs(A).sum(axis=1)
        A1, y1 = A / rs[:, None], y / rs
        cs = np.linalg.norm(A1, axis=0)
        A2 = A1 / cs
        sv = np.linalg.svd(A2, compute_uv=False)
        cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
        if not cond <= MAX_FIT_COND:
            raise RankDeficientFit(f"sample matrix at site {n} has condition {cond:.3g}")
        x2, *_ = np.linalg.lstsq(A2, y1, rcond=None)
        coeffs[:, i] = x2 / cs
        res.append(float(np.linalg.norm(A2 @ x2 - y1) / np.linalg.norm(y1)))
        conds.append(cond)
    return OperatorFit(BandedOp(window, M, N, coeffs, sites), np.array(res), np.array(conds))


def site_eigen_residuals(op: BandedOp, family: Sequence[BAFunction], f, samples) -> dict[int, float]:
    """Per-site max over samples of |(L psi)_n - f psi_n| / (1 + |f psi_n|)."""
    zs = np.asarray(samples, dtype=complex)
    n0, vals = _family_values(family, zs)
    fz = f_values(family[0].lattice, f, zs)
    lo = max(op.valid.lo, n0 + op.m_lower)
    hi = min(op.valid.hi, n0 + len(family) - 1 - op.n_upper)
    if hi < lo:
        raise WindowTooSmall("operator stencil does not fit inside the family")
    out = {}
    for n in range(lo, hi + 1):
        i = n - n0
        acc = sum(op.coeff(p, n) * vals[i + p] for p in op.bands)
        rhs = fz[None, :] * vals[i]
        out[n] = float(np.max(np.abs(acc - rhs) / (1 + np.abs(rhs))))
    return out


def eigen_residual(op: BandedOp, family: Sequence[BAFunction], f, samples) -> float:
    """max over sites and samples of |(L psi)_n - f psi_n| / (1 + |f psi_n|)."""
    return max(site_eigen_residuals(op, family, f, samples).values())


# --------------------------------------------------------- transfer matrix

# leading coefficients of the Psi-hat determinant jet below this fraction of
# its largest coefficient are cancellation noise
DET_JET_TOL = 1e-9


def _row_jet(ba: BAFunction, hi: int) -> list[LaurentJet]:
    return [LaurentJet(0, ba.eta[: hi + 1, j], hi) for j in range(2)]


def _row_times(E: list[LaurentJet], P: PolyMatrix, hi: int) -> list[LaurentJet]:
    out = []
    for j in range(2):
        acc = None
        for i in range(2):
            t = (E[i] * P.jet(i, j, hi + P.degree)).truncate(hi - P.degree)
            acc = t if acc is None else acc + t
        out.append(acc)
    return out


@dataclass
class TransferMatrix:
    """chi_n with Psi-hat_{n+1} = chi_n Psi-hat_n; rows of Psi-hat_n are psi_n, psi_{n+1}."""

    n: int
    lattice: LatticeSpec
    psi: tuple[BAFunction, BAFunction, BAFunction] = field(repr=False)
    jet: tuple[tuple[LaurentJet, LaurentJet], tuple[LaurentJet, LaurentJet]] = field(repr=False)

    def psi_hat(self, z, shift: int = 0) -> np.ndarray:
        a, b = self.psi[shift], self.psi[shift + 1]
        return np.stack([a(z), b(z)])  # [row, component, ...]

    def __call__(self, z, rtol: float = 1e-13) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        P = self.psi_hat(z)
        det = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
        scale = np.abs(P[0, 0] * P[1, 1]) + np.abs(P[0, 1] * P[1, 0])
        if np.any(np.abs(det) <= rtol * scale):
            raise SingularPsiHat("det Psi-hat_n vanishes at a requested point")
        top = self.psi[2](z)
        # second row: psi_{n+2} = A psi_n + B psi_{n+1}
        A = (top[0] * P[1, 1] - top[1] * P[1, 0]) / det
        B = (top[1] * P[0, 0] - top[0] * P[0, 1]) / det
        out = np.zeros((2, 2) + z.shape, dtype=complex)
        out[0, 1] = 1
        out[1, 0], out[1, 1] = A, B
        return out

    def det(self, z) -> np.ndarray:
        return -self(z)[1, 0]

    def psi_hat_det(self, z, shift: int = 0) -> np.ndarray:
        P = self.psi_hat(np.asarray(z, dtype=complex), shift)
        return P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]

    def to_json(self) -> dict:
        return {"n": self.n, "jet": [[self.jet[i][j].to_json() for j in range(2)] for i in range(2)]}


def transfer_matrix(psi_n: BAFunction, psi_n1: BAFunction, psi_n2: BAFunction) -> TransferMatrix:
    """chi_n from three consecutive BA functions.

    The second row of chi_n expresses psi_{n+2} in terms of psi_n, psi_{n+1},
    so a third site is needed.  Jets come from the eta expansions: with
    E_n = eta-series of site n, Psi-hat_n = R_n Psi0_n and Psi-hat_{n+1} =
    T_n Psi0_n, hence chi_n = T_n R_n^{-1} with the background cancelled.
    """
    fam = (psi_n, psi_n1, psi_n2)
    n = psi_n.n
    if [b.n for b in fam] != [n, n + 1, n + 2]:
        raise ValueError("transfer_matrix needs sites n, n+1, n+2")
    c, v = psi_n.bg_c, psi_n.bg_v
    if c is None or any(b.bg_c is not c and not np.array_equal(b.bg_c[: n + 3], c[: n + 3]) for b in fam):
        raise ValueError("BA functions come from different backgrounds")
    if len(c) < n + 3:
        raise IndexOutOfData(f"background needs c, v through index {n + 2}")
    K = min(b.eta.shape[0] for b in fam) - 1
    x0 = chi0_matrix(c[n + 1], v[n + 1])
    x1 = chi0_matrix(c[n + 2], v[n + 2])
    E0, E1, E2 = (_row_jet(b, K) for b in fam)
    R = [E0, _row_times(E1, x0, K)]
    T1 = _row_times(E2, x1 @ x0, K)
    det = R[0][0] * R[1][1] - R[0][1] * R[1][0]
    inv = det.reciprocal(DET_JET_TOL)
    A = (T1[0] * R[1][1] - T1[1] * R[1][0]) * inv
    B = (T1[1] * R[0][0] - T1[0] * R[0][1]) * inv
    hi = min(A.hi, B.hi)
    zero = LaurentJet(0, np.zeros(hi + 1), hi)
    one = LaurentJet(0, np.r_[1.0, np.zeros(hi)], hi)
    return TransferMatrix(n, psi_n.lattice, fam, ((zero, one), (A.truncate(hi), B.truncate(hi))))


def extract_kappa(chi: TransferMatrix) -> complex:
    """Coefficient of k^{-1} (= z) in the chi^22 jet."""
    j = chi.jet[1][1]
    if j.hi < 1:
        raise InsufficientJetOrder(f"chi^22 jet only known through z^{j.hi}")
    return j.coeff(1)


def kappa_stability(d, derived, n: int, extra: int = 4) -> tuple[complex, complex, float]:
    """kappa_n at the default matching depth and at depth + ``extra``; returns (k0, k1, rel change)."""
    vals = []
    for pad in (0, extra):
        fam = [
            solve_ba(d, derived, m, K_tail=max(background_transfer(d, derived, m).column_degrees()) + 8 + pad)
            for m in (n, n + 1, n + 2)
        ]
        vals.append(extract_kappa(transfer_matrix(*fam)))
    k0, k1 = vals
    return k0, k1, float(abs(k1 - k0) / max(abs(k0), 1e-300))


# -------------------------------------------------------- Tyurin readout


@dataclass(frozen=True)
class TyurinPoint:
    gamma_hat: complex
    alpha_hat: complex

    def to_json(self) -> dict:
        return {"gamma_hat": [self.gamma_hat.real, self.gamma_hat.imag], "alpha_hat": [self.alpha_hat.real, self.alpha_hat.imag]}


@dataclass
class TyurinReadout:
    points: list[TyurinPoint]
    poles: list[complex]
    sum_error: float  # lattice distance of gamma_1 + gamma_2 - c_sum (reduced units)


def _newton(f, z0: complex, h: float, maxit: int = 60) -> complex:
    z = complex(z0)
    for _ in range(maxit):
        fz = complex(f(z))
        df = (complex(f(z + h)) - complex(f(z - h))) / (2 * h)
        if df == 0:
            break
        dz = fz / df
        z -= dz
        if abs(dz) < 1e-15 * max(1.0, abs(z)):
            break
    return z


def _cell_windings(vals: np.ndarray, bad: np.ndarray) -> np.ndarray:
    """Argument-principle winding of each grid cell; NaN where a corner is unreliable."""
    a, b = vals[:-1, :-1], vals[1:, :-1]
    c, d = vals[1:, 1:], vals[:-1, 1:]
    turn = np.angle(b / a) + np.angle(c / b) + np.angle(d / c) + np.angle(a / d)
    w = np.rint(turn / (2 * np.pi))
    badc = bad[:-1, :-1] | bad[1:, :-1] | bad[1:, 1:] | bad[:-1, 1:]
    return np.where(badc, np.nan, w)


def _dedupe(L: LatticeSpec, pts: list[complex], tol: float = 1e-6) -> list[complex]:
    out: list[complex] = []
    for p in pts:
        if all(ell.lattice_distance(L, p - q) > tol for q in out):
            out.append(p)
    return out


def tyurin_from_chi(chi: TransferMatrix, c_sum: complex = 0j, grid: int = 64, exclude: float = 0.1) -> TyurinReadout:
    """Zeros of det chi_n in the fundamental cell and alpha-hat = -chi^22 there.

    Nodes closer than ``exclude`` (reduced units) to a lattice point are not
    used: the pointwise ratio loses accuracy next to the pole at the origin.
    """
    L = chi.lattice
    w1, w2 = L.periods
    t = np.linspace(-0.5, 0.5, grid + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    Z = X * w1 + Y * w2
    bad = ell.lattice_distance(L, Z) < exclude
    zs = np.where(bad, 0.5 * w1 + 0.5 * w2, Z)  # placeholder value at excluded nodes
    det = chi.det(zs.ravel()).reshape(Z.shape)
    wind = _cell_windings(det, bad)
    centers = 0.25 * (Z[:-1, :-1] + Z[1:, :-1] + Z[1:, 1:] + Z[:-1, 1:])
    h = 1e-6 * L.shortest_period
    f = lambda z: complex(chi.det(np.array([z]))[0])
    # poles of det chi_n are the zeros of det Psi-hat_n
    g = lambda z: complex(chi.psi_hat_det(np.array([z]))[0])
    zero_cells = [(centers[i, j], int(wind[i, j])) for i, j in zip(*np.nonzero(wind > 0))]
    pole_cells = [(centers[i, j], -int(wind[i, j])) for i, j in zip(*np.nonzero(wind < 0))]
    count = sum(m for _, m in zero_cells)
    if count != 2:
        raise ZeroCountMismatch(f"det chi_{chi.n}: {count} zeros at grid {grid}x{grid}, expected 2")
    zeros = _dedupe(L, [_newton(f, z0, h) for z0, _ in zero_cells])
    if len(zeros) != 2:
        raise ZeroCountMismatch(f"det chi_{chi.n}: Newton merged the zeros")
    poles = _dedupe(L, [_newton(g, z0, h) for z0, _ in pole_cells])
    pts = [TyurinPoint(complex(z), complex(-chi(np.array([z]))[1, 1][0])) for z in zeros]
    serr = float(ell.lattice_distance(L, zeros[0] + zeros[1] - c_sum))
    return TyurinReadout(pts, poles, serr)


def residue(fn, z0: complex, radius: float, npts: int = 64) -> complex:
    """(1/2 pi i) contour integral of fn around z0 by the trapezoid rule."""
    th = 2 * np.pi * np.arange(npts) / npts
    zc = z0 + radius * np.exp(1j * th)
    return complex(np.mean(fn(zc) * radius * np.exp(1j * th)))


def residue_ratio(chi: TransferMatrix, pole: complex, radius: float = 0.02) -> complex:
    """res chi^21 / res chi^22 at a pole of chi_n."""
    r21 = residue(lambda z: chi(z)[1, 0], pole, radius)
    r22 = residue(lambda z: chi(z)[1, 1], pole, radius)
    return r21 / r22


# ------------------------------------------------ effective data, report


@dataclass
class EffectiveData:
    """Tyurin data and chi_n jet coefficients read back from a BA family.

    ``data`` holds gamma-hat_n (poles of chi_0 at n = 0, zeros of det chi_{n-1}
    after that), v-hat_{n+1} = -[k^0] chi^22_n and alpha-hat_0 from the residue
    ratios of chi_0.  Arrays are indexed by site; unavailable entries are NaN.
    """

    data: object  # construction.InverseData
    alpha_hat: np.ndarray  # [site, s]
    c_hat: np.ndarray
    kappa_hat: np.ndarray
    readouts: list[TyurinReadout]
    v_label: str
    v_label_errors: dict


def _v_label(chis: Sequence[TransferMatrix], fit: BandedOp | None) -> tuple[str, dict]:
    """Which site label of -[k^0] chi^22_n reproduces the T^1 band v_n + v_{n+1} of the fitted L_wp."""
    if fit is None:
        return "unknown", {}
    n0 = chis[0].n
    w = np.array([-ch.jet[1][1].coeff(0) for ch in chis])
    errs = {}
    for label, off in (("n+1", 1), ("n", 0)):
        e = []
        for n in fit.valid.sites():
            # v_m = w[m - off - n0]
            i, j = n - off - n0, n + 1 - off - n0
            if 0 <= i and j < len(w):
                band = fit.coeff(1, n)
                e.append(abs(band - (w[i] + w[j])) / max(abs(band), 1e-300))
        errs[label] = float(max(e)) if e else float("nan")
    label = min(errs, key=lambda k: errs[k] if np.isfinite(errs[k]) else np.inf)
    return label, errs


def read_effective_data(chis: Sequence[TransferMatrix], readouts: Sequence[TyurinReadout], c_sum: complex = 0j, fit: BandedOp | None = None) -> EffectiveData:
    from .construction import InverseData
    from .diffop import Seq

    if chis[0].n != 0:
        raise IndexOutOfData("effective data needs chi_0")
    L = chis[0].lattice
    if not readouts[0].poles:
        raise ZeroCountMismatch("chi_0 shows no poles")
    p0 = readouts[0].poles[0]
    a0 = (residue_ratio(chis[0], p0), residue_ratio(chis[0], c_sum - p0))
    N = len(chis) + 1
    gam = np.r_[p0, [r.points[0].gamma_hat for r in readouts]]
    v = np.full(N, np.nan + 0j)
    c = np.full(N, np.nan + 0j)
    kap = np.full(N, np.nan + 0j)
    al = np.full((N, 2), np.nan + 0j)
    al[0] = a0
    for ch, r in zip(chis, readouts):
        n = ch.n
        v[n + 1] = -ch.jet[1][1].coeff(0)
        c[n + 1] = -ch.jet[1][0].coeff(0)
        kap[n] = extract_kappa(ch)
        al[n + 1] = [p.alpha_hat for p in r.points]
    label, errs = _v_label(chis, fit)
    # v_0 never enters the operators on their valid windows
    vs = np.where(np.isnan(v), 0, v)
    data = InverseData(L, Seq.from_list(0, gam), Seq.from_list(0, vs), a0, c_sum)
    return EffectiveData(data, al, c, kap, list(readouts), label, errs)


def _rel(a, b) -> np.ndarray:
    a, b = np.asarray(a, dtype=complex), np.asarray(b, dtype=complex)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)


@dataclass(frozen=True)
class Discrepancy:
    formula: str
    variant: str
    data: str  # "effective" (BA Tyurin data) or "input" (generator data)
    max_rel_err: float
    worst_site: int
    n_sites: int
    passed: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _row(formula, variant, data, sites, errs, tol) -> Discrepancy:
    errs = np.asarray(errs, dtype=float)
    ok = np.isfinite(errs)
    if not ok.any():
        return Discrepancy(formula, variant, data, float("nan"), -1, 0, False)
    i = int(np.nanargmax(np.where(ok, errs, -1)))
    m = float(errs[i])
    return Discrepancy(formula, variant, data, m, int(sites[i]), int(ok.sum()), bool(m < tol and ok.all()))


def discrepancy_report(d_input, eff: EffectiveData, fit: BandedOp, tol: float = 1e-7) -> list[Discrepancy]:
    """Localize each closed-form formula against the BA route.

    Every formula is evaluated on the BA's own Tyurin data and on the input
    data, for the corrected and the printed variants, and compared with the
    BA-side value: alpha-hat, c-hat and kappa-hat from chi_n jets, u from the
    diagonal of the fitted L_wp, and the full L_lambda band by band.
    """
    from .construction import Variant, build_Llambda, coeff_b, derive

    out: list[Discrepancy] = []
    N = eff.c_hat.shape[0]
    # u on the BA side: diag(L_wp) - diag(L_2^2) with L_2 from the chi jets
    u_ba = np.full(N, np.nan + 0j)
    for n in fit.valid.sites():
        if 1 <= n and n + 1 < N:
            u_ba[n] = fit.coeff(0, n) - (eff.c_hat[n + 1] + eff.data.v[n] ** 2 + eff.c_hat[n])
    L = d_input.lattice
    for label, d in (("effective", eff.data), ("input", d_input)):
        for variant in (Variant.CORRECTED, Variant.PRINTED):
            try:
                der = derive(_truncate(d, N), variant)
            except Exception as exc:  # a degenerate formula is itself a finding
                out.append(Discrepancy(f"derive:{type(exc).__name__}", variant.value, label, float("inf"), -1, 0, False))
                continue
            sites = np.arange(1, N)
            out.append(_row("alpha", variant.value, label, sites,
                            np.maximum(_rel(der.alpha1.values[1:], eff.alpha_hat[1:, 0]), _rel(der.alpha2.values[1:], eff.alpha_hat[1:, 1])), tol))
            out.append(_row("c", variant.value, label, sites, _rel(der.c_coeff.values[1:], eff.c_hat[1:]), tol))
            if variant is Variant.CORRECTED:
                ks = np.arange(0, N - 1)
                out.append(_row("kappa", variant.value, label, ks, _rel(der.kappa.values[:-1], eff.kappa_hat[:-1]), tol))
            us = np.array([n for n in fit.valid.sites() if np.isfinite(u_ba[n]) and np.isfinite(der.u.values[n])])
            if len(us):
                out.append(_row("u", variant.value, label, us, _rel(der.u.values[us], u_ba[us]), tol))
            if variant is Variant.PRINTED:
                bs = np.array([n for n in us if n >= 2])
                if len(bs):
                    g = d.gamma.values
                    got = [coeff_b(_truncate(d, N), n - 1) + coeff_b(_truncate(d, N), n - 2) for n in bs]
                    want = [u_ba[n] + complex(ell.wp(L, g[n - 1])) + complex(ell.wp(L, g[n - 2])) for n in bs]
                    out.append(_row("b", variant.value, label, bs, _rel(got, want), tol))
            try:
                Ll = build_Llambda(_truncate(d, N), der)
            except Exception as exc:
                out.append(Discrepancy(f"L_lambda:{type(exc).__name__}", variant.value, label, float("inf"), -1, 0, False))
                continue
            common = Ll.valid.intersect(fit.valid)
            errs = [max(_rel(Ll.coeff(p, n), fit.coeff(p, n)) for p in range(-2, 3)) for n in common.sites()]
            out.append(_row("L_lambda", variant.value, label, common.sites(), errs, tol))
    return out


def _truncate(d, N: int):
    """InverseData restricted to sites 0..N-1."""
    from .construction import InverseData
    from .diffop import Seq

    if d.n_sites == N:
        return d
    w = Window(0, min(N, d.n_sites) - 1)
    return InverseData(d.lattice, d.gamma.restrict(w), d.v.restrict(w), d.alpha0, d.c_sum)


# ------------------------------------------------------------ full check


@dataclass
class SiteReport:
    n: int
    solve_residual: float
    uniqueness_gap: float
    eigen_residual_wp: float
    eigen_residual_wpp: float
    kappa: complex
    gamma_hat_err: float
    alpha_hat_err: float


@dataclass
class BAVerification:
    family: list[BAFunction] = field(repr=False)
    chis: list[TransferMatrix] = field(repr=False)
    effective: EffectiveData = field(repr=False)
    fit_wp: OperatorFit = field(repr=False)
    fit_wpp: OperatorFit = field(repr=False)
    llambda: BandedOp = field(repr=False)
    sites: list[SiteReport]
    route_err: float  # fit(wp) vs closed-form L_lambda on the BA Tyurin data
    eig_llambda: float
    eig_wpp: float
    commutator_rel: float
    sum_err: float
    alpha_err: float
    residue_err: float
    discrepancies: list[Discrepancy]


def verify_ba(d, derived=None, n_max: int = 10, seed: int = 0, tol: float = 1e-7) -> BAVerification:
    """Solve psi_0..psi_{n_max}, read chi_n and the Tyurin data, and compare routes."""
    from .construction import build_Llambda, derive
    from .diffop import commutator

    derived = derive(d) if derived is None else derived
    L = d.lattice
    fam = solve_family(d, derived, n_max)
    chis = [transfer_matrix(*fam[n : n + 3]) for n in range(n_max - 1)]
    reads = [tyurin_from_chi(ch, d.c_sum) for ch in chis]
    avoid = list(d.gamma_pair(0)) + [p.gamma_hat for r in reads for p in r.points] + list(reads[0].poles)
    z_fit = sample_points(L, 30, seed, avoid)
    z_fresh = sample_points(L, 20, seed + 1, avoid)
    fit_wp = fit_operator(fam, Fn.WP, z_fit)
    fit_wpp = fit_operator(fam, Fn.WP_PRIME, z_fit)
    eff = read_effective_data(chis, reads, d.c_sum, fit_wp.op)
    der_eff = derive(eff.data)
    Ll = build_Llambda(eff.data, der_eff)
    common = Ll.valid.intersect(fit_wp.op.valid)
    route = max(float(_rel(Ll.coeff(p, n), fit_wp.op.coeff(p, n))) for n in common.sites() for p in range(-2, 3))
    eig_l = site_eigen_residuals(Ll, fam, Fn.WP, z_fresh)
    eig_w = site_eigen_residuals(fit_wp.op, fam, Fn.WP, z_fresh)
    eig_p = site_eigen_residuals(fit_wpp.op, fam, Fn.WP_PRIME, z_fresh)
    C = commutator(fit_wp.op, fit_wpp.op)
    comm = band_residual_norm(C) / (fit_wp.op.scale_estimate() * fit_wpp.op.scale_estimate())
    # alpha-hat against the recursion run on the BA Tyurin data
    a_err = np.full(len(fam), np.nan)
    for n in range(1, len(chis) + 1):
        a_err[n] = max(_rel(der_eff.alpha1[n], eff.alpha_hat[n, 0]), _rel(der_eff.alpha2[n], eff.alpha_hat[n, 1]))
    # residue ratios at the poles of chi_n against alpha-hat_n from chi_{n-1}
    r_err = []
    for n in range(1, len(chis)):
        for pole in reads[n].poles:
            pts = reads[n - 1].points
            k = int(np.argmin([ell.lattice_distance(L, pole - p.gamma_hat) for p in pts]))
            r_err.append(float(_rel(residue_ratio(chis[n], pole), pts[k].alpha_hat)))
    rows = []
    for b in fam:
        n = b.n
        g_err = reads[n - 1].sum_error if 1 <= n <= len(reads) else float("nan")
        rows.append(SiteReport(
            n, b.solve_residual, b.uniqueness_gap,
            eig_w.get(n, float("nan")), eig_p.get(n, float("nan")),
            extract_kappa(chis[n]) if n < len(chis) else complex("nan"),
            g_err, float(a_err[n]),
        ))
    disc = discrepancy_report(d, eff, fit_wp.op, tol)
    return BAVerification(
        fam, chis, eff, fit_wp, fit_wpp, Ll, rows, route, max(eig_l.values()), max(eig_p.values()),
        float(comm), max(r.sum_error for r in reads), float(np.nanmax(a_err)), max(r_err), disc,
    )
