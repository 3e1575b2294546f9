"""Discrete Krichever-Novikov flow on (c_n, v_n) and the hierarchy matrices.

    dc_m/dt = c_m (v_m - v_{m-1})
    dv_m/dt = c_{m+1} - c_m + kappa_m - kappa_{m-1}

With kappa = 0 this is the Toda lattice for L = T + v + c T^{-1}; its
periodic invariants and the monodromy trace are conserved.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

import numpy as np

from .baker import PolyMatrix, TransferMatrix
from .diffop import Seq, Window
from .errors import RequiresPeriodic, WindowMismatch, ZeroLeadingA

MONODROMY_LAMBDA = 1.7


class Boundary(str, Enum):
    PERIODIC = "periodic"
    FIXED = "fixed"


@dataclass(frozen=True)
class FlowState:
    t: float
    c: Seq
    v: Seq
    boundary: Boundary = Boundary.PERIODIC

    def __post_init__(self):
        if self.c.window != self.v.window:
            raise WindowMismatch("c and v must share a window")
        object.__setattr__(self, "boundary", Boundary(self.boundary))

    @property
    def period(self) -> int:
        return self.c.window.size

    @classmethod
    def from_arrays(cls, c, v, t: float = 0.0, boundary=Boundary.PERIODIC) -> FlowState:
        return cls(t, Seq.from_list(0, np.asarray(c, dtype=complex)), Seq.from_list(0, np.asarray(v, dtype=complex)), boundary)

    def to_json(self) -> dict:
        return {
            "t": self.t,
            "boundary": self.boundary.value,
            "c": [[x.real, x.imag] for x in self.c.values],
            "v": [[x.real, x.imag] for x in self.v.values],
        }


class KappaMode(str, Enum):
    ZERO = "zero"
    TABLE = "table"
    CALLBACK = "callback"


@dataclass(frozen=True)
class KappaProvider:
    mode: KappaMode = KappaMode.ZERO
    table: Seq | None = None
    callback: Callable[[FlowState], Seq] | None = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "mode", KappaMode(self.mode))
        if self.mode is KappaMode.TABLE and self.table is None:
            raise ValueError("table mode needs a table")
        if self.mode is KappaMode.CALLBACK and self.callback is None:
            raise ValueError("callback mode needs a callback")

    def __call__(self, s: FlowState) -> Seq:
        if self.mode is KappaMode.ZERO:
            return Seq(s.c.window, np.zeros(s.c.window.size, dtype=complex))
        k = self.table if self.mode is KappaMode.TABLE else self.callback(s)
        if k.window != s.c.window:
            raise WindowMismatch(f"kappa window {k.window} does not match the state window {s.c.window}")
        return k


def kn_rhs(s: FlowState, kappa: Seq) -> tuple[Seq, Seq]:
    if kappa.window != s.c.window:
        raise WindowMismatch("kappa window does not match the state")
    c, v, k = s.c.values, s.v.values, kappa.values
    if s.boundary is Boundary.PERIODIC:
        dc = c * (v - np.roll(v, 1))
        dv = np.roll(c, -1) - c + k - np.roll(k, 1)
    else:
        dc = np.zeros_like(c)
        dv = np.zeros_like(v)
        dc[1:] = c[1:] * (v[1:] - v[:-1])
        dv[1:-1] = c[2:] - c[1:-1] + k[1:-1] - k[:-2]
    w = s.c.window
    return Seq(w, dc), Seq(w, dv)


def rk4_step(s: FlowState, dt: float, kp: KappaProvider) -> FlowState:
    if not dt > 0:
        raise ValueError("dt must be positive")
    w = s.c.window

    def f(st: FlowState):
        dc, dv = kn_rhs(st, kp(st))
        return dc.values, dv.values

    def shifted(dt_, kc, kv):
        return replace(s, t=s.t + dt_, c=Seq(w, s.c.values + dt_ * kc), v=Seq(w, s.v.values + dt_ * kv))

    k1 = f(s)
    k2 = f(shifted(dt / 2, *k1))
    k3 = f(shifted(dt / 2, *k2))
    k4 = f(shifted(dt, *k3))
    c = s.c.values + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
    v = s.v.values + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
    return replace(s, t=s.t + dt, c=Seq(w, c), v=Seq(w, v))


def integrate(s: FlowState, dt: float, t_end: float, kp: KappaProvider, every: int = 0, on_sample=None) -> FlowState:
    """RK4 from s.t to t_end with a step count rounded to the nearest integer."""
    steps = int(round((t_end - s.t) / dt))
    if on_sample is not None:
        on_sample(s)
    for i in range(1, steps + 1):
        s = rk4_step(s, dt, kp)
        s = replace(s, t=s.t if i < steps else t_end)
        if on_sample is not None and every and i % every == 0:
            on_sample(s)
    return s


def monodromy_trace(s: FlowState, lam: complex = MONODROMY_LAMBDA) -> complex:
    """Trace of prod_n [[0, 1], [-c_{n+1}, lam - v_{n+1}]] around the period."""
    if s.boundary is not Boundary.PERIODIC:
        raise RequiresPeriodic("monodromy needs periodic data")
    M = np.eye(2, dtype=complex)
    c, v = s.c.values, s.v.values
    P = len(c)
    for n in range(P):
        m = (n + 1) % P
        M = np.array([[0, 1], [-c[m], lam - v[m]]]) @ M
    return complex(np.trace(M))


def invariants(s: FlowState, lam: complex = MONODROMY_LAMBDA) -> dict[str, complex]:
    if s.boundary is not Boundary.PERIODIC:
        raise RequiresPeriodic("invariants need periodic data")
    v, c = s.v.values, s.c.values
    return {
        "I1": complex(np.sum(v)),
        "I2": complex(np.sum(v * v / 2 + c)),
        "monodromy_trace": monodromy_trace(s, lam),
    }


def random_state(P: int, seed: int, c_range=(0.5, 1.5), v_scale: float = 0.5) -> FlowState:
    """Real periodic state; c_n > 0 keeps the Toda reduction away from c = 0."""
    rng = np.random.default_rng(seed)
    return FlowState.from_arrays(rng.uniform(*c_range, size=P), v_scale * rng.normal(size=P))


def convergence_order(s0: FlowState, kp: KappaProvider, t_end: float = 1.0, dts=(1e-2, 5e-3), dt_ref: float = 1e-5) -> float:
    """Observed global order from two step sizes against a fine reference run."""
    ref = integrate(s0, dt_ref, t_end, kp)

    def err(dt):
        s = integrate(s0, dt, t_end, kp)
        return np.max(np.abs(np.r_[s.c.values - ref.c.values, s.v.values - ref.v.values]))

    e1, e2 = err(dts[0]), err(dts[1])
    return float(np.log(e1 / e2) / np.log(dts[0] / dts[1]))


# ------------------------------------------------------------ hierarchy


def _poly(p) -> np.ndarray:
    a = np.atleast_1d(np.asarray(p, dtype=complex))
    return a if a.size else np.zeros(1, dtype=complex)


def _pm(entries: list[list[np.ndarray]]) -> PolyMatrix:
    l = len(entries)
    deg = max(len(e) for row in entries for e in row)
    c = np.zeros((l, l, deg), dtype=complex)
    for i in range(l):
        for j in range(l):
            c[i, j, : len(entries[i][j])] = entries[i][j]
    return PolyMatrix(c)


@dataclass
class HierarchyMatrices:
    l: int
    n0: int  # site of chi0[0], m_plus[0]
    chi0: list[PolyMatrix]
    m_plus: list[PolyMatrix]
    m_minus: list[PolyMatrix | None]  # None where a_{1,n-1} is unavailable (first site)
    b: list[np.ndarray | None]


def build_hierarchy_matrices(l: int, a: Sequence[Sequence], w: Sequence[Sequence[complex]], cq: Sequence[Sequence[complex]], n0: int = 0) -> HierarchyMatrices:
    """chi0_n, M_n^{0,1+} and M_n^{0,1-} from a_{qn} (polynomials in k, ascending), w_{qn} and c_{qn}.

    b_{qn} = a_{qn} / a_{1,n-1} needs a constant, non-zero a_{1,n-1}.
    """
    if l < 2:
        raise ValueError("l must be at least 2")
    if not (len(a) == len(w) == len(cq)):
        raise WindowMismatch("a, w and c must cover the same sites")
    zero, one = np.zeros(1, dtype=complex), np.ones(1, dtype=complex)
    chi0, mp, mm, bs = [], [], [], []
    for i, (an, wn, cn) in enumerate(zip(a, w, cq)):
        if len(an) != l or len(wn) != l or len(cn) != l:
            raise WindowMismatch(f"site {n0 + i}: expected {l} entries per row")
        an = [_poly(p) for p in an]
        X = [[zero] * l for _ in range(l)]
        for p in range(l - 1):
            X[p][p + 1] = one
        X[l - 1] = list(an)
        chi0.append(_pm(X))
        Mp = [list(row) for row in X]
        for q in range(l - 1):
            Mp[q][q] = np.array([wn[q]], dtype=complex)
        Mp[l - 1][l - 1] = np.polyadd(an[l - 1][::-1], np.array([wn[l - 1]], dtype=complex))[::-1]
        mp.append(_pm(Mp))
        if i == 0:
            mm.append(None)
            bs.append(None)
            continue
        a1_prev = _poly(a[i - 1][0])
        if np.any(a1_prev[1:] != 0):
            raise ValueError(f"a_1 at site {n0 + i - 1} must be constant in k")
        if a1_prev[0] == 0:
            raise ZeroLeadingA(f"a_1 vanishes at site {n0 + i - 1}")
        b = [an[q] / a1_prev[0] for q in range(l)]
        bs.append(b)
        Mm = [[zero] * l for _ in range(l)]
        for q in range(1, l):
            Mm[0][q - 1] = cn[0] * b[q]
        Mm[0][l - 1] = np.array([cn[0]], dtype=complex)
        for q in range(1, l):
            Mm[q][q - 1] = np.array([cn[q]], dtype=complex)
        mm.append(_pm(Mm))
    return HierarchyMatrices(l, n0, chi0, mp, mm, bs)


def validate_hierarchy(H: HierarchyMatrices, a, w, cq) -> list[str]:
    """Exact structural checks; returns the list of violations (empty when all hold)."""
    bad: list[str] = []
    l = H.l

    def entry(P: PolyMatrix, i, j) -> np.ndarray:
        e = P.coeffs[i, j]
        nz = np.flatnonzero(e)
        return e[: nz[-1] + 1] if len(nz) else np.zeros(0, dtype=complex)

    def same(x: np.ndarray, y) -> bool:
        y = np.trim_zeros(_poly(y), "b")
        x = np.trim_zeros(x, "b")
        return len(x) == len(y) and bool(np.all(x == y))

    for k, (X, Mp) in enumerate(zip(H.chi0, H.m_plus)):
        n = H.n0 + k
        an = [_poly(p) for p in a[k]]
        for i in range(l):
            for j in range(l):
                e = entry(X, i, j)
                if i == l - 1:
                    want = an[j]
                elif j == i + 1:
                    want = [1]
                else:
                    want = []
                if not same(e, want):
                    bad.append(f"chi0[{n}][{i},{j}]")
                if i != j and not same(entry(Mp, i, j), want):
                    bad.append(f"M+[{n}][{i},{j}]")
            want_d = np.array([w[k][i]], dtype=complex)
            if i == l - 1:
                want_d = an[i].copy()
                want_d[0] += w[k][i]
            if not same(entry(Mp, i, i), want_d):
                bad.append(f"M+ - chi0 diagonal [{n}][{i}]")
        Mm = H.m_minus[k]
        if Mm is None:
            continue
        b = H.b[k]
        a1_prev = _poly(a[k - 1][0])[0]
        for q in range(l):
            if not np.array_equal(b[q], an[q] / a1_prev):
                bad.append(f"b[{n}][{q}]")
        for i in range(l):
            for j in range(l):
                e = entry(Mm, i, j)
                if i == 0 and j < l - 1:
                    want = cq[k][0] * b[j + 1]
                elif i == 0:
                    want = [cq[k][0]]
                elif j == i - 1:
                    want = [cq[k][i]]
                else:
                    want = []
                if not same(e, want):
                    bad.append(f"M-[{n}][{i},{j}]")
    return bad


def structural_nonzeros(P: PolyMatrix) -> int:
    return int(sum(np.any(P.coeffs[i, j] != 0) for i in range(P.size) for j in range(P.size)))


def m_consistency(chi: TransferMatrix, M: PolyMatrix, v_n: complex, v_n1: complex) -> float:
    """max over entries of |[k^p](chi_n + diag(v_n, v_{n+1}) - M_n)| / (1 + |[k^p] M_n|) for p = 1, 0."""
    worst = 0.0
    dv = (v_n, v_n1)
    for i in range(2):
        for j in range(2):
            jet = chi.jet[i][j]
            for p in (1, 0):
                got = jet.coeff(-p) + (dv[i] if i == j and p == 0 else 0)
                want = M.coeffs[i, j, p] if p < M.coeffs.shape[2] else 0
                worst = max(worst, abs(got - want) / (1 + abs(want)))
    return float(worst)


def l2_hierarchy(c: Sequence[complex], v: Sequence[complex], sites: Sequence[int]) -> tuple[list, list, list]:
    """(a, w, c_q) rows for l = 2: a = (-c_{n+1}, k - v_{n+1}), w = (v_n, v_{n+1}), c_q = (c_n, c_{n+1})."""
    a, w, cq = [], [], []
    for n in sites:
        a.append([[-c[n + 1]], [-v[n + 1], 1.0]])
        w.append([v[n], v[n + 1]])
        cq.append([c[n], c[n + 1]])
    return a, w, cq
