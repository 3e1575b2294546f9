"""Banded scalar difference operators on a finite window of sites.

An operator ``L = sum_{p=-M}^{N} u_{p,n} T^p`` acts by
``(L s)_n = sum_p u_{p,n} s_{n+p}``.  Coefficients are stored densely,
one row per band (p ascending), one column per site.  Every operator
carries a validity subwindow; coefficients outside it are placeholders
and reading them is an error.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import NotSquareBands, WindowMismatch, WindowTooSmall


@dataclass(frozen=True)
class Window:
    lo: int
    hi: int

    def __post_init__(self):
        if self.hi < self.lo:
            raise WindowTooSmall(f"empty window [{self.lo}, {self.hi}]")

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def __contains__(self, n) -> bool:
        return self.lo <= n <= self.hi

    def covers(self, other: Window) -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def shrink(self, left: int, right: int) -> Window:
        return Window(self.lo + left, self.hi - right)

    def intersect(self, other: Window) -> Window:
        return Window(max(self.lo, other.lo), min(self.hi, other.hi))

    def to_json(self) -> dict:
        return {"lo": int(self.lo), "hi": int(self.hi)}


@dataclass(frozen=True)
class Seq:
    """Values indexed by site n; extra trailing axes are allowed."""

    window: Window
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape[0] != self.window.size:
            raise WindowMismatch("Seq length does not match its window")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_list(cls, lo: int, values) -> Seq:
        values = np.asarray(values, dtype=complex)
        return cls(Window(lo, lo + values.shape[0] - 1), values)

    def __getitem__(self, n: int):
        if n not in self.window:
            raise IndexError(f"site {n} outside window [{self.window.lo}, {self.window.hi}]")
        return self.values[n - self.window.lo]

    def restrict(self, w: Window) -> Seq:
        if not self.window.covers(w):
            raise WindowMismatch("restriction window not inside the sequence window")
        i = w.lo - self.window.lo
        return Seq(w, self.values[i : i + w.size])

    def shifted(self, k: int) -> Seq:
        """Relabel sites n -> n + k."""
        return Seq(Window(self.window.lo + k, self.window.hi + k), self.values)


@dataclass(frozen=True)
class BandedOp:
    window: Window
    m_lower: int
    n_upper: int
    coeffs: np.ndarray  # shape (m_lower + n_upper + 1, window.size)
    valid: Window = None  # type: ignore[assignment]

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if self.m_lower < 0 or self.n_upper < 0:
            raise ValueError("band counts must be non-negative")
        if c.shape != (self.m_lower + self.n_upper + 1, self.window.size):
            raise WindowMismatch(f"coefficient array shape {c.shape} does not match bands/window")
        object.__setattr__(self, "coeffs", c)
        if self.valid is None:
            object.__setattr__(self, "valid", self.window)
        if not self.window.covers(self.valid):
            raise WindowMismatch("validity window must lie inside the storage window")

    @property
    def bands(self) -> range:
        return range(-self.m_lower, self.n_upper + 1)

    def band(self, p: int) -> np.ndarray:
        """Band p over the storage window (zeros if p is outside the band range)."""
        if p < -self.m_lower or p > self.n_upper:
            return np.zeros(self.window.size, dtype=complex)
        return self.coeffs[p + self.m_lower]

    def band_seq(self, p: int) -> Seq:
        i = self.valid.lo - self.window.lo
        return Seq(self.valid, self.band(p)[i : i + self.valid.size])

    def coeff(self, p: int, n: int) -> complex:
        if n not in self.valid:
            raise IndexError(f"site {n} outside validity window [{self.valid.lo}, {self.valid.hi}]")
        return complex(self.band(p)[n - self.window.lo])

    def scale_estimate(self) -> float:
        i = self.valid.lo - self.window.lo
        return float(np.max(np.abs(self.coeffs[:, i : i + self.valid.size])))

    # ------------------------------------------------------------ JSON
    def to_json(self) -> dict:
        return {
            "window": self.window.to_json(),
            "valid": self.valid.to_json(),
            "m_lower": self.m_lower,
            "n_upper": self.n_upper,
            "coeffs": [[[float(c.real), float(c.imag)] for c in row] for row in self.coeffs],
        }

    @classmethod
    def from_json(cls, d: dict) -> BandedOp:
        arr = np.array(d["coeffs"], dtype=float)
        coeffs = arr[..., 0] + 1j * arr[..., 1]
        w = Window(**d["window"])
        valid = Window(**d["valid"]) if "valid" in d else w
        return cls(w, int(d["m_lower"]), int(d["n_upper"]), coeffs, valid)


# ------------------------------------------------------------ builders


def zero_op(window: Window, m_lower: int = 0, n_upper: int = 0) -> BandedOp:
    return BandedOp(window, m_lower, n_upper, np.zeros((m_lower + n_upper + 1, window.size)))


def from_bands(window: Window, bands: dict[int, Sequence[complex] | complex], valid: Window | None = None) -> BandedOp:
    """Operator from a mapping p -> band values (scalar broadcasts)."""
    M = max(0, -min(bands))
    N = max(0, max(bands))
    c = np.zeros((M + N + 1, window.size), dtype=complex)
    for p, vals in bands.items():
        c[p + M] = np.broadcast_to(np.asarray(vals, dtype=complex), (window.size,))
    return BandedOp(window, M, N, c, valid)


def identity(window: Window) -> BandedOp:
    return from_bands(window, {0: 1.0})


def shift(window: Window, p: int = 1) -> BandedOp:
    return from_bands(window, {p: 1.0})


def diag(s: Seq) -> BandedOp:
    return from_bands(s.window, {0: s.values})


# ---------------------------------------------------------- operations


def apply(op: BandedOp, s: Seq) -> Seq:
    """(op s)_n = sum_p u_{p,n} s_{n+p} on the sites where everything is defined."""
    lo = max(op.valid.lo, s.window.lo + op.m_lower)
    hi = min(op.valid.hi, s.window.hi - op.n_upper)
    if hi < lo:
        raise WindowTooSmall("operator stencil does not fit inside the sequence window")
    out_w = Window(lo, hi)
    extra = s.values.shape[1:]
    out = np.zeros((out_w.size,) + extra, dtype=complex)
    ci = lo - op.window.lo
    for p in op.bands:
        u = op.band(p)[ci : ci + out_w.size]
        si = lo + p - s.window.lo
        out += u.reshape((-1,) + (1,) * len(extra)) * s.values[si : si + out_w.size]
    return Seq(out_w, out)


def _same_window(*ops: BandedOp) -> Window:
    w = ops[0].window
    for op in ops[1:]:
        if op.window != w:
            raise WindowMismatch(f"windows differ: {w} vs {op.window}")
    return w


def compose(A: BandedOp, B: BandedOp) -> BandedOp:
    """Product AB with (AB)_{p,n} = sum_q a_{q,n} b_{p-q,n+q}."""
    w = _same_window(A, B)
    lo = max(A.valid.lo, B.valid.lo + A.m_lower)
    hi = min(A.valid.hi, B.valid.hi - A.n_upper)
    if hi < lo:
        raise WindowTooSmall("composition leaves no valid sites")
    valid = Window(lo, hi)
    M, N = A.m_lower + B.m_lower, A.n_upper + B.n_upper
    c = np.zeros((M + N + 1, w.size), dtype=complex)
    i0, size = lo - w.lo, valid.size
    for q in A.bands:
        a = A.band(q)[i0 : i0 + size]
        for r in B.bands:
            b = B.band(r)[i0 + q : i0 + q + size]
            c[q + r + M, i0 : i0 + size] += a * b
    return BandedOp(w, M, N, c, valid)


def lincomb(terms: Iterable[tuple[complex, BandedOp]]) -> BandedOp:
    terms = list(terms)
    if not terms:
        raise ValueError("lincomb needs at least one term")
    w = _same_window(*(op for _, op in terms))
    M = max(op.m_lower for _, op in terms)
    N = max(op.n_upper for _, op in terms)
    valid = terms[0][1].valid
    for _, op in terms[1:]:
        valid = valid.intersect(op.valid)
    c = np.zeros((M + N + 1, w.size), dtype=complex)
    for s, op in terms:
        c[M - op.m_lower : M + op.n_upper + 1] += s * op.coeffs
    i0 = valid.lo - w.lo
    c[:, :i0] = 0
    c[:, i0 + valid.size :] = 0
    return BandedOp(w, M, N, c, valid)


def commutator(A: BandedOp, B: BandedOp) -> BandedOp:
    return lincomb([(1.0, compose(A, B)), (-1.0, compose(B, A))])


def band_residual_norm(op: BandedOp, sub: Window | None = None) -> float:
    sub = op.valid if sub is None else sub
    if not op.valid.covers(sub):
        raise WindowMismatch("sub-window outside the operator's validity region")
    i0 = sub.lo - op.window.lo
    return float(np.max(np.abs(op.coeffs[:, i0 : i0 + sub.size])))


def restrict_valid(op: BandedOp, sub: Window) -> BandedOp:
    if not op.valid.covers(sub):
        raise WindowMismatch("sub-window outside the operator's validity region")
    return BandedOp(op.window, op.m_lower, op.n_upper, op.coeffs, sub)


def trim_bands(op: BandedOp, m_lower: int, n_upper: int) -> BandedOp:
    """Re-express op with the given band counts; dropped bands must vanish."""
    c = np.zeros((m_lower + n_upper + 1, op.window.size), dtype=complex)
    for p in op.bands:
        if -m_lower <= p <= n_upper:
            c[p + m_lower] = op.band(p)
        elif np.any(op.band(p) != 0):
            raise ValueError(f"band {p} is nonzero and cannot be dropped")
    return BandedOp(op.window, m_lower, n_upper, c, op.valid)


def to_dense(op: BandedOp) -> np.ndarray:
    """Dense matrix of the operator restricted to rows in the validity window.

    Columns index sites of the storage window; rows whose stencil leaves the
    storage window are dropped.
    """
    w = op.window
    rows = []
    for n in op.valid.sites():
        if n - op.m_lower < w.lo or n + op.n_upper > w.hi:
            continue
        row = np.zeros(w.size, dtype=complex)
        for p in op.bands:
            row[n + p - w.lo] = op.band(p)[n - w.lo]
        rows.append(row)
    return np.array(rows)


def symmetrizable_weights(op: BandedOp, rtol: float = 1e-9) -> Seq | None:
    """Positive d with d_n u_{p,n} = d_{n+p} u_{-p,n+p}, normalized d_lo = 1."""
    if op.m_lower != op.n_upper:
        raise NotSquareBands(f"bands ({op.m_lower}, {op.n_upper}) are not square")
    v = op.valid
    if op.n_upper == 0:
        return Seq(v, np.ones(v.size))
    up = op.band_seq(1).values
    dn = op.band_seq(-1).values
    num, den = up[:-1], dn[1:]
    if np.any(num == 0) or np.any(den == 0):
        return None
    ratio = num / den  # d_{n+1} / d_n
    if np.any(np.abs(ratio.imag) > rtol * np.abs(ratio)) or np.any(ratio.real <= 0):
        return None
    d = np.concatenate([[1.0], np.cumprod(ratio.real)])
    for p in range(1, op.n_upper + 1):
        lhs = d[:-p] * op.band_seq(p).values[:-p]
        rhs = d[p:] * op.band_seq(-p).values[p:]
        scale = np.maximum(np.abs(lhs), np.abs(rhs))
        if np.any(np.abs(lhs - rhs) > rtol * np.maximum(scale, 1e-300)):
            return None
    return Seq(v, d)
