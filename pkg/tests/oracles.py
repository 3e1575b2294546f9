"""Independent brute-force oracles used only by the test-suite."""
from __future__ import annotations

import numpy as np


def _lattice_points(w1, w2, R):
    m = np.arange(-R, R + 1)
    M, N = np.meshgrid(m, m, indexing="ij")
    pts = (2 * w1 * M + 2 * w2 * N).ravel()
    return pts[(M.ravel() != 0) | (N.ravel() != 0)]


def _richardson(f, R=200):
    # box-sum tails behave like A R^-2 + B R^-3 + C R^-4; eliminate them
    Rs = np.array([R // 2, (2 * R) // 3, (5 * R) // 6, R], dtype=float)
    vals = np.array([f(int(r)) for r in Rs])
    V = np.stack([np.ones(4), Rs**-2, Rs**-3, Rs**-4], axis=1)
    return np.linalg.solve(V, vals)[0]


def eisenstein_g2_g3(w1, w2, R=200):
    def g2(r):
        p = _lattice_points(w1, w2, r)
        return 60 * np.sum(p ** -4.0)

    def g3(r):
        p = _lattice_points(w1, w2, r)
        return 140 * np.sum(p ** -6.0)

    return _richardson(g2, R), _richardson(g3, R)


def wp_sum(w1, w2, z, R=200):
    def f(r):
        p = _lattice_points(w1, w2, r)
        return 1 / z**2 + np.sum(1 / (z - p) ** 2 - 1 / p**2)

    return _richardson(f, R)


def wp_prime_sum(w1, w2, z, R=200):
    def f(r):
        p = _lattice_points(w1, w2, r)
        return -2 / z**3 - 2 * np.sum(1 / (z - p) ** 3)

    return _richardson(f, R)


def zeta_sum(w1, w2, z, R=200):
    def f(r):
        p = _lattice_points(w1, w2, r)
        return 1 / z + np.sum(1 / (z - p) + 1 / p + z / p**2)

    return _richardson(f, R)


# --- coefficient formulas re-evaluated on the lattice-sum functions ---------


class SumLattice:
    def __init__(self, w1, w2, R=200):
        self.w1, self.w2, self.R = w1, w2, R

    def zeta(self, z):
        return zeta_sum(self.w1, self.w2, z, self.R)

    def wp(self, z):
        return wp_sum(self.w1, self.w2, z, self.R)

    def wpp(self, z):
        return wp_prime_sum(self.w1, self.w2, z, self.R)


def printed_alpha(S, gamma, v, alpha0):
    a = [tuple(alpha0)]
    for n in range(len(gamma) - 1):
        a1, a2 = a[-1]
        g, h = gamma[n], gamma[n + 1]
        br = S.zeta(h) + a1 / (a1 - a2) * S.zeta(h - g) + a2 / (a1 - a2) * S.zeta(h + g)
        a.append((-v[n + 1] + br, -v[n + 1] - br))
    return a


def printed_c(S, gamma, alphas, n):
    a1, a2 = alphas[n]
    g, h = gamma[n], gamma[n + 1]
    return (S.zeta(h - g) - S.zeta(h + g) + 2 * S.zeta(g)) / (a1 - a2)


def printed_b(S, gamma, n):
    g, h = gamma[n], gamma[n + 1]
    return 2 * S.wpp(g) * (S.wp(h + g) - S.wp(h - g)) / (S.wpp(h + g) - S.wpp(h - g))


def transfer_B(S, g, a1, a2, v_next, z):
    """Second-row, second-column entry of the transfer matrix (gamma_2 = -gamma_1)."""
    D1, D2 = a2 / (a1 - a2), -a1 / (a1 - a2)
    beta0 = -v_next + D1 * S.zeta(g) + D2 * S.zeta(-g)
    return S.zeta(z) + D1 * S.zeta(z - g) + D2 * S.zeta(z + g) + beta0


def corrected_alpha(S, gamma, v, alpha0):
    a = [tuple(alpha0)]
    for n in range(len(gamma) - 1):
        a1, a2 = a[-1]
        h = gamma[n + 1]
        a.append((-transfer_B(S, gamma[n], a1, a2, v[n + 1], h), -transfer_B(S, gamma[n], a1, a2, v[n + 1], -h)))
    return a


def corrected_c(S, gamma, alphas, n):
    a1, a2 = alphas[n - 1]
    g, h = gamma[n - 1], gamma[n]
    E = a1 * a2 / (a1 - a2)
    return E * (S.zeta(h - g) - S.zeta(h + g) + S.zeta(g) - S.zeta(-g))
