"""Verification suites shared by the CLI and the acceptance tests.

Each suite returns a SuiteResult: named pass/fail checks plus plain tables
that the CLI writes as CSV.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import baker, construction, flows
from . import elliptic as ell
from .diffop import Seq, Window, compose, diag, from_bands, lincomb, restrict_valid

DEFAULT_TOLERANCES: dict[str, float] = {
    "wp_ode": 1e-9,
    "legendre": 1e-12,
    "quasi_periodicity": 1e-11,
    "jet_vs_value": 1e-8,
    "square_g3": 1e-12,
    "commutant_gap": 1e6,
    "partner_residual": 1e-8,
    "curve_invariants": 1e-6,
    "curve_residual": 1e-6,
    "solve_residual": 1e-9,
    "uniqueness_gap": 1e6,
    "eigen_residual": 1e-8,
    "route_agreement": 1e-7,
    "fit_commutator": 1e-7,
    "gamma_sum": 1e-6,
    "alpha_hat": 1e-6,
    "residue_ratio": 1e-6,
    "kappa_stability": 1e-6,
    "flow_linear_drift": 1e-10,
    "flow_quadratic_drift": 1e-10,
    "monodromy_drift": 1e-8,
    "rk4_order_lo": 3.8,
    "rk4_order_hi": 4.2,
    "m_consistency": 1e-8,
}


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    tolerance: float
    relation: str  # "<", ">", ">=", "==", "in"
    passed: bool

    def to_json(self) -> dict:
        return {"name": self.name, "value": self.value, "tolerance": self.tolerance, "relation": self.relation, "pass": self.passed}


def below(name: str, value: float, tol: float) -> Check:
    value = float(value)
    return Check(name, value, tol, "<", bool(value < tol))


def above(name: str, value: float, tol: float, strict: bool = True) -> Check:
    value = float(value)
    ok = value > tol if strict else value >= tol
    return Check(name, value, tol, ">" if strict else ">=", bool(ok))


def equals(name: str, value, target) -> Check:
    return Check(name, float(value), float(target), "==", bool(value == target))


def within(name: str, value: float, lo: float, hi: float) -> Check:
    value = float(value)
    return Check(name, value, float(lo), f"in[{lo},{hi}]", bool(lo <= value <= hi))


@dataclass
class Table:
    header: list[str]
    rows: list[list] = field(default_factory=list)


@dataclass
class SuiteResult:
    checks: list[Check] = field(default_factory=list)
    tables: dict[str, Table] = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def extend(self, other: SuiteResult) -> None:
        self.checks += other.checks
        self.tables.update(other.tables)
        self.info.update(other.info)

    @property
    def passed(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)


def _tol(tols: dict | None, name: str) -> float:
    return (tols or {}).get(name, DEFAULT_TOLERANCES[name])


# ---------------------------------------------------------------- elliptic


def random_lattices(count: int, seed: int) -> list[ell.LatticeSpec]:
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        tau = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.8, 1.8))
        w1 = complex(np.exp(1j * rng.uniform(-0.3, 0.3)) * rng.uniform(0.7, 1.3))
        out.append(ell.make_lattice(w1, w1 * tau))
    return out


def _cell_points(L: ell.LatticeSpec, count: int, rng, min_dist: float = 0.05) -> np.ndarray:
    w1, w2 = L.periods
    pts = []
    while len(pts) < count:
        z = complex(rng.uniform(-0.5, 0.5) * w1 + rng.uniform(-0.5, 0.5) * w2)
        if ell.lattice_distance(L, z) > min_dist:
            pts.append(z)
    return np.array(pts)


def elliptic_suite(seed: int, n_lattices: int = 5, n_points: int = 100, lattice: ell.LatticeSpec | None = None, tols: dict | None = None) -> SuiteResult:
    rng = np.random.default_rng(seed + 1)
    table = Table(["lattice", "omega1_re", "omega1_im", "omega2_re", "omega2_im", "ode", "legendre", "quasi", "jet"])
    worst = {"ode": 0.0, "legendre": 0.0, "quasi": 0.0, "jet": 0.0}
    for i, L in enumerate(random_lattices(n_lattices, seed)):
        z = _cell_points(L, n_points, rng)
        p, dp = ell.wp(L, z), ell.wp_prime(L, z)
        rhs = 4 * p**3 - L.g2 * p - L.g3
        ode = np.max(np.abs(dp**2 - rhs) / (np.abs(dp) ** 2 + np.abs(4 * p**3) + np.abs(L.g2 * p) + abs(L.g3)))
        # quasi-periods measured from zeta values
        w1, w2 = L.omega1, L.omega2
        e1 = (ell.zeta(L, z + 2 * w1) - ell.zeta(L, z)) / 2
        e2 = (ell.zeta(L, z + 2 * w2) - ell.zeta(L, z)) / 2
        scale_e = np.maximum(np.abs(ell.zeta(L, z)), 1.0)
        quasi = max(
            np.max(np.abs(e1 - L.eta1) / scale_e),
            np.max(np.abs(e2 - L.eta2) / scale_e),
            np.max(np.abs(ell.wp(L, z + 2 * w1) - p) / np.maximum(np.abs(p), 1.0)),
            np.max(np.abs(ell.wp(L, z + 2 * w2) - p) / np.maximum(np.abs(p), 1.0)),
        )
        leg = float(np.max(np.abs(e1 * w2 - e2 * w1 - 1j * math.pi / 2)) / (math.pi / 2))
        # jets against values on a small circle
        r = 0.05 * L.shortest_period
        zc = r * np.exp(2j * np.pi * np.arange(16) / 16)
        jet = 0.0
        for which, fn in ((ell.Which.WP, ell.wp), (ell.Which.WP_PRIME, ell.wp_prime), (ell.Which.ZETA, ell.zeta)):
            j = ell.laurent_at_origin(L, which, 24)
            v = fn(L, zc)
            jet = max(jet, float(np.max(np.abs(j(zc) - v) / np.abs(v))))
        row = dict(ode=float(ode), legendre=leg, quasi=float(quasi), jet=jet)
        for k in worst:
            worst[k] = max(worst[k], row[k])
        table.rows.append([i, L.omega1.real, L.omega1.imag, L.omega2.real, L.omega2.imag, row["ode"], leg, row["quasi"], jet])
    res = SuiteResult(tables={"elliptic": table})
    res.checks += [
        below("elliptic.wp_ode", worst["ode"], _tol(tols, "wp_ode")),
        below("elliptic.legendre", worst["legendre"], _tol(tols, "legendre")),
        below("elliptic.quasi_periodicity", worst["quasi"], _tol(tols, "quasi_periodicity")),
        below("elliptic.jet_vs_value", worst["jet"], _tol(tols, "jet_vs_value")),
    ]
    if lattice is not None:
        res.info["lattice"] = {"g2": [lattice.g2.real, lattice.g2.imag], "g3": [lattice.g3.real, lattice.g3.imag]}
        if is_square(lattice):
            res.checks.append(below("elliptic.square_g3", abs(lattice.g3) / abs(lattice.g2) ** 1.5, _tol(tols, "square_g3")))
    return res


def is_square(L: ell.LatticeSpec) -> bool:
    a, b = L.red_omega
    t = b / a
    return abs(abs(t) - 1) < 1e-12 and abs(t.real) < 1e-12


# ------------------------------------------------------------- commutant


def constant_control(n_sites: int = 48, c: complex = 0.7, v: complex = 0.3, u: complex = 0.2) -> tuple[int, float]:
    w = Window(0, n_sites - 1)
    L2 = from_bands(w, {1: 1.0, 0: v, -1: c})
    sq = compose(L2, L2)
    L4 = lincomb([(1.0, sq), (1.0, restrict_valid(diag(Seq(w, np.full(n_sites, u, dtype=complex))), sq.valid))])
    return construction.commutant_nullity(L4)


def commute_suite(L: ell.LatticeSpec, seeds: list[int], n_sites: int = 48, gen: dict | None = None, tols: dict | None = None) -> SuiteResult:
    gen = gen or {}
    table = Table(["seed", "basis_dim", "gap", "interior", "partner_residual", "g2_rel_err", "g3_rel_err", "curve_residual", "max_abs_c"])
    dims, gaps, res6, e2, e3, cres, interiors = [], [], [], [], [], [], []
    for s in seeds:
        d = construction.generate_inverse_data(L, n_sites, s, **gen)
        der = construction.derive(d)
        L4 = construction.build_Llambda(d, der)
        cr = construction.find_commuting_partner(L4)
        fit = construction.fit_spectral_curve(L4, cr.L6)
        g2e = abs(fit.g2_hat - L.g2) / abs(L.g2)
        g3e = abs(fit.g3_hat - L.g3) / max(abs(L.g3), 1e-300)
        cmax = float(np.nanmax(np.abs(der.c_coeff.values)))
        dims.append(cr.basis_dim)
        gaps.append(cr.gap)
        res6.append(cr.residual)
        e2.append(g2e)
        e3.append(g3e)
        cres.append(fit.residual)
        interiors.append(cr.interior.size)
        table.rows.append([s, cr.basis_dim, cr.gap, cr.interior.size, cr.residual, g2e, g3e, fit.residual, cmax])
    nul, _ = constant_control(n_sites)
    res = SuiteResult(tables={"commute_scan": table})
    res.checks += [
        equals("commute.basis_dim_all_3", int(all(x == 3 for x in dims)), 1),
        above("commute.interior_min", min(interiors), 24, strict=False),
        above("commute.gap_min", min(gaps), _tol(tols, "commutant_gap"), strict=False),
        below("commute.partner_residual_max", max(res6), _tol(tols, "partner_residual")),
        equals("commute.constant_control_nullity", nul, 7),
        below("curve.g2_rel_err_max", max(e2), _tol(tols, "curve_invariants")),
        below("curve.g3_rel_err_max", max(e3), _tol(tols, "curve_invariants")),
        below("curve.residual_max", max(cres), _tol(tols, "curve_residual")),
    ]
    return res


# ------------------------------------------------------------------ baker


FORMULAS = ("alpha", "c", "kappa", "u", "b", "L_lambda")


def ba_suite(d: construction.InverseData, n_max: int = 10, n_check: int = 6, n_kappa: int = 4, seed: int = 0, tols: dict | None = None) -> tuple[SuiteResult, baker.BAVerification]:
    ver = baker.verify_ba(d, n_max=n_max, seed=seed, tol=_tol(tols, "route_agreement"))
    sites = [r for r in ver.sites if r.n <= n_check]
    table = Table(["n", "solve_residual", "uniqueness_gap", "eigen_residual_wp", "eigen_residual_wpp", "kappa_re", "kappa_im", "gamma_hat_err", "alpha_hat_err"])
    for r in ver.sites:
        table.rows.append([r.n, r.solve_residual, r.uniqueness_gap, r.eigen_residual_wp, r.eigen_residual_wpp, r.kappa.real, r.kappa.imag, r.gamma_hat_err, r.alpha_hat_err])
    disc = Table(["formula", "variant", "data", "max_rel_err", "worst_site", "n_sites", "pass"])
    for x in ver.discrepancies:
        disc.rows.append([x.formula, x.variant, x.data, x.max_rel_err, x.worst_site, x.n_sites, int(x.passed)])
    der = construction.derive(d)
    stab = Table(["n", "kappa_re", "kappa_im", "kappa_deeper_re", "kappa_deeper_im", "rel_change"])
    worst_stab, finite = 0.0, True
    for n in range(n_kappa + 1):
        k0, k1, rel = baker.kappa_stability(d, der, n)
        finite &= bool(np.isfinite(k0) and np.isfinite(k1))
        worst_stab = max(worst_stab, rel)
        stab.rows.append([n, k0.real, k0.imag, k1.real, k1.imag, rel])
    covered = {x.formula for x in ver.discrepancies}
    res = SuiteResult(tables={"ba_sites": table, "discrepancy": disc, "kappa": stab})
    res.checks += [
        below("ba.solve_residual_max", max(r.solve_residual for r in sites), _tol(tols, "solve_residual")),
        above("ba.uniqueness_gap_min", min(r.uniqueness_gap for r in sites), _tol(tols, "uniqueness_gap")),
        below("ba.eigen_residual_llambda", ver.eig_llambda, _tol(tols, "eigen_residual")),
        below("ba.eigen_residual_wpp_fit", ver.eig_wpp, _tol(tols, "eigen_residual")),
        below("ba.route_agreement_llambda", ver.route_err, _tol(tols, "route_agreement")),
        below("ba.fit_commutator", ver.commutator_rel, _tol(tols, "fit_commutator")),
        equals("ba.discrepancy_report_complete", int(covered >= set(FORMULAS)), 1),
        below("tyurin.gamma_sum", ver.sum_err, _tol(tols, "gamma_sum")),
        below("tyurin.alpha_hat", ver.alpha_err, _tol(tols, "alpha_hat")),
        below("tyurin.residue_ratio", ver.residue_err, _tol(tols, "residue_ratio")),
        equals("kappa.finite", int(finite), 1),
        below("kappa.stability", worst_stab, _tol(tols, "kappa_stability")),
    ]
    res.info["v_label"] = ver.effective.v_label
    res.info["v_label_errors"] = ver.effective.v_label_errors
    res.info["input_route"] = {
        x.formula: x.max_rel_err for x in ver.discrepancies if x.data == "input" and x.variant == "corrected"
    }
    return res, ver


def structural_suite(ver: baker.BAVerification, seed: int = 0, tols: dict | None = None) -> SuiteResult:
    rng = np.random.default_rng(seed + 7)
    violations = 0
    counts_ok = True
    for l in (2, 3, 4):
        S = 5
        a = [[rng.normal(size=rng.integers(1, 3)) + 1j * rng.normal(size=1) for _ in range(l)] for _ in range(S)]
        for row in a:
            row[0] = row[0][:1]
        w = rng.normal(size=(S, l)) + 0j
        cq = rng.normal(size=(S, l)) + 0j
        H = flows.build_hierarchy_matrices(l, a, w, cq)
        violations += len(flows.validate_hierarchy(H, a, w, cq))
        counts_ok &= all(flows.structural_nonzeros(M) == 2 * l - 1 for M in H.m_minus[1:])
    # M_n against chi_n on the BA's own data: c from the closed form, v from the jets
    eff = ver.effective.data
    c = construction.derive(eff).c_coeff.values
    v = eff.v.values
    sites = [ch.n for ch in ver.chis if ch.n >= 1 and ch.n + 1 < len(v)]
    a, w, cq = flows.l2_hierarchy(c, v, sites)
    H = flows.build_hierarchy_matrices(2, a, w, cq, n0=sites[0])
    violations += len(flows.validate_hierarchy(H, a, w, cq))
    table = Table(["n", "m_consistency"])
    worst = 0.0
    for k, n in enumerate(sites):
        e = flows.m_consistency(ver.chis[n], H.m_plus[k], v[n], v[n + 1])
        worst = max(worst, e)
        table.rows.append([n, e])
    res = SuiteResult(tables={"m_consistency": table})
    res.checks += [
        equals("structure.hierarchy_violations", violations, 0),
        equals("structure.m_minus_nonzeros", int(counts_ok), 1),
        below("structure.m_consistency", worst, _tol(tols, "m_consistency")),
    ]
    return res


# ------------------------------------------------------------------ flows


def flow_suite(P: int = 16, dt: float = 1e-3, t_end: float = 10.0, seed: int = 0, sample_every: int = 100, dt_ref: float = 1e-5, kappa: flows.KappaProvider | None = None, tols: dict | None = None) -> SuiteResult:
    kp = kappa or flows.KappaProvider()
    s0 = flows.random_state(P, seed)
    I0 = flows.invariants(s0)
    table = Table(["t", "I1", "I2", "monodromy_trace", "max_abs_c", "max_abs_v", "I1_im", "I2_im", "monodromy_trace_im"])
    drift = {"I1": 0.0, "I2": 0.0, "monodromy_trace": 0.0}

    def sample(s):
        I = flows.invariants(s)
        for k in drift:
            drift[k] = max(drift[k], abs(I[k] - I0[k]))
        table.rows.append([
            s.t, I["I1"].real, I["I2"].real, I["monodromy_trace"].real,
            float(np.max(np.abs(s.c.values))), float(np.max(np.abs(s.v.values))),
            I["I1"].imag, I["I2"].imag, I["monodromy_trace"].imag,
        ])

    flows.integrate(s0, dt, t_end, kp, every=sample_every, on_sample=sample)
    order = flows.convergence_order(s0, kp, dt_ref=dt_ref)
    res = SuiteResult(tables={"flow": table})
    res.checks += [
        below("flow.I1_drift", drift["I1"], _tol(tols, "flow_linear_drift")),
        below("flow.I2_drift", drift["I2"], _tol(tols, "flow_quadratic_drift")),
        below("flow.monodromy_drift", drift["monodromy_trace"], _tol(tols, "monodromy_drift")),
        within("flow.rk4_order", order, _tol(tols, "rk4_order_lo"), _tol(tols, "rk4_order_hi")),
    ]
    res.info["monodromy_lambda"] = flows.MONODROMY_LAMBDA
    return res
