"""Commutant nullity and singular-value gap of [L4, X] as the window grows.

    python scripts/window_scan.py --seed 0 --sizes 24 32 48 64
"""
import argparse

from rank2ops import construction as C
from rank2ops import elliptic as ell
from rank2ops.errors import Rank2Error


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sizes", type=int, nargs="+", default=[24, 32, 48, 64])
    p.add_argument("--tau", type=complex, default=0.3 + 1.1j)
    a = p.parse_args()
    L = ell.make_lattice(1.0, a.tau)
    print(f"{'sites':>6} {'nullity':>8} {'gap':>10} {'printed':>8} {'residual':>10} {'g2 err':>10}")
    for n in a.sizes:
        d = C.generate_inverse_data(L, n, a.seed)
        L4 = C.build_Llambda(d, C.derive(d))
        dim, gap = C.commutant_nullity(L4)
        pdim, _ = C.commutant_nullity(C.build_Llambda(d, C.derive(d, C.Variant.PRINTED)))
        try:
            cr = C.find_commuting_partner(L4)
            fit = C.fit_spectral_curve(L4, cr.L6)
            res, g2e = cr.residual, abs(fit.g2_hat - L.g2) / abs(L.g2)
        except Rank2Error as exc:
            print(f"{n:>6} {dim:>8} {gap:>10.3g} {pdim:>8}  {type(exc).__name__}")
            continue
        print(f"{n:>6} {dim:>8} {gap:>10.3g} {pdim:>8} {res:>10.3g} {g2e:>10.3g}")


if __name__ == "__main__":
    main()
