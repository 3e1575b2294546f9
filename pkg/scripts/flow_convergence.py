"""RK4 self-convergence and invariant drift for the kappa = 0 Toda reduction."""
import argparse

import numpy as np

from rank2ops import flows as F


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--P", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--t-end", type=float, default=1.0)
    a = p.parse_args()
    s0 = F.random_state(a.P, a.seed)
    kp = F.KappaProvider()
    ref = F.integrate(s0, 1e-5, a.t_end, kp)
    I0 = F.invariants(s0)
    prev = None
    print(f"{'dt':>8} {'error':>10} {'order':>6} {'dI2':>10} {'dtrace':>10}")
    for dt in (4e-2, 2e-2, 1e-2, 5e-3, 2.5e-3):
        s = F.integrate(s0, dt, a.t_end, kp)
        err = np.max(np.abs(np.r_[s.c.values - ref.c.values, s.v.values - ref.v.values]))
        I = F.invariants(s)
        order = "" if prev is None else f"{np.log2(prev / err):.2f}"
        print(f"{dt:>8g} {err:>10.3g} {order:>6} {abs(I['I2'] - I0['I2']):>10.3g} {abs(I['monodromy_trace'] - I0['monodromy_trace']):>10.3g}")
        prev = err


if __name__ == "__main__":
    main()
