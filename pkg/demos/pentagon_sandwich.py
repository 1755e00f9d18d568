"""Uniform ray of the pentagon: STAB, theta body and E^n thresholds."""
import math

import numpy as np

from exwb import exgraph as eg
from exwb import polytope as pt
from exwb import thetabody as tb


def main():
    c5 = eg.cycle_graph(5)
    print(f"theta(C5) = {tb.theta_number(c5):.9f}   (sqrt5 = {math.sqrt(5):.9f})")
    rep = tb.sandwich_report(c5, 3)
    print(f"STAB threshold l1 = {rep.lower:.6f}, TH threshold t = {rep.theta:.6f}")
    for k, u in sorted(rep.upper.items()):
        print(f"  E^{k} threshold u{k} = {u:.6f}  (clique number of C5^{k}: {rep.clique_numbers[k]})")
    # u3 > u2: E^{n+1} need not sit inside E^n, only E^{kn} inside E^n
    print(f"divisibility monotone: {rep.upper_divisible}, plain monotone: {rep.upper_monotone}")
    for c in (0.40, 0.447, 0.45, 0.46, 0.5):
        w = np.full(5, c)
        row = [pt.in_stab(c5, w).member, tb.in_theta_body(c5, w).status,
               pt.in_E_n(c5, w, 2).member, pt.in_E_n(c5, w, 1).member]
        print(f"  c={c:.3f}: STAB {row[0]!s:5s} TH {row[1]:10s} E2 {row[2]!s:5s} E1 {row[3]}")
    d = tb.antiblocker_duality_check(c5, samples=10, seed=0)
    print(f"antiblocker duality on C5: max p.q = {d.max_value:.8f} ({'ok' if d.passed else 'FAILED'})")


if __name__ == "__main__":
    main()
