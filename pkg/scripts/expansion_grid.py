"""Fit the leading energy coefficient on sliding hole-radius windows to show where the asymptotic regime starts."""
import argparse

import numpy as np

from crownlab.crown import bubble
from crownlab.energy import constants
from crownlab.kelvin import ReducedPoint
from crownlab.reduced import d_critical, expansion_check


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--top", default="-2,-3,-4,-5", help="log10 of the largest radius in each window, e.g. --top=-2,-4")
    args = ap.parse_args()
    U = bubble(args.n)
    c = constants(args.n)
    n = args.n
    d0 = d_critical(np.zeros(n), (0, 0), (0,) * (2 * n - 3), c, U)
    print(f"{'window':>16s} {'K/Psi':>8s} {'slope':>7s}")
    for top in (int(s) for s in args.top.split(",")):
        eps = [10.0 ** (top - i) for i in range(4)]
        rep = expansion_check(ReducedPoint.origin(n, d0), eps, c, U)
        print(f"{f'1e{top}..1e{top - 3}':>16s} {rep.coefficient / rep.target_coefficient:8.4f} {rep.exponent:7.3f}")


if __name__ == "__main__":
    main()
