"""Scan the weight exponents of both convolution bounds and report how stable the products stay."""
import argparse

from crownlab.appendix import convolution_bound_a, convolution_bound_b


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--exponents", default="0.25,0.5,0.75,0.9,1.0")
    args = ap.parse_args()
    print(f"{'kind':4s} {'exp':>6s} {'constant':>12s} {'spread':>8s} note")
    for e in (float(s) for s in args.exponents.split(",")):
        if e < args.n - 2:
            r = convolution_bound_a(args.n, e)
            print(f"{'a':4s} {e:6.3f} {r.constant:12.5g} {r.final_decade_spread:8.3f}")
        else:
            print(f"{'a':4s} {e:6.3f} {'':>12s} {'':>8s} exponent too large for a convergent bound")
        r = convolution_bound_b(args.n, e)
        note = "divergent" if r.divergent else ""
        print(f"{'b':4s} {e:6.3f} {r.constant:12.5g} {r.final_decade_spread:8.3f} {note}")


if __name__ == "__main__":
    main()
