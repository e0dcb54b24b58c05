"""Approximate the Koenigs function of the slit translation.

For ``phi = h^-1(h + 1)`` with ``h(z) = ((1 + z)/(1 - z))^2`` the Koenigs
function normalised at the origin is ``h - 1``, so the approximation error
can be measured exactly.  The index interpolant of order 1 is the plain
two-point quotient; higher orders converge much faster.
"""

import numpy as np

from koenigs.dsl import parse
from koenigs.linearize import koenigs_bp
from koenigs.numerics import sample_grid

PHI = parse("compose(icayley(tau=1, to=RH), sqrt(((1 + z) / (1 - z))^2 + 1))")


def exact(z):
    return ((1 + z) / (1 - z)) ** 2 - 1


def main():
    z = sample_grid()
    print(f"{'n':>6}{'order 1':>14}{'order 3':>14}{'order 8':>14}")
    for n in (256, 1024, 2048):
        errs = [np.max(np.abs(koenigs_bp(PHI, n, order=p)(z) - exact(z))) for p in (1, 3, 8)]
        print(f"{n:>6}" + "".join(f"{e:>14.3e}" for e in errs))
    b = koenigs_bp(PHI, 2048)
    print(f"\nAbel residual |b(phi z) - b(z) - 1| on the grid: max {b.residual_max:.2e}")


if __name__ == "__main__":
    main()
