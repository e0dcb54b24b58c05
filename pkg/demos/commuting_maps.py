"""Linear coefficients of maps that commute with a parabolic map.

If ``psi`` commutes with ``phi`` then the Koenigs function ``h`` of ``phi``
satisfies ``h(psi z) = h(z) + c``.  Three independent estimators recover
``c``; a map that merely shares ``h``-differences but does not commute
(``psi = -phi`` for the quadratic map) shows why commutation is checked.
"""

import numpy as np

from koenigs.core import compose, evaluate
from koenigs.dsl import parse
from koenigs.linearize import commute_residual, koenigs_bp, slc_estimate
from koenigs.numerics import sample_grid
from koenigs.semigroup import build_family


def main():
    fam = build_family("slit", 0.0)
    phi = fam.at(1.0)
    for t in (0.5, 2.5):
        rep = slc_estimate(phi, fam.at(t))
        parts = ", ".join(f"{m} {e.value.real:.8f}" for m, e in rep.methods.items())
        print(f"psi = phi_{t}: c = {rep.value.real:.10f}  ({parts})")

    both = compose(fam.at(0.5), fam.at(2.5))
    print(f"psi = phi_0.5 o phi_2.5: c = {slc_estimate(phi, both, ('koenigs',)).value.real:.10f}")

    quad = parse("(1 + z^2) / 2")
    neg = parse("neg((1 + z^2) / 2)")
    z = sample_grid()
    b = koenigs_bp(quad, 2048)
    diff = b(evaluate(neg, z)) - b(z)
    print(f"\nquadratic vs its negative: commutator at 0 = {commute_residual(quad, neg, [0j]):.4f}")
    print(f"  yet b(psi z) - b(z) = {np.mean(diff).real:.4f} +/- {np.max(np.abs(diff - 1)):.1e} on the grid")


if __name__ == "__main__":
    main()
