"""Classify a handful of disc self-maps and look at their hyperbolic step.

Every non-elliptic map drives its orbits to a boundary point.  Whether
consecutive orbit points stay a fixed hyperbolic distance apart (positive
step) or crowd together (zero step) is read off two sequences: the
normalised distortion ``D_n`` and the step length ``q_n``.
"""

from koenigs.dsl import parse
from koenigs.dynamics import classify, step_analysis

MAPS = {
    "affine contraction": "(z + 1) / 2",
    "quadratic": "(1 + z^2) / 2",
    "slit translation": "compose(icayley(tau=1, to=RH), sqrt(((1 + z) / (1 - z))^2 + 1))",
    "upper half-plane shift": "compose(icayley(tau=1, to=H), cayley(tau=1, to=H) + 1)",
    "interior attractor": "z / (2 - z)",
}


def main():
    print(f"{'map':<24}{'type':<12}{'DW point':<22}{'multiplier':>12}  step")
    for name, src in MAPS.items():
        phi = parse(src)
        rep = classify(phi)
        step = step_analysis(phi) if rep.kind == "boundary" else None
        dw = f"{rep.location.real + 0:+.6f}{rep.location.imag + 0:+.6f}i"
        print(f"{name:<24}{rep.type_label:<12}{dw:<22}{rep.multiplier:>12.6f}  {step.decision if step else '-'}")

    # the two sequences behind one decision
    quad = step_analysis(parse(MAPS["quadratic"]))
    # seed 0 is critical (phi'(0) = 0), so use the next one
    first = quad.reports[1]
    print(f"\nquadratic map, seed {first.seed}:")
    for k in (1, 16, 256, len(first.q) - 1):
        print(f"  n={k:<5d} D_n={first.distortion[k]:.3e}  q_n={first.q[k]:.3e}")


if __name__ == "__main__":
    main()
