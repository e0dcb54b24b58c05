"""One-parameter semigroups ``phi_t = h^{-1}(h + t e^{i theta})``.

``h`` is one of a few registered univalent maps of the disc whose image
``Omega`` is mapped into itself by the translation ``w -> w + t e^{i theta}``
for every ``t >= 0``.  The infinitesimal generator is
``G(z) = e^{i theta} / h'(z)``.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .core import Cayley, CayleyInverse, Const, MapExpr, Var, compose, derivative, evaluate
from .dsl import parse
from .dynamics import classify
from .errors import DomainError, InconclusiveError, PreconditionError
from .numerics import sample_grid

ADMISSIBLE_SLACK = 1e-12
LAW_TOL = 1e-10
GENERATOR_DELTA = 1e-4
GENERATOR_UNSTABLE = 1e-4


@dataclass(frozen=True)
class Registered:
    name: str
    h: MapExpr
    h_inv: MapExpr
    domain: str  # "slit", "right" or "upper"
    in_domain: Callable = field(compare=False, repr=False)


def _slit(w):
    w = np.asarray(w, dtype=complex)
    return ~((w.imag == 0) & (w.real <= 0))


REGISTRY = {
    "slit": Registered(
        "slit",
        parse("((1 + z) / (1 - z))^2"),
        parse("compose(icayley(tau=1, to=RH), sqrt(z))"),
        "slit",
        _slit,
    ),
    "cayley-rh": Registered(
        "cayley-rh", Cayley(1, "RH"), CayleyInverse(1, "RH"), "right", lambda w: np.asarray(w).real > 0
    ),
    "cayley-h": Registered(
        "cayley-h", Cayley(1, "H"), CayleyInverse(1, "H"), "upper", lambda w: np.asarray(w).imag > 0
    ),
}


def lookup(h: Union[str, MapExpr, Registered]) -> Registered:
    if isinstance(h, Registered):
        return h
    if isinstance(h, str):
        if h not in REGISTRY:
            raise DomainError(f"unknown univalent map {h!r}; choose from {', '.join(REGISTRY)}")
        return REGISTRY[h]
    for reg in REGISTRY.values():
        if reg.h == h:
            return reg
    raise DomainError("h is not one of the registered univalent maps")


def admissible(reg: Registered, theta: float) -> bool:
    """Does ``Omega + t e^{i theta}`` stay inside ``Omega`` for all ``t >= 0``?"""
    c, s = math.cos(theta), math.sin(theta)
    if reg.domain == "slit":
        return abs(s) <= ADMISSIBLE_SLACK and c > 0
    if reg.domain == "right":
        return c >= -ADMISSIBLE_SLACK
    return s >= -ADMISSIBLE_SLACK


_VIOLATION = {
    "slit": "Omega + t e^(i theta) leaves C minus (-inf, 0] unless theta = 0",
    "right": "Omega + t e^(i theta) leaves Re w > 0 when cos(theta) < 0",
    "upper": "Omega + t e^(i theta) leaves Im w > 0 when sin(theta) < 0",
}


@dataclass
class SemigroupFamily:
    """The family ``t -> phi_t`` for one registered ``h`` and direction."""

    reg: Registered
    theta: float
    validity: dict = field(default_factory=dict)

    @property
    def direction(self) -> complex:
        return cmath.exp(1j * self.theta)

    def at(self, t: float) -> MapExpr:
        if t < 0:
            raise DomainError("semigroup parameter must be non-negative")
        shift = Const(_clean(t * self.direction))
        return compose(self.reg.h_inv, self.reg.h + shift)

    def generator(self, z):
        """Closed-form generator ``e^{i theta} / h'(z)``."""
        return self.direction / derivative(self.reg.h, z)


def _clean(c: complex) -> complex:
    # cos(pi/2) is 6e-17, not 0; keep pure directions exact
    re = 0.0 if abs(c.real) < 1e-15 * abs(c) else c.real
    im = 0.0 if abs(c.imag) < 1e-15 * abs(c) else c.imag
    return complex(re, im)


def build_family(h: Union[str, MapExpr], theta: float, grid=None) -> SemigroupFamily:
    """Semigroup family, validated on a sample before it is returned.

    Raises :class:`DomainError` when ``theta`` points out of ``Omega``.
    """
    reg = lookup(h)
    if not admissible(reg, theta):
        raise DomainError(f"inadmissible direction: {_VIOLATION[reg.domain]}")
    fam = SemigroupFamily(reg, float(theta))
    z = sample_grid(grid)
    identity = float(np.max(np.abs(evaluate(fam.at(0.0), z) - z)))
    law = 0.0
    for s in (0.25, 0.5, 1.0):
        for t in (0.25, 0.5, 1.0):
            lhs = evaluate(fam.at(s + t), z)
            rhs = evaluate(fam.at(s), evaluate(fam.at(t), z))
            law = max(law, float(np.max(np.abs(lhs - rhs))))
    fam.validity = {"identity_residual": identity, "law_residual": law, "valid": max(identity, law) <= LAW_TOL}
    return fam


@dataclass(frozen=True)
class GeneratorEstimate:
    value: complex
    error: float
    closed_form: complex
    flags: tuple = ()


def generator_estimate(fam: SemigroupFamily, z: complex, delta: float = GENERATOR_DELTA) -> GeneratorEstimate:
    """One-sided second-order difference ``(-3 phi_0 + 4 phi_d - phi_2d) / 2d``.

    The error estimate compares steps ``delta`` and ``delta / 2``.
    """
    z = complex(z)

    def diff(d):
        a = z
        b = complex(evaluate(fam.at(d), z))
        c = complex(evaluate(fam.at(2 * d), z))
        return (-3 * a + 4 * b - c) / (2 * d)

    g1, g2 = diff(delta), diff(delta / 2)
    err = abs(g1 - g2)
    flags = ("unstable-difference",) if err > GENERATOR_UNSTABLE else ()
    return GeneratorEstimate(g2, err, complex(fam.generator(z)), flags)


@dataclass(frozen=True)
class SemigroupStep:
    decision: str
    times: np.ndarray
    F: np.ndarray
    monotone: bool
    flags: tuple = ()


def zero_step_semigroup_check(fam: SemigroupFamily, z: complex = 0j, t_max: float = 4096.0) -> SemigroupStep:
    """Decide the step of the semigroup from ``F(t) = |G(phi_t z)| / (1 - |phi_t z|^2)``.

    ``F`` is sampled at ``t = 2^j``; zero when it ends below 0.02 after at
    least a tenfold decay, positive when it settles above 0.1.
    """
    if t_max < 1:
        raise DomainError("t_max must be at least 1")
    if classify(fam.at(1.0)).kind != "boundary":
        raise PreconditionError("semigroup is elliptic; the step criterion needs a boundary Denjoy-Wolff point")
    times = 2.0 ** np.arange(0, int(math.ceil(math.log2(t_max))) + 1)
    vals = []
    for t in times:
        w = complex(evaluate(fam.at(float(t)), z))
        gap = (1 - abs(w)) * (1 + abs(w))
        if gap < 1e-12:
            break
        vals.append(abs(fam.generator(w)) / gap)
    F = np.array(vals)
    if len(F) < 4:
        raise InconclusiveError("semigroup orbit reached the boundary too early")
    times = times[: len(F)]
    monotone = bool(np.all(np.diff(F) <= 1e-9 * F[:-1]))
    tail = F[-max(len(F) // 4, 2) :]
    drift = float((tail.max() - tail.min()) / tail.mean())
    if F[-1] < 0.02 and F[0] >= 10 * F[-1]:
        decision = "zero"
    elif F[-1] >= 0.1 and drift < 0.01:
        decision = "positive"
    else:
        decision = "inconclusive"
    flags = () if monotone else ("not-monotone",)
    return SemigroupStep(decision, times, F, monotone, flags)


@dataclass(frozen=True)
class EmbedResult:
    t0: float
    residual: float
    embeddable: bool


def embed_search(
    phi: MapExpr,
    fam: SemigroupFamily,
    t_range: tuple = (0.0, 4.0),
    grid=None,
    xtol: float = 1e-13,
    tol: float = 1e-8,
) -> EmbedResult:
    """Golden-section search for ``t0`` minimising ``max |phi - phi_t|``.

    Assumes the misfit is unimodal on ``t_range``.  ``embeddable`` means the
    minimum misfit is below ``tol``.
    """
    lo, hi = map(float, t_range)
    if not 0 <= lo < hi:
        raise DomainError("t_range must satisfy 0 <= lo < hi")
    z = sample_grid(grid)
    target = evaluate(phi, z)

    def misfit(t):
        return float(np.max(np.abs(evaluate(fam.at(t), z) - target)))

    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = misfit(c), misfit(d)
    while b - a > xtol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = misfit(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = misfit(d)
    t0 = (a + b) / 2
    res = misfit(t0)
    for edge in (lo, hi):
        r = misfit(edge)
        if r < res:
            t0, res = edge, r
    return EmbedResult(t0, res, res < tol)


__all__ = [
    "REGISTRY",
    "Registered",
    "SemigroupFamily",
    "build_family",
    "admissible",
    "generator_estimate",
    "zero_step_semigroup_check",
    "embed_search",
    "GeneratorEstimate",
    "SemigroupStep",
    "EmbedResult",
    "Var",
]
