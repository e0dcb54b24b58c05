"""Denjoy-Wolff point, classification and hyperbolic step of a self-map.

Classification labels: ``identity``, ``elliptic`` (interior attracting fixed
point), ``elliptic-automorphism``, ``hyperbolic`` (boundary point with
multiplier below one) and ``parabolic`` (multiplier one).

The step of a boundary map is decided from two sequences along an orbit
``z_n``:

* the distortion ``D_n = (1 - |z_0|^2) |(phi^n)'(z_0)| / (1 - |z_n|^2)``,
  which tends to zero exactly when the step is zero;
* ``q_n = rho(z_n, z_{n+1})``, the hyperbolic length of one step.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .core import MapExpr, evaluate, iterate, jet
from .errors import (
    AmbiguityError,
    DomainError,
    InconclusiveError,
    InstabilityError,
    KoenigsError,
    NumericOverflow,
)
from .metric import hyperbolic
from .numerics import RADIAL_LEVELS, pseudo_distance, richardson, sample_grid

DW_SEEDS = (0j, 0.1 + 0j, -0.1 + 0j, 0.1j, -0.1j)
STEP_SEEDS = (0j, 0.3 + 0j, -0.3 + 0.2j, 0.25j, -0.1 - 0.4j)
N_MAX = 4096

TOL_MULT = 1e-4
SEED_TOL = 1e-6
IDENTITY_TOL = 1e-13
AUTOMORPHISM_TOL = 1e-10
FIXED_POINT_TOL = 1e-13
INTERIOR_MARGIN = 1e-9
SIMPLE_ROOT = 1e-6
# orbit points closer than this to the circle carry no usable information
HORIZON = 1e-9

# decision thresholds for the distortion and q sequences
ZERO_LAST = 0.02
ZERO_DECAY = 10.0
POSITIVE_FLOOR = 0.1
DRIFT = 0.01
Q_ZERO = 1e-3

_EVAL_ERRORS = (KoenigsError, ArithmeticError, ValueError)


@dataclass(frozen=True)
class DWReport:
    """Location and type of the Denjoy-Wolff point."""

    location: complex
    kind: str  # "interior" or "boundary"
    multiplier: float
    type_label: str
    automorphism: bool = False
    multiplier_error: float = 0.0
    residual: float = 0.0
    seed_spread: float = 0.0
    flags: tuple = ()


# ------------------------------------------------------------------ probes


def _rng_pairs(n: int = 64, seed: int = 7):
    rng = np.random.default_rng(seed)
    r = 0.9 * np.sqrt(rng.random((2, n)))
    t = 2 * np.pi * rng.random((2, n))
    pts = r * np.exp(1j * t)
    return pts[0], pts[1]


def is_identity(phi: MapExpr, tol: float = IDENTITY_TOL) -> bool:
    z = sample_grid()
    return bool(np.max(np.abs(evaluate(phi, z) - z)) <= tol)


def is_automorphism(phi: MapExpr, tol: float = AUTOMORPHISM_TOL) -> bool:
    """Equality in the Schwarz-Pick inequality on 64 random pairs."""
    z, w = _rng_pairs()
    try:
        before = pseudo_distance(z, w)
        after = pseudo_distance(evaluate(phi, z), evaluate(phi, w))
    except _EVAL_ERRORS:
        return False
    return bool(np.max(np.abs(after - before)) <= tol)


def _newton(phi: MapExpr, z: complex, m: int = 1, steps: int = 60):
    """Newton on ``phi(z) - z`` with multiplicity ``m``; returns the best
    iterate inside the closed disc and its residual."""
    best, best_res = None, math.inf
    for _ in range(steps):
        try:
            v, d = jet(phi, z)
        except _EVAL_ERRORS:
            break
        g = v - z
        res = abs(g)
        if res < best_res and abs(z) <= 1 + 1e-12:
            best, best_res = z, res
        if res == 0 or d == 1:
            break
        nz = z - m * g / (d - 1)
        if not cmath.isfinite(nz) or abs(nz) > 1.5:
            break
        if abs(nz - z) < 1e-16:
            break
        z = nz
    return best, best_res


def interior_fixed_point(phi: MapExpr, starts: Sequence[complex]) -> Optional[complex]:
    """An interior fixed point reached by Newton from ``starts``, if any.

    Only simple roots count: near a boundary fixed point Newton creeps
    along ``phi'(z) ~ 1`` and can stall just inside the disc.
    """
    for s in starts:
        p, res = _newton(phi, complex(s))
        if p is None or abs(p) >= 1 - INTERIOR_MARGIN or res >= FIXED_POINT_TOL:
            continue
        if abs(jet(phi, p)[1] - 1) > SIMPLE_ROOT:
            return p
    return None


def _horizon_stop(k, z):
    return 1 - abs(z) < 1e-13


def _direction(points: np.ndarray) -> complex:
    """Limit direction of an orbit converging to the circle.

    Assumes the argument approaches its limit like a power of ``n`` and
    extrapolates from the indices ``L/4, L/2, L``.
    """
    last = len(points) - 1
    tail = points[last]
    theta3 = cmath.phase(tail)
    if last < 8:
        return tail / abs(tail)
    t1 = cmath.phase(points[last // 4])
    t2 = cmath.phase(points[last // 2])
    d1 = math.remainder(t2 - t1, 2 * math.pi)
    d2 = math.remainder(theta3 - t2, 2 * math.pi)
    theta = theta3
    if abs(d1) > 0 and abs(d2) > 1e-15:
        ratio = d2 / d1
        if 0 < ratio < 1:
            theta = theta3 + ratio * d2 / (1 - ratio)
    return cmath.exp(1j * theta)


def _refine_boundary(phi: MapExpr, z: complex, guess: complex) -> complex:
    """Snap ``guess`` to a boundary fixed point found by Newton, if close."""
    for m in (1, 2, 3):
        p, res = _newton(phi, z, m=m)
        if p is not None and res < 1e-12 and abs(abs(p) - 1) < 1e-9 and abs(p - guess) < 1e-4:
            return p / abs(p)
    return guess


def estimate_dw(
    phi: MapExpr, seeds: Sequence[complex] = DW_SEEDS, n_max: int = N_MAX
) -> tuple[complex, str, float]:
    """Denjoy-Wolff point from orbits of several seeds.

    Returns ``(location, kind, spread)`` where ``kind`` is ``"interior"`` or
    ``"boundary"``.  Raises :class:`AmbiguityError` when the seeds disagree
    by more than ``SEED_TOL``.
    """
    finals = []
    orbits = []
    for s in seeds:
        try:
            orb = iterate(phi, s, n_max, stop=_horizon_stop)
        except InstabilityError:
            raise
        orbits.append(orb)
        finals.append(orb.points[-1])
    p = interior_fixed_point(phi, list(finals) + [0j] + list(seeds))
    if p is not None:
        return p, "interior", max(abs(f - p) for f in finals)
    estimates = []
    for orb in orbits:
        guess = _direction(orb.points)
        estimates.append(_refine_boundary(phi, orb.points[-1], guess))
    est = np.array(estimates)
    centre = est.mean()
    centre /= abs(centre)
    spread = float(np.max(np.abs(est - centre)))
    if spread > SEED_TOL:
        raise AmbiguityError(f"seeds disagree on the Denjoy-Wolff point (spread {spread:.3g})")
    return complex(centre), "boundary", spread


def estimate_multiplier(phi: MapExpr, tau: complex, levels=tuple(range(4, 17))) -> tuple[float, float]:
    """Angular derivative at the boundary point ``tau``.

    Radial limit of ``phi'(r tau)`` over ``r_k = 1 - 2**-k``, with two
    Richardson passes.  Returns ``(value, error estimate)``.
    """
    vals = []
    for k in levels:
        try:
            vals.append(jet(phi, (1 - 2.0**-k) * tau)[1])
        except _EVAL_ERRORS:
            break
    if len(vals) < 3:
        raise InconclusiveError("too few radial samples for the multiplier")
    ext = richardson(vals)
    return float(ext.value.real), float(max(ext.error, abs(ext.value.imag)))


@lru_cache(maxsize=256)
def _classify_cached(phi: MapExpr, seeds: tuple, n_max: int, tol_mult: float) -> DWReport:
    if is_identity(phi):
        return DWReport(0j, "interior", 1.0, "identity", automorphism=True)
    auto = is_automorphism(phi)
    if auto:
        p = interior_fixed_point(phi, [0j, *seeds, 0.5, -0.5, 0.5j, -0.5j])
        if p is not None:
            d = jet(phi, p)[1]
            res = abs(evaluate(phi, p) - p)
            return DWReport(p, "interior", abs(d), "elliptic-automorphism", True, residual=res)
    loc, kind, spread = estimate_dw(phi, seeds, n_max)
    if kind == "interior":
        d = jet(phi, loc)[1]
        res = abs(evaluate(phi, loc) - loc)
        return DWReport(loc, kind, abs(d), "elliptic", auto, residual=res, seed_spread=spread)
    mult, err = estimate_multiplier(phi, loc)
    flags = []
    if err > tol_mult:
        flags.append("multiplier-inconclusive")
    if abs(mult - 1) <= tol_mult:
        label = "parabolic"
        if abs(mult - 1) > 1e-7:
            flags.append("near-parabolic")
    elif mult < 1:
        label = "hyperbolic"
    else:
        raise InconclusiveError(f"boundary multiplier {mult!r} exceeds one")
    return DWReport(loc, kind, mult, label, auto, err, 0.0, spread, tuple(flags))


def classify(
    phi: MapExpr,
    seeds: Sequence[complex] = DW_SEEDS,
    n_max: int = N_MAX,
    tol_mult: float = TOL_MULT,
) -> DWReport:
    """Classify ``phi`` and locate its Denjoy-Wolff point.

    >>> from koenigs.dsl import parse
    >>> r = classify(parse("(z + 1) / 2"))
    >>> r.type_label, round(r.multiplier, 6)
    ('hyperbolic', 0.5)
    """
    return _classify_cached(phi, tuple(complex(s) for s in seeds), int(n_max), float(tol_mult))


# -------------------------------------------------------------------- step


@dataclass(frozen=True)
class StepReport:
    seed: complex
    distortion: np.ndarray
    q: np.ndarray
    truncated_at: int
    reason: str
    derivative_vanished: bool = False
    distortion_limit: float = math.nan
    q_limit: float = math.nan
    flags: tuple = field(default_factory=tuple)


def _one_minus_sq(z):
    a = np.abs(z)
    return (1 - a) * (1 + a)


def _tail_limit(seq: np.ndarray) -> float:
    """Extrapolate a sequence sampled at indices L/4, L/2, L (power-law in 1/n)."""
    L = len(seq) - 1
    if L < 8:
        return float(seq[-1])
    ext = richardson([seq[L // 4], seq[L // 2], seq[L]])
    return float(max(ext.value.real, 0.0))


def step_sequences(phi: MapExpr, z0: complex, n_max: int = N_MAX) -> StepReport:
    """Distortion and step-length sequences along the orbit of ``z0``.

    Both sequences stop where ``1 - |z_n|^2`` drops below ``HORIZON``.
    """
    orb = iterate(phi, z0, n_max, stop=lambda k, z: (1 - abs(z)) * (1 + abs(z)) < HORIZON)
    pts = orb.points
    reason = orb.reason
    keep = len(pts)
    gap = _one_minus_sq(pts)
    below = np.nonzero(gap < HORIZON)[0]
    if below.size:
        keep = int(below[0])
        reason = "precision horizon"
    pts = pts[:keep]
    gap = gap[:keep]
    logs = orb.cumulative_log_abs()[:keep]
    vanished = bool(np.any(np.isneginf(orb.step_log_deriv[: max(keep - 1, 0), 0])))
    with np.errstate(divide="ignore"):
        dist = np.exp(np.log(gap[0]) + logs - np.log(gap))
    q = hyperbolic(pseudo_distance(pts[:-1], pts[1:])) if keep > 1 else np.zeros(0)
    flags = ("derivative-vanished",) if vanished else ()
    return StepReport(
        seed=complex(z0),
        distortion=dist,
        q=np.asarray(q, dtype=float),
        truncated_at=keep - 1,
        reason=reason,
        derivative_vanished=vanished,
        distortion_limit=_tail_limit(dist),
        q_limit=_tail_limit(q) if len(q) else math.nan,
        flags=flags,
    )


def _drift(seq: np.ndarray) -> float:
    tail = seq[-max(len(seq) // 4, 2) :]
    mean = float(np.mean(tail))
    return math.inf if mean == 0 else float((tail.max() - tail.min()) / mean)


def step_decide(report: StepReport) -> str:
    """``"zero"``, ``"positive"`` or ``"inconclusive"`` from the distortion."""
    if report.derivative_vanished:
        return "zero"
    d = report.distortion
    if len(d) < 4:
        return "inconclusive"
    last = float(d[-1])
    if last < ZERO_LAST and d[0] >= ZERO_DECAY * last:
        return "zero"
    if last >= POSITIVE_FLOOR and _drift(d) < DRIFT:
        return "positive"
    return "inconclusive"


def q_decide(report: StepReport) -> str:
    """Decision from the step lengths ``q_n`` alone."""
    q = report.q
    if len(q) < 4:
        return "inconclusive"
    last = float(q[-1])
    if last < Q_ZERO:
        return "zero"
    if _drift(q) < DRIFT:
        return "positive"
    return "inconclusive"


@dataclass(frozen=True)
class StepSummary:
    decision: str
    reports: tuple
    distortion_decisions: tuple
    q_decisions: tuple
    automorphism: bool = False


@lru_cache(maxsize=256)
def _step_cached(phi: MapExpr, seeds: tuple, n_max: int) -> StepSummary:
    auto = is_automorphism(phi)
    reports = tuple(step_sequences(phi, s, n_max) for s in seeds)
    dd = tuple(step_decide(r) for r in reports)
    qd = tuple(q_decide(r) for r in reports)
    if auto:
        return StepSummary("positive", reports, dd, qd, True)
    decision = dd[0] if len(set(dd)) == 1 else "inconclusive"
    return StepSummary(decision, reports, dd, qd, False)


def step_analysis(phi: MapExpr, seeds: Sequence[complex] = STEP_SEEDS, n_max: int = N_MAX) -> StepSummary:
    """Step decision across several seeds; automorphisms are ``positive``.

    Seeds that disagree make the decision ``inconclusive``.
    """
    return _step_cached(phi, tuple(complex(s) for s in seeds), int(n_max))


def require_zero_step(phi: MapExpr) -> DWReport:
    """Raise unless ``phi`` is parabolic with zero hyperbolic step."""
    from .errors import PreconditionError

    rep = classify(phi)
    if rep.type_label != "parabolic":
        raise PreconditionError(f"map is {rep.type_label}, not parabolic")
    dec = step_analysis(phi).decision
    if dec != "zero":
        raise PreconditionError(f"parabolic map has {dec} hyperbolic step")
    return rep


__all__ = [
    "DWReport",
    "StepReport",
    "StepSummary",
    "classify",
    "estimate_dw",
    "estimate_multiplier",
    "is_automorphism",
    "is_identity",
    "step_sequences",
    "step_decide",
    "q_decide",
    "step_analysis",
    "require_zero_step",
    "DomainError",
    "NumericOverflow",
]
