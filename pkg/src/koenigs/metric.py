"""Pseudo-hyperbolic and hyperbolic distances, Cayley transforms and V-sets.

The hyperbolic distance is ``artanh`` of the pseudo-hyperbolic one.  For a
self-map ``phi`` the V-set of radius ``r`` is ``{z : rho*(z, phi(z)) < r}``;
membership queries return the signed margin ``r - rho*(z, phi(z))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Cayley, CayleyInverse, MapExpr, evaluate
from .errors import DomainError
from .numerics import pseudo_distance

# keeps artanh finite when rho* rounds to 1
ARTANH_GUARD = 1 - 1e-15
# margins closer to zero than this are not trusted either way
MARGIN_TOL = 1e-12


@dataclass(frozen=True)
class DistanceValue:
    pseudo: float
    hyperbolic: float


def _artanh(p):
    p = np.minimum(p, ARTANH_GUARD)
    return 0.5 * np.log((1 + p) / (1 - p))


def _value(p) -> DistanceValue:
    p = float(p)
    return DistanceValue(p, float(_artanh(p)))


def dist_disc(z: complex, w: complex) -> DistanceValue:
    """Distances between two points of the open unit disc."""
    z, w = complex(z), complex(w)
    if abs(z) >= 1 or abs(w) >= 1:
        raise DomainError("points must lie in the open unit disc")
    return _value(pseudo_distance(z, w))


def pseudo_halfplane(u, v, which: str = "H"):
    """Vectorised pseudo-hyperbolic distance in a half-plane."""
    u = np.asarray(u, dtype=complex)
    v = np.asarray(v, dtype=complex)
    if which == "H":
        return np.abs(u - v) / np.abs(u - np.conj(v))
    if which == "RH":
        return np.abs(u - v) / np.abs(v + np.conj(u))
    raise DomainError(f"unknown half-plane {which!r}")


def dist_halfplane(u: complex, v: complex, which: str = "H") -> DistanceValue:
    """Distances in the upper (``"H"``) or right (``"RH"``) half-plane."""
    u, v = complex(u), complex(v)
    part = (lambda x: x.imag) if which == "H" else (lambda x: x.real)
    if which not in ("H", "RH"):
        raise DomainError(f"unknown half-plane {which!r}")
    if part(u) <= 0 or part(v) <= 0:
        raise DomainError(f"points must lie in the open half-plane {which}")
    return _value(pseudo_halfplane(u, v, which))


def hyperbolic(p):
    """``artanh`` with the boundary guard, elementwise."""
    return _artanh(np.asarray(p, dtype=float))


def cayley_pair(tau: complex = 1, target: str = "RH") -> tuple[MapExpr, MapExpr]:
    """Cayley transform sending ``tau`` to infinity and its inverse."""
    return Cayley(tau, target), CayleyInverse(tau, target)


@dataclass(frozen=True)
class Membership:
    rho: float
    margin: float
    member: bool
    indeterminate: bool


def v_membership(phi: MapExpr, r: float, z: complex) -> Membership:
    """Is ``z`` in the V-set of ``phi`` with radius ``r``?

    Points whose margin is within ``MARGIN_TOL`` of zero are flagged
    ``indeterminate``; ``member`` then reports the raw sign.
    """
    if not 0 < r < 1:
        raise DomainError("radius must lie in (0, 1)")
    z = complex(z)
    if abs(z) >= 1:
        raise DomainError("point must lie in the open unit disc")
    rho = float(pseudo_distance(z, evaluate(phi, z)))
    margin = r - rho
    return Membership(rho, margin, margin > 0, abs(margin) < MARGIN_TOL)


def v_margins(phi: MapExpr, r: float, z) -> np.ndarray:
    """Signed margins ``r - rho*(z, phi(z))`` for an array of points."""
    z = np.asarray(z, dtype=complex)
    return r - pseudo_distance(z, evaluate(phi, z))


def pi_threshold(r: float) -> float:
    """Height above which a point ``w`` of the upper half-plane lies in the
    V-set of radius ``r`` of the translation ``w -> w + 1``."""
    if not 0 < r < 1:
        raise DomainError("radius must lie in (0, 1)")
    return math.sqrt(1 - r * r) / (2 * r)


def in_pi(w, r: float):
    return np.asarray(w, dtype=complex).imag > pi_threshold(r)
