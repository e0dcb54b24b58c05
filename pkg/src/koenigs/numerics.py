"""Small numerical helpers shared by the analysis modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

GRID_SIZE = 64
GRID_RADIUS = 0.9

# radial nodes r_k = 1 - 2**-k
RADIAL_LEVELS = tuple(range(4, 15))


@dataclass(frozen=True)
class GridSpec:
    """Deterministic low-discrepancy sample of a disc ``|z| < radius``.

    Points are the unscrambled 2-D Halton sequence (first point dropped),
    mapped to the disc so that they are uniform in area.
    """

    size: int = GRID_SIZE
    radius: float = GRID_RADIUS
    skip: int = 1

    def points(self) -> np.ndarray:
        u = qmc.Halton(d=2, scramble=False).random(self.size + self.skip)[self.skip :]
        return self.radius * np.sqrt(u[:, 0]) * np.exp(2j * np.pi * u[:, 1])

    def describe(self) -> dict:
        return {"kind": "halton", "size": self.size, "radius": self.radius, "skip": self.skip}


DEFAULT_GRID = GridSpec()


def sample_grid(grid=None) -> np.ndarray:
    """Points of ``grid``: a :class:`GridSpec`, an array of points, or ``None``."""
    if grid is None:
        return DEFAULT_GRID.points()
    if isinstance(grid, GridSpec):
        return grid.points()
    pts = np.atleast_1d(np.asarray(grid, dtype=complex))
    if np.any(np.abs(pts) >= 1):
        raise ValueError("sample points must lie in the open unit disc")
    return pts


def radial_nodes(tau: complex, levels=RADIAL_LEVELS) -> np.ndarray:
    return np.array([(1 - 2.0**-k) * tau for k in levels], dtype=complex)


@dataclass(frozen=True)
class Extrapolation:
    value: complex
    error: float
    levels: int


def richardson(values, ratio: float = 2.0, exponents=(1, 2)) -> Extrapolation:
    """Richardson extrapolation of samples on a geometric mesh.

    ``values[j]`` is taken at step ``h_0 / ratio**j``.  Each exponent ``p``
    removes an ``h**p`` error term.  The error estimate is the gap between
    the last two fully extrapolated entries (or between the last two raw
    samples when too few levels remain).
    """
    col = np.asarray(values, dtype=complex)
    if col.size == 0:
        raise ValueError("no samples to extrapolate")
    if col.size == 1:
        return Extrapolation(complex(col[0]), float("inf"), 1)
    for p in exponents:
        if col.size < 2:
            break
        f = ratio**p
        nxt = (f * col[1:] - col[:-1]) / (f - 1)
        if nxt.size < 2:
            # keep the previous column so an error estimate exists
            return Extrapolation(complex(nxt[-1]), float(abs(col[-1] - col[-2])), len(values))
        col = nxt
    return Extrapolation(complex(col[-1]), float(abs(col[-1] - col[-2])), len(values))


def pseudo_distance(z, w):
    """Pseudo-hyperbolic distance ``|z - w| / |1 - conj(w) z|`` (vectorised)."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    return np.abs(z - w) / np.abs(1 - np.conj(w) * z)
