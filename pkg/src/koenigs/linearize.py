"""Koenigs functions of zero-step parabolic maps and their centralisers.

For a parabolic map ``phi`` of zero hyperbolic step the Koenigs function
``h`` solves the Abel equation ``h(phi(z)) = h(z) + 1`` with ``h(0) = 0``.
It is approximated through the reference orbit ``w_k = phi^k(0)``: since
``h(w_k) = k``, the index function ``K`` with ``K(w_k) = k`` is an inverse
of ``h`` along the orbit, and

    b_n(z) = K(phi^n(z)) - n.

With two nodes ``{n, n+1}`` (order 1) this is the quotient
``(phi^n(z) - w_n) / (w_{n+1} - w_n)``.  Higher orders interpolate ``K``
with a polynomial through ``order + 1`` orbit points chosen around the
indices reached by the query points, which removes the leading error terms
of the two-node quotient.

The second half of the module estimates the linear coefficient ``c`` of a
map ``psi`` commuting with ``phi`` (``h o psi = h + c``) by three
independent routes and checks the relations between such maps.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np

from .core import MapExpr, evaluate, iterate_many, power
from .dynamics import classify, is_identity, require_zero_step, step_analysis
from .errors import DegenerateError, DomainError, KoenigsError, PreconditionError
from .numerics import RADIAL_LEVELS, richardson, sample_grid

DEFAULT_ORDER = 3
SLC_ORDER = 8
SLC_DEPTH = 2048
BUDGET = 2**18
PASSES = 3
MAX_WALK = 200
EPS = np.finfo(float).eps
# radial levels whose cancellation noise exceeds this are discarded
NOISE_LIMIT = 1e-6
SLC_TOL = 1e-3
KOENIGS_SPREAD_TOL = 1e-6
COMMUTE_TOL = 1e-8


def _bary_weights(x: np.ndarray) -> np.ndarray:
    d = x[:, None] - x[None, :]
    scale = np.mean(np.abs(d)) or 1.0
    d = d / scale
    np.fill_diagonal(d, 1)
    return 1 / np.prod(d, axis=1)


def _bary_eval(x, w, f, y):
    diff = y[:, None] - x[None, :]
    hit = diff == 0
    t = w / np.where(hit, 1, diff)
    val = (t * f).sum(axis=1) / t.sum(axis=1)
    for r in np.nonzero(hit.any(axis=1))[0]:
        val[r] = f[int(np.argmax(hit[r]))]
    return val


def _bary(x: np.ndarray, f: np.ndarray, y: np.ndarray, want_deriv: bool):
    """Barycentric interpolant through ``(x_j, f_j)`` and its derivative at ``y``.

    The derivative is interpolated from its exact nodal values, which stays
    accurate when ``y`` sits on or next to a node.
    """
    w = _bary_weights(x)
    val = _bary_eval(x, w, f, y)
    if not want_deriv:
        return val, None
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, 1)
    D = (w[None, :] / w[:, None]) / d
    np.fill_diagonal(D, 0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return val, _bary_eval(x, w, D @ f, y)


class KoenigsApprox:
    """Approximate Koenigs function ``b_n`` of a zero-step parabolic map.

    Parameters
    ----------
    phi : MapExpr
        The map.  No dynamical checks are made here; see :func:`koenigs_bp`.
    depth : int
        Number of forward iterations ``n`` applied to query points.
    order : int
        Degree of the interpolating polynomial for the index function.
        ``order=1`` is the two-node quotient.
    budget : int
        Longest reference orbit that may be computed.
    """

    def __init__(self, phi: MapExpr, depth: int, order: int = DEFAULT_ORDER, budget: int = BUDGET, grid=None):
        if depth < 1:
            raise ValueError("depth must be at least 1")
        if order < 1:
            raise ValueError("order must be at least 1")
        self.phi = phi
        self.depth = int(depth)
        self.order = int(order)
        self.budget = int(budget)
        self._lock = threading.Lock()
        self._ref = np.zeros(1, dtype=complex)
        self._extend(self.depth + 2)
        if self._ref[self.depth + 1] == self._ref[self.depth]:
            raise DegenerateError("reference orbit has stagnated at the chosen depth")
        pts = sample_grid(grid)
        res = abel_residual(self, phi, pts)
        self.residual_max = float(np.max(res))
        self.residual_mean = float(np.mean(res))

    @property
    def reference(self) -> np.ndarray:
        return self._ref

    def _extend(self, length: int) -> None:
        if length > self.budget + 1:
            raise DegenerateError(f"query needs {length} reference points, budget is {self.budget}")
        with self._lock:
            have = len(self._ref)
            if have >= length:
                return
            f = self.phi._fn
            out = np.empty(length, dtype=complex)
            out[:have] = self._ref
            # up to w_{n+1} use the array arithmetic of iterate_many, so that
            # phi^n(0) lands on w_n bit for bit; scalar steps are faster beyond
            exact = min(length, self.depth + 2)
            z = out[have - 1 : have].copy()
            with np.errstate(all="ignore"):
                for k in range(have, exact):
                    z = f(z)
                    out[k] = z[0]
            z = complex(out[max(have, exact) - 1])
            for k in range(max(have, exact), length):
                z = f(z)
                out[k] = z
            self._ref = out

    def _index(self, y: np.ndarray, want_deriv: bool):
        n = self.depth
        self._extend(n + 2)
        w = self._ref
        step = w[n + 1] - w[n]
        a = (y - w[n]) / step
        if self.order == 1:
            return a, (np.full_like(a, 1 / step) if want_deriv else None)
        a = self._locate(y, a)
        p = self.order
        der = None
        window = None
        cheb = np.cos(np.pi * (np.arange(p + 1) + 0.5) / (p + 1))
        for _ in range(PASSES):
            if not np.all(np.isfinite(a)):
                raise DegenerateError("index estimate is not finite")
            centre = n + int(round(float(np.mean(a.real))))
            half = max(p, int(math.ceil(1.25 * float(np.max(np.abs(a - (centre - n)))))))
            lo = max(0, centre - half)
            if (lo, half) == window:
                break
            window = (lo, half)
            if half <= p:
                idx = lo + np.arange(p + 1)
            else:
                idx = np.unique(np.round(lo + half + half * cheb).astype(np.int64))
            self._extend(int(idx[-1]) + 1)
            k, der = _bary(self._ref[idx], idx.astype(float), y, want_deriv)
            a = k - n
        return a, der

    def _locate(self, y: np.ndarray, a: np.ndarray) -> np.ndarray:
        """Walk each index estimate along the orbit with local secants.

        The quotient at depth ``n`` badly underestimates indices far beyond
        ``n``; repeating it from the nearest orbit point converges to the
        right neighbourhood.
        """
        n = self.depth
        for _ in range(MAX_WALK):
            if not np.all(np.isfinite(a)):
                raise DegenerateError("index estimate is not finite")
            c = np.clip(n + np.round(a.real), 0, None).astype(np.int64)
            self._extend(int(c.max()) + 2)
            w = self._ref
            a_new = (c - n) + (y - w[c]) / (w[c + 1] - w[c])
            moved = np.round(a_new.real) != np.round(a.real)
            a = a_new
            if not moved.any():
                break
        return a

    def _eval(self, z, want_deriv: bool):
        scalar = np.ndim(z) == 0
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        if np.any(np.abs(z) >= 1):
            raise DomainError("points must lie in the open unit disc")
        if want_deriv:
            y, dy = iterate_many(self.phi, z, self.depth, with_derivative=True)
            _, dk = self._index(y, True)
            out = dk * dy
        else:
            y = iterate_many(self.phi, z, self.depth)
            out, _ = self._index(y, False)
        return complex(out[0]) if scalar else out

    def __call__(self, z):
        """``b_n(z)`` for a scalar or array."""
        return self._eval(z, False)

    def derivative(self, z):
        """``b_n'(z)``, from the interpolant and the chain rule."""
        return self._eval(z, True)


@lru_cache(maxsize=64)
def _approx_cached(phi: MapExpr, depth: int, order: int) -> KoenigsApprox:
    return KoenigsApprox(phi, depth, order)


def koenigs_bp(phi: MapExpr, n: int, order: int = DEFAULT_ORDER, check: bool = True) -> KoenigsApprox:
    """Koenigs approximant of depth ``n`` for a zero-step parabolic map.

    With ``check`` set the map is first classified; any other type, or a
    positive step, raises :class:`PreconditionError`.
    """
    if check:
        require_zero_step(phi)
    return _approx_cached(phi, int(n), int(order))


def abel_residual(h: Callable, phi: MapExpr, z, c: complex = 1.0):
    """``|h(phi(z)) - h(z) - c|`` elementwise."""
    z = np.asarray(z, dtype=complex)
    return np.abs(h(evaluate(phi, z)) - h(z) - c)


def commute_residual(phi: MapExpr, psi: MapExpr, grid=None) -> float:
    """``max |phi(psi(z)) - psi(phi(z))|`` over a sample."""
    z = sample_grid(grid)
    return float(np.max(np.abs(evaluate(phi, evaluate(psi, z)) - evaluate(psi, evaluate(phi, z)))))


def check_power_relation(phi: MapExpr, psi: MapExpr, m: int, n: int, grid=None) -> float:
    """``max |psi^n(z) - phi^m(z)|`` over a sample."""
    if m < 0 or n < 0:
        raise DomainError("powers must be non-negative")
    z = sample_grid(grid)
    a = iterate_many(psi, z, n)
    b = iterate_many(phi, z, m)
    return float(np.max(np.abs(a - b)))


def check_koenigs_ratio(
    phi: MapExpr, psi: MapExpr, c: complex, grid=None, n: int = 2048, order: int = DEFAULT_ORDER
) -> float:
    """``max |b^psi_n - b^phi_n / c|`` for two zero-step parabolic maps."""
    if c == 0:
        raise DomainError("c must be non-zero")
    require_zero_step(phi)
    require_zero_step(psi)
    z = sample_grid(grid)
    bphi = _approx_cached(phi, int(n), int(order))
    bpsi = bphi if psi == phi else _approx_cached(psi, int(n), int(order))
    return float(np.max(np.abs(bpsi(z) - bphi(z) / c)))


# -------------------------------------------------------------------- SLC


@dataclass(frozen=True)
class MethodEstimate:
    value: complex
    error: float
    status: str  # "converged", "failed" or "skipped"
    levels: int = 0
    note: str = ""


@dataclass(frozen=True)
class SLCReport:
    value: complex
    methods: dict
    disagreement: float
    commute_residual: float
    identity: bool = False
    flags: tuple = ()


def _radial(tau: complex) -> np.ndarray:
    return np.array([(1 - 2.0**-k) * tau for k in RADIAL_LEVELS], dtype=complex)


def _noisy(*small) -> float:
    return float(sum(EPS / abs(s) if s != 0 else math.inf for s in small))


def _limit(values: Sequence[complex], tol: float, note: str = "") -> MethodEstimate:
    if len(values) < 3:
        return MethodEstimate(complex("nan"), math.inf, "failed", len(values), "too few usable levels")
    ext = richardson(values)
    status = "converged" if ext.error <= tol else "failed"
    return MethodEstimate(ext.value, ext.error, status, len(values), note)


def _angular(phi, psi, tau, tol) -> MethodEstimate:
    vals = []
    for z in _radial(tau):
        try:
            dpsi = complex(evaluate(psi, z)) - z
            dphi = complex(evaluate(phi, z)) - z
        except (KoenigsError, ArithmeticError):
            break
        if _noisy(dpsi, dphi) > NOISE_LIMIT:
            break
        vals.append(dpsi / dphi)
    return _limit(vals, tol)


def _hprime(approx: KoenigsApprox, psi, tau, tol) -> MethodEstimate:
    vals = []
    for z in _radial(tau):
        try:
            dpsi = complex(evaluate(psi, z)) - z
            if _noisy(dpsi) > NOISE_LIMIT:
                break
            vals.append(approx.derivative(z) * dpsi)
        except (KoenigsError, ArithmeticError):
            break
    return _limit(vals, tol)


def _koenigs(approx: KoenigsApprox, psi, grid) -> MethodEstimate:
    z = sample_grid(grid)
    d = approx(evaluate(psi, z)) - approx(z)
    mean = complex(np.mean(d))
    spread = float(np.max(np.abs(d - mean)))
    status = "converged" if spread <= KOENIGS_SPREAD_TOL else "failed"
    return MethodEstimate(mean, spread, status, len(z))


METHODS = ("angular", "koenigs", "hprime")


def slc_estimate(
    phi: MapExpr,
    psi: MapExpr,
    methods: Sequence[str] = METHODS,
    n: int = SLC_DEPTH,
    order: int = SLC_ORDER,
    grid=None,
    tol: float = SLC_TOL,
) -> SLCReport:
    """Linear coefficient ``c`` with ``h o psi = h + c``.

    ``angular`` is the radial limit of ``(psi(z) - z) / (phi(z) - z)``,
    ``koenigs`` averages ``b_n(psi(z)) - b_n(z)`` over the sample and
    ``hprime`` is the radial limit of ``b_n'(z) (psi(z) - z)``.  The
    reported value is the first converged estimate in that order of
    preference: koenigs, angular, hprime.

    >>> from koenigs.dsl import parse
    >>> slit = "compose(icayley(tau=1, to=RH), sqrt(((1+z)/(1-z))^2 + {}))"
    >>> r = slc_estimate(parse(slit.format(1)), parse(slit.format(2.5)))
    >>> round(r.value.real, 6)
    2.5
    """
    bad = [m for m in methods if m not in METHODS]
    if bad:
        raise DomainError(f"unknown method(s): {', '.join(bad)}")
    rep = require_zero_step(phi)
    tau = rep.location
    comm = commute_residual(phi, psi, grid)
    if is_identity(psi):
        skipped = {m: MethodEstimate(0j, 0.0, "skipped", 0, "psi is the identity") for m in methods}
        return SLCReport(0j, skipped, 0.0, comm, True, ("identity",))
    prep = classify(psi)
    if prep.kind != "boundary" or abs(prep.location - tau) > 1e-6:
        raise PreconditionError("psi does not share the Denjoy-Wolff point of phi")
    flags = []
    if comm > COMMUTE_TOL:
        flags.append("not-commuting")
    approx = None
    if "koenigs" in methods or "hprime" in methods:
        approx = _approx_cached(phi, int(n), int(order))
    out = {}
    for m in methods:
        if m == "angular":
            out[m] = _angular(phi, psi, tau, tol)
        elif m == "koenigs":
            out[m] = _koenigs(approx, psi, grid)
        else:
            out[m] = _hprime(approx, psi, tau, tol)
    good = [e.value for e in out.values() if e.status == "converged"]
    disagreement = max((abs(a - b) for a in good for b in good), default=0.0)
    value = complex("nan")
    for m in ("koenigs", "angular", "hprime"):
        if m in out and out[m].status == "converged":
            value = out[m].value
            break
    if not good:
        flags.append("no-method-converged")
    elif disagreement > tol:
        flags.append("methods-disagree")
    if good and value.real < -tol:
        flags.append("negative-real-part")
    return SLCReport(value, out, float(disagreement), comm, False, tuple(flags))


@dataclass(frozen=True)
class LimitCheck:
    value: float
    skipped: bool = False
    note: str = ""
    levels: int = 0


def ratio_limit_check(
    phi: MapExpr, psi: MapExpr, n: int = 4096, order: int = DEFAULT_ORDER, tol: float = 1e-1
) -> LimitCheck:
    """Deviation from one of the radial limit of
    ``(b(psi(z)) - b(z)) / (b'(z) (psi(z) - z))``.

    Identity ``psi`` (a 0/0 quotient) is skipped rather than evaluated.
    """
    rep = require_zero_step(phi)
    if is_identity(psi):
        return LimitCheck(math.nan, True, "psi is the identity")
    approx = _approx_cached(phi, int(n), int(order))
    vals = []
    for z in _radial(rep.location):
        try:
            pz = complex(evaluate(psi, z))
            if _noisy(pz - z) > NOISE_LIMIT:
                break
            num = approx(pz) - approx(z)
            vals.append(num / (approx.derivative(z) * (pz - z)))
        except (KoenigsError, ArithmeticError):
            break
    est = _limit(vals, tol)
    if est.status != "converged" and not np.isfinite(est.value):
        return LimitCheck(math.nan, True, est.note, est.levels)
    return LimitCheck(float(abs(est.value - 1)), False, est.status, est.levels)


__all__ = [
    "KoenigsApprox",
    "koenigs_bp",
    "abel_residual",
    "commute_residual",
    "check_power_relation",
    "check_koenigs_ratio",
    "slc_estimate",
    "ratio_limit_check",
    "SLCReport",
    "MethodEstimate",
    "LimitCheck",
    "power",
    "step_analysis",
]
