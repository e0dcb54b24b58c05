"""Expression trees for holomorphic self-maps of the unit disc.

A map is an immutable tree of :class:`MapExpr` nodes in the single variable
``z``.  Trees compile lazily into closures that evaluate either a Python
``complex`` or a complex ``numpy`` array; a second closure propagates
first-order jets ``(value, derivative)`` so derivatives come from the tree
structure rather than from finite differences.

>>> phi = (1 + Var() ** 2) / 2
>>> evaluate(phi, 0.5)
(0.625+0j)
>>> derivative(phi, 0.5)
(0.5+0j)
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, InstabilityError, NumericOverflow

# |Im x| below this fraction of |x| counts as "on" the negative real axis.
CUT_TOL = 1e-14
# an orbit point with |z| above this is outside the closed disc
DISC_SLACK = 1e-12
STAGNATION_TOL = 1e-15
STAGNATION_STEPS = 3

TARGETS = ("RH", "H")


def _as_complex(z):
    if isinstance(z, np.ndarray):
        return z.astype(complex, copy=False)
    if isinstance(z, (list, tuple)):
        return np.asarray(z, dtype=complex)
    return complex(z)


def _div(a, b):
    if isinstance(b, np.ndarray):
        if not np.all(b != 0):
            raise DomainError("division by zero")
        with np.errstate(all="ignore"):
            return a / b
    if b == 0:
        raise DomainError("division by zero")
    return a / b


def _sqrt(x):
    if isinstance(x, np.ndarray):
        on_cut = (x.real < 0) & (np.abs(x.imag) <= CUT_TOL * np.abs(x))
        if np.any(on_cut):
            raise DomainError("square root evaluated on its branch cut")
        return np.sqrt(x)
    if x.real < 0 and abs(x.imag) <= CUT_TOL * abs(x):
        raise DomainError("square root evaluated on its branch cut")
    return cmath.sqrt(x)


def _pow(x, k: int):
    if k == 0:
        return np.ones_like(x) if isinstance(x, np.ndarray) else 1 + 0j
    if k < 0:
        return _div(1, _pow(x, -k))
    try:
        if isinstance(x, np.ndarray):
            with np.errstate(all="ignore"):
                return x**k
        return x**k
    except OverflowError as exc:
        raise NumericOverflow("overflow in integer power") from exc


def _finite(x) -> bool:
    if isinstance(x, np.ndarray):
        return bool(np.all(np.isfinite(x)))
    return cmath.isfinite(x)


class MapExpr:
    """Base class of expression nodes.

    Arithmetic operators build larger trees; numbers are promoted to
    :class:`Const`.  Calling a tree on another tree composes them, calling it
    on a number or array evaluates it.
    """

    @property
    def children(self) -> tuple["MapExpr", ...]:
        return ()

    # compiled closures, created on first use
    @cached_property
    def _fn(self) -> Callable:
        return self._compile()

    @cached_property
    def _jet(self) -> Callable:
        return self._compile_jet()

    def _compile(self) -> Callable:  # pragma: no cover - abstract
        raise NotImplementedError

    def _compile_jet(self) -> Callable:  # pragma: no cover - abstract
        raise NotImplementedError

    def __add__(self, other):
        return Add(self, _lift(other))

    def __radd__(self, other):
        return Add(_lift(other), self)

    def __sub__(self, other):
        return Sub(self, _lift(other))

    def __rsub__(self, other):
        return Sub(_lift(other), self)

    def __mul__(self, other):
        return Mul(self, _lift(other))

    def __rmul__(self, other):
        return Mul(_lift(other), self)

    def __truediv__(self, other):
        return Div(self, _lift(other))

    def __rtruediv__(self, other):
        return Div(_lift(other), self)

    def __neg__(self):
        return Neg(self)

    def __pow__(self, k):
        if isinstance(k, bool) or not isinstance(k, (int, np.integer)):
            raise TypeError("only integer powers are supported")
        return Pow(self, int(k))

    def __call__(self, arg):
        if isinstance(arg, MapExpr):
            return compose(self, arg)
        return evaluate(self, arg)

    def __str__(self) -> str:
        from .dsl import format_expr

        return format_expr(self)


def _lift(x) -> MapExpr:
    if isinstance(x, MapExpr):
        return x
    if isinstance(x, (int, float, complex, np.number)):
        return Const(complex(x))
    raise TypeError(f"cannot use {type(x).__name__} in a map expression")


@dataclass(frozen=True, eq=True, repr=False)
class Var(MapExpr):
    def _compile(self):
        return lambda z: z

    def _compile_jet(self):
        return lambda z, dz: (z, dz)

    def __repr__(self):
        return "Var()"


@dataclass(frozen=True, repr=False)
class Const(MapExpr):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))
        if not cmath.isfinite(self.value):
            raise DomainError("constants must be finite")

    def _compile(self):
        c = self.value

        def f(z):
            if isinstance(z, np.ndarray):
                return np.full(z.shape, c, dtype=complex)
            return c

        return f

    def _compile_jet(self):
        f = self._fn
        return lambda z, dz: (f(z), dz * 0)

    def __repr__(self):
        return f"Const({self.value!r})"


@dataclass(frozen=True, repr=False)
class _Binary(MapExpr):
    left: MapExpr
    right: MapExpr

    @property
    def children(self):
        return (self.left, self.right)

    def __repr__(self):
        return f"{type(self).__name__}({self.left!r}, {self.right!r})"


class Add(_Binary):
    def _compile(self):
        a, b = self.left._fn, self.right._fn
        return lambda z: a(z) + b(z)

    def _compile_jet(self):
        a, b = self.left._jet, self.right._jet

        def f(z, dz):
            u, du = a(z, dz)
            v, dv = b(z, dz)
            return u + v, du + dv

        return f


class Sub(_Binary):
    def _compile(self):
        a, b = self.left._fn, self.right._fn
        return lambda z: a(z) - b(z)

    def _compile_jet(self):
        a, b = self.left._jet, self.right._jet

        def f(z, dz):
            u, du = a(z, dz)
            v, dv = b(z, dz)
            return u - v, du - dv

        return f


class Mul(_Binary):
    def _compile(self):
        a, b = self.left._fn, self.right._fn
        return lambda z: a(z) * b(z)

    def _compile_jet(self):
        a, b = self.left._jet, self.right._jet

        def f(z, dz):
            u, du = a(z, dz)
            v, dv = b(z, dz)
            return u * v, u * dv + du * v

        return f


class Div(_Binary):
    def _compile(self):
        a, b = self.left._fn, self.right._fn
        return lambda z: _div(a(z), b(z))

    def _compile_jet(self):
        a, b = self.left._jet, self.right._jet

        def f(z, dz):
            u, du = a(z, dz)
            v, dv = b(z, dz)
            q = _div(u, v)
            return q, (du - q * dv) / v

        return f


@dataclass(frozen=True, repr=False)
class Pow(MapExpr):
    base: MapExpr
    k: int

    @property
    def children(self):
        return (self.base,)

    def _compile(self):
        a, k = self.base._fn, self.k
        return lambda z: _pow(a(z), k)

    def _compile_jet(self):
        a, k = self.base._jet, self.k

        def f(z, dz):
            u, du = a(z, dz)
            if k == 0:
                return _pow(u, 0), du * 0
            low = _pow(u, k - 1)
            return low * u, k * low * du

        return f

    def __repr__(self):
        return f"Pow({self.base!r}, {self.k})"


@dataclass(frozen=True, repr=False)
class _Unary(MapExpr):
    arg: MapExpr

    @property
    def children(self):
        return (self.arg,)

    def __repr__(self):
        return f"{type(self).__name__}({self.arg!r})"


class Neg(_Unary):
    def _compile(self):
        a = self.arg._fn
        return lambda z: -a(z)

    def _compile_jet(self):
        a = self.arg._jet

        def f(z, dz):
            u, du = a(z, dz)
            return -u, -du

        return f


class Sqrt(_Unary):
    """Principal square root; raises on the negative real axis."""

    def _compile(self):
        a = self.arg._fn
        return lambda z: _sqrt(a(z))

    def _compile_jet(self):
        a = self.arg._jet

        def f(z, dz):
            u, du = a(z, dz)
            s = _sqrt(u)
            return s, _div(du, 2 * s)

        return f


@dataclass(frozen=True, repr=False)
class Compose(MapExpr):
    outer: MapExpr
    inner: MapExpr

    @property
    def children(self):
        return (self.outer, self.inner)

    def _compile(self):
        f, g = self.outer._fn, self.inner._fn
        return lambda z: f(g(z))

    def _compile_jet(self):
        f, g = self.outer._jet, self.inner._jet
        return lambda z, dz: f(*g(z, dz))

    def __repr__(self):
        return f"Compose({self.outer!r}, {self.inner!r})"


@dataclass(frozen=True, repr=False)
class Cayley(MapExpr):
    """Cayley map from the disc onto a half-plane, sending ``tau`` to infinity.

    ``target="RH"``: ``(tau + x) / (tau - x)``, onto ``Re w > 0``.
    ``target="H"``: ``i (tau + x) / (tau - x)``, onto ``Im w > 0``.
    """

    tau: complex
    target: str
    arg: MapExpr = Var()

    def __post_init__(self):
        _check_cayley(self)

    @property
    def children(self):
        return (self.arg,)

    def _compile(self):
        a, t = self.arg._fn, self.tau
        s = 1j if self.target == "H" else 1
        return lambda z: s * _div(t + a(z), t - a(z))

    def _compile_jet(self):
        a, t = self.arg._jet, self.tau
        s = 1j if self.target == "H" else 1

        def f(z, dz):
            u, du = a(z, dz)
            den = t - u
            w = s * _div(t + u, den)
            return w, s * 2 * t * du / (den * den)

        return f

    def __repr__(self):
        return f"Cayley({self.tau!r}, {self.target!r}, {self.arg!r})"


@dataclass(frozen=True, repr=False)
class CayleyInverse(MapExpr):
    """Inverse of :class:`Cayley` with the same ``tau`` and ``target``."""

    tau: complex
    target: str
    arg: MapExpr = Var()

    def __post_init__(self):
        _check_cayley(self)

    @property
    def children(self):
        return (self.arg,)

    def _compile(self):
        a, t = self.arg._fn, self.tau
        s = 1j if self.target == "H" else 1
        return lambda w: t * _div(a(w) - s, a(w) + s)

    def _compile_jet(self):
        a, t = self.arg._jet, self.tau
        s = 1j if self.target == "H" else 1

        def f(w, dw):
            u, du = a(w, dw)
            den = u + s
            z = t * _div(u - s, den)
            return z, 2 * s * t * du / (den * den)

        return f

    def __repr__(self):
        return f"CayleyInverse({self.tau!r}, {self.target!r}, {self.arg!r})"


def _check_cayley(node) -> None:
    object.__setattr__(node, "tau", complex(node.tau))
    if node.target not in TARGETS:
        raise DomainError(f"unknown Cayley target {node.target!r}")
    if abs(abs(node.tau) - 1) > 1e-12:
        raise DomainError("Cayley base point must lie on the unit circle")


def compose(outer: MapExpr, inner: MapExpr) -> MapExpr:
    """Tree for ``outer(inner(z))``."""
    return Compose(_lift(outer), _lift(inner))


def evaluate(expr: MapExpr, z):
    """Value of ``expr`` at a complex scalar or array ``z``."""
    z = _as_complex(z)
    try:
        out = expr._fn(z)
    except (OverflowError, ZeroDivisionError) as exc:
        raise NumericOverflow(str(exc)) from exc
    if isinstance(z, np.ndarray) and not isinstance(out, np.ndarray):
        out = np.full(z.shape, out, dtype=complex)
    if not _finite(out):
        raise NumericOverflow("non-finite value")
    return out


def jet(expr: MapExpr, z, dz=1.0):
    """Return ``(expr(z), expr'(z) * dz)``."""
    z = _as_complex(z)
    if isinstance(z, np.ndarray):
        dz = np.broadcast_to(np.asarray(dz, dtype=complex), z.shape).copy()
    else:
        dz = complex(dz)
    try:
        v, d = expr._jet(z, dz)
    except (OverflowError, ZeroDivisionError) as exc:
        raise NumericOverflow(str(exc)) from exc
    if not (_finite(v) and _finite(d)):
        raise NumericOverflow("non-finite value or derivative")
    return v, d


def derivative(expr: MapExpr, z):
    """Complex derivative of ``expr`` at ``z`` (forward mode)."""
    return jet(expr, z)[1]


@dataclass
class Orbit:
    """Forward orbit ``z_0, z_1, ...`` with per-step derivative logs.

    ``step_log_deriv[k]`` is ``(log|phi'(z_k)|, arg phi'(z_k))``.
    """

    seed: complex
    points: np.ndarray
    step_log_deriv: np.ndarray
    reason: str

    def __len__(self) -> int:
        return len(self.points)

    def log_derivative(self, n: Optional[int] = None) -> complex:
        """``log (phi^n)'(z_0)`` from the accumulated step logs."""
        steps = self.step_log_deriv[: len(self.points) - 1 if n is None else n]
        return complex(steps[:, 0].sum(), steps[:, 1].sum())

    def cumulative_log_abs(self) -> np.ndarray:
        """``log |(phi^n)'(z_0)|`` for ``n = 0 .. len-1``."""
        return np.concatenate([[0.0], np.cumsum(self.step_log_deriv[:, 0])])


def iterate(
    expr: MapExpr,
    z0: complex,
    n_max: int,
    *,
    stop: Optional[Callable[[int, complex], bool]] = None,
    stagnation_tol: Optional[float] = STAGNATION_TOL,
    on_exit: str = "raise",
) -> Orbit:
    """Iterate ``expr`` from ``z0`` for at most ``n_max`` steps.

    The orbit ends early when ``stop(k, z_k)`` is true ("stopped"), after
    three consecutive steps shorter than ``stagnation_tol`` ("stagnated") or,
    with ``on_exit="truncate"``, when a point leaves the closed disc ("left
    disc").  By default leaving the disc raises :class:`InstabilityError`.
    """
    if n_max < 0:
        raise ValueError("n_max must be non-negative")
    z = complex(z0)
    if abs(z) >= 1:
        raise DomainError("seed must lie in the open unit disc")
    f = expr._jet
    pts = [z]
    logs = []
    reason = "reached N"
    quiet = 0
    for k in range(n_max):
        try:
            v, d = f(z, 1 + 0j)
        except (OverflowError, ZeroDivisionError) as exc:
            raise NumericOverflow(str(exc)) from exc
        if not (cmath.isfinite(v) and cmath.isfinite(d)):
            raise NumericOverflow(f"non-finite value at step {k}")
        if abs(v) > 1 + DISC_SLACK:
            if on_exit == "raise":
                raise InstabilityError(f"orbit left the disc at step {k + 1}: |z| = {abs(v)!r}")
            reason = "left disc"
            break
        logs.append((math.log(abs(d)) if d != 0 else -math.inf, cmath.phase(d)))
        step = abs(v - z)
        pts.append(v)
        z = v
        if stagnation_tol is not None:
            quiet = quiet + 1 if step < stagnation_tol else 0
            if quiet >= STAGNATION_STEPS:
                reason = "stagnated"
                break
        if stop is not None and stop(k + 1, v):
            reason = "stopped"
            break
    return Orbit(
        seed=complex(z0),
        points=np.array(pts, dtype=complex),
        step_log_deriv=np.array(logs, dtype=float).reshape(-1, 2),
        reason=reason,
    )


def iterate_many(expr: MapExpr, z, n: int, with_derivative: bool = False):
    """Apply ``expr`` ``n`` times to every point of an array.

    Returns the image array, or ``(image, derivative)`` of the ``n``-fold
    composite when ``with_derivative`` is set.
    """
    z = np.array(z, dtype=complex)
    d = np.ones_like(z)
    try:
        with np.errstate(all="ignore"):
            if with_derivative:
                for _ in range(n):
                    z, d = expr._jet(z, d)
            else:
                f = expr._fn
                for _ in range(n):
                    z = f(z)
    except (OverflowError, ZeroDivisionError) as exc:
        raise NumericOverflow(str(exc)) from exc
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(d))):
        raise NumericOverflow("non-finite value while iterating")
    return (z, d) if with_derivative else z


def power(expr: MapExpr, n: int) -> MapExpr:
    """Tree of the ``n``-fold composite; ``power(f, 0)`` is the identity."""
    if n < 0:
        raise ValueError("n must be non-negative")
    out: MapExpr = Var()
    for _ in range(n):
        out = expr if isinstance(out, Var) else compose(expr, out)
    return out
