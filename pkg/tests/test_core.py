import cmath
import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from koenigs.core import (
    Add,
    Compose,
    Const,
    Div,
    Mul,
    Neg,
    Pow,
    Sqrt,
    Sub,
    Var,
    compose,
    derivative,
    evaluate,
    iterate,
    iterate_many,
    jet,
    power,
)
from koenigs.dsl import parse
from koenigs.errors import DomainError, InstabilityError, KoenigsError, NumericOverflow

import oracles

Z = Var()
finite = st.floats(-2, 2, allow_nan=False, allow_infinity=False)
consts = st.builds(lambda a, b: Const(complex(a, b)), finite, finite)
disc_points = st.builds(
    lambda r, t: r * cmath.exp(1j * t), st.floats(0, 0.95), st.floats(0, 2 * math.pi)
)


def trees(max_leaves=12):
    leaves = st.one_of(st.just(Z), consts)

    def extend(children):
        return st.one_of(
            st.builds(Add, children, children),
            st.builds(Sub, children, children),
            st.builds(Mul, children, children),
            st.builds(Div, children, children),
            st.builds(Pow, children, st.integers(-2, 3)),
            st.builds(Neg, children),
            st.builds(Sqrt, children),
            st.builds(Compose, children, children),
        )

    return st.recursive(leaves, extend, max_leaves=max_leaves)


def depth(e):
    return 1 + max((depth(c) for c in e.children), default=0)


def test_operators_build_trees():
    phi = (1 + Z**2) / 2
    assert phi == Div(Add(Const(1), Pow(Z, 2)), Const(2))
    assert evaluate(phi, 0.5) == 0.625
    assert phi(Z) == Compose(phi, Z)
    assert phi(0.5) == 0.625


def test_slit_map_matches_closed_form():
    phi = parse(oracles.slit(1))
    rng = np.random.default_rng(1)
    z = oracles.random_disc(rng, 200, 0.9)
    assert np.allclose(evaluate(phi, z), oracles.slit_phi(1, z), rtol=0, atol=1e-13)
    assert abs(evaluate(phi, 0) - (3 - 2 * math.sqrt(2))) < 1e-15


def test_derivative_matches_closed_form():
    h = parse("((1 + z) / (1 - z))^2")
    rng = np.random.default_rng(2)
    z = oracles.random_disc(rng, 100, 0.9)
    d = derivative(h, z)
    assert np.allclose(d, oracles.slit_hprime(z), rtol=1e-13)
    assert derivative(h, 0) == 4


def test_cayley_nodes_match_closed_forms():
    rng = np.random.default_rng(3)
    z = oracles.random_disc(rng, 50, 0.9)
    for expr, fn in (
        ("cayley(tau=1, to=RH)", oracles.cayley_rh),
        ("cayley(tau=1, to=H)", oracles.cayley_h),
    ):
        e = parse(expr)
        assert np.allclose(evaluate(e, z), fn(z), atol=1e-12)
    w = oracles.cayley_h(z)
    assert np.allclose(evaluate(parse("icayley(tau=1, to=H)"), w), z, atol=1e-12)
    inv = parse("icayley(tau=1, to=H)")
    eps = 1e-6
    fd = (evaluate(inv, w[0] + eps) - evaluate(inv, w[0] - eps)) / (2 * eps)
    assert abs(derivative(inv, w[0]) - fd) < 1e-7 * abs(fd)


def test_rotated_cayley_sends_tau_to_infinity():
    tau = cmath.exp(0.7j)
    c = parse(f"cayley(tau=({tau.real!r} + {tau.imag!r}i), to=RH)")
    assert abs(evaluate(c, 0.999999 * tau)) > 1e5
    assert evaluate(c, 0).real > 0


def test_scalar_and_array_agree():
    phi = parse(oracles.slit(2.5))
    z = np.array([0.1, -0.3 + 0.2j, 0.5j])
    vals, ders = jet(phi, z)
    for k, p in enumerate(z):
        v, d = jet(phi, complex(p))
        assert v == pytest.approx(vals[k], abs=1e-15)
        assert d == pytest.approx(ders[k], rel=1e-14)


@given(trees(), trees(), disc_points)
def test_chain_rule(f, g, z):
    assume(depth(f) <= 8 and depth(g) <= 8)
    try:
        gz, dg = jet(g, z)
        _, df = jet(f, gz)
        _, dfg = jet(compose(f, g), z)
    except KoenigsError:
        assume(False)
    assume(abs(gz) < 1e6 and abs(dg) < 1e6 and abs(df) < 1e6)
    expect = df * dg
    assert abs(dfg - expect) <= 1e-10 * max(abs(expect), 1.0)


@given(trees(), disc_points)
def test_derivative_matches_complex_difference(f, z):
    assume(depth(f) <= 8)
    h = 1e-6
    try:
        d = derivative(f, z)
        up, down = evaluate(f, z + h), evaluate(f, z - h)
        upi, downi = evaluate(f, z + 1j * h), evaluate(f, z - 1j * h)
    except KoenigsError:
        assume(False)
    assume(abs(d) < 1e3 and max(abs(up), abs(down)) < 1e3)
    fd = (up - down) / (2 * h)
    fdi = (upi - downi) / (2j * h)
    # near a branch cut or pole the two directions disagree: skip those
    assume(abs(fd - fdi) < 1e-5 * max(1, abs(fd)))
    assert abs(d - fd) < 1e-4 * max(1, abs(d))


@pytest.mark.parametrize("expr", [oracles.QUAD, oracles.slit(1), oracles.UPPER_SHIFT, oracles.ELLIPTIC])
@pytest.mark.parametrize("n", [1, 5, 12])
def test_orbit_log_derivative_matches_composite(expr, n):
    phi = parse(expr)
    z0 = 0.2 - 0.1j
    orb = iterate(phi, z0, n, stagnation_tol=None)
    got = math.exp(orb.log_derivative(n).real)
    want = abs(derivative(power(phi, n), z0))
    assert got == pytest.approx(want, rel=1e-8)
    assert orb.points[-1] == pytest.approx(evaluate(power(phi, n), z0), abs=1e-14)


@pytest.mark.parametrize("expr", [oracles.QUAD, oracles.slit(1), oracles.AFFINE, oracles.UPPER_SHIFT, oracles.ELLIPTIC])
def test_schwarz_pick(expr):
    phi = parse(expr)
    rng = np.random.default_rng(11)
    z, w = oracles.random_disc(rng, 500, 0.95), oracles.random_disc(rng, 500, 0.95)
    assert np.all(oracles.pseudo(evaluate(phi, z), evaluate(phi, w)) <= oracles.pseudo(z, w) + 1e-12)


def test_iterate_many_matches_scalar_orbit():
    phi = parse(oracles.QUAD)
    y, d = iterate_many(phi, [0.3], 50, with_derivative=True)
    orb = iterate(phi, 0.3, 50, stagnation_tol=None)
    assert y[0] == orb.points[-1]
    assert abs(d[0]) == pytest.approx(math.exp(orb.log_derivative().real), rel=1e-12)


def test_division_by_zero_is_a_domain_error():
    with pytest.raises(DomainError):
        evaluate(parse("1 / z"), 0)
    with pytest.raises(DomainError):
        evaluate(parse("1 / z"), np.array([0.1, 0.0]))


def test_sqrt_on_branch_cut_is_a_domain_error():
    with pytest.raises(DomainError):
        evaluate(parse("sqrt(z - 1)"), 0.5)
    assert evaluate(parse("sqrt(z - 1)"), 0.5 + 1e-3j).imag > 0


def test_overflow_is_reported():
    with pytest.raises(NumericOverflow):
        evaluate(parse("(1e200 * z)^2"), 0.5)


def test_orbit_leaving_disc_is_instability():
    with pytest.raises(InstabilityError):
        iterate(parse("2 * z"), 0.3, 10)
    orb = iterate(parse("2 * z"), 0.3, 10, on_exit="truncate")
    assert orb.reason == "left disc"
    assert len(orb) == 2


def test_stagnation_and_stop_reasons():
    assert iterate(parse("z / 2"), 0.5, 10_000).reason == "stagnated"
    assert iterate(parse(oracles.QUAD), 0.0, 100).reason == "reached N"
    orb = iterate(parse(oracles.QUAD), 0.0, 100, stop=lambda k, z: k == 7)
    assert orb.reason == "stopped" and len(orb) == 8


def test_vanishing_derivative_logs_minus_infinity():
    orb = iterate(parse(oracles.QUAD), 0.0, 3)
    assert orb.step_log_deriv[0, 0] == -math.inf


def test_seed_outside_disc_rejected():
    with pytest.raises(DomainError):
        iterate(parse("z / 2"), 1.0, 3)


def test_power_of_zero_is_identity():
    assert power(parse("z / 2"), 0) == Var()
    assert evaluate(power(parse("z / 2"), 3), 0.8) == pytest.approx(0.1)
