import json

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from koenigs.core import Cayley, CayleyInverse, Compose, Const, Neg, Pow, Var, evaluate
from koenigs.dsl import default_corpus_path, format_expr, load_corpus, parse, parse_corpus
from koenigs.errors import CorpusError, KoenigsError, ParseError

from test_core import depth, disc_points, trees


@pytest.mark.parametrize(
    "src, z, want",
    [
        ("-z^2", 0.5, -0.25),
        ("2*z+1", 0.5, 2.0),
        ("1-z-z", 0.25, 0.5),
        ("8/2/2", 0.0, 2.0),
        ("2^-1", 0.0, 0.5),
        ("-2^2", 0.0, -4.0),
        ("(1+z)^2", 1.0 / 3, 16.0 / 9),
        ("2i", 0.0, 2j),
        ("1.5e-1i", 0.0, 0.15j),
        ("i*z", 0.5, 0.5j),
        ("neg(z)", 0.5, -0.5),
        ("sqrt(4)", 0.0, 2.0),
        ("compose(z^2, z+1)", 0.5, 2.25),
    ],
)
def test_precedence_and_literals(src, z, want):
    assert evaluate(parse(src), z) == pytest.approx(want)


def test_cayley_syntax():
    e = parse("cayley(tau=1, to=H)")
    assert e == Cayley(1, "H")
    assert parse("icayley(to=RH, tau=1i)") == CayleyInverse(1j, "RH")


@pytest.mark.parametrize(
    "src, offset",
    [
        ("z^", 2),
        ("z^2.5", 2),
        ("", 0),
        ("(z", 2),
        ("z)", 1),
        ("sqrt z", 5),
        ("foo(z)", 0),
        ("2in", 1),
        ("z # 2", 2),
        ("cayley(tau=2, to=H)", 11),
        ("cayley(tau=z, to=H)", 11),
        ("cayley(tau=1)", 0),
        ("cayley(tau=1, to=X)", 17),
        ("z+é", 2),
    ],
)
def test_parse_errors_report_byte_offsets(src, offset):
    with pytest.raises(ParseError) as info:
        parse(src)
    assert info.value.offset == offset


def test_invalid_utf8_reported_at_offset():
    with pytest.raises(ParseError) as info:
        parse(b"z+\xff")
    assert info.value.offset == 2


def test_deep_nesting_is_a_parse_error():
    with pytest.raises(ParseError):
        parse("(" * 5000 + "z" + ")" * 5000)
    with pytest.raises(ParseError):
        parse("-" * 5000 + "z")


def test_literals_round_trip_exactly():
    for c in (0.1, -0.3, 1e-300, 2.5e17, complex(0.1, -0.2), complex(-0.0, 1.0), 1j):
        e = Const(c)
        back = parse(format_expr(e))
        assert isinstance(back, Const) and back.value == e.value


@given(trees(), disc_points)
def test_format_parse_round_trip(e, z):
    assume(depth(e) <= 8)
    back = parse(format_expr(e))
    try:
        a = evaluate(e, z)
    except KoenigsError:
        with pytest.raises(KoenigsError):
            evaluate(back, z)
        return
    assert evaluate(back, z) == a


@given(st.binary(max_size=64))
def test_random_bytes_only_raise_parse_errors(data):
    try:
        parse(data)
    except ParseError:
        pass


@given(st.text(alphabet="z0123456789.+-*/^()i, =sqrtnegcomposecayleyHR", max_size=40))
def test_grammar_soup_only_raises_parse_errors(src):
    try:
        parse(src)
    except ParseError:
        pass


def test_bundled_corpus_loads():
    entries = load_corpus(default_corpus_path())
    assert len(entries) == 6
    names = {e.name for e in entries}
    assert "slit-step-one" in names
    slit = next(e for e in entries if e.name == "slit-step-one")
    assert slit.expected.koenigs_closed_form is not None
    assert [c for _, c in slit.expected.slc_partners] == [0.5, 2.5]


def test_corpus_rejects_unknown_fields(tmp_path):
    with pytest.raises(CorpusError, match="unknown field"):
        parse_corpus([{"name": "a", "expr": "z/2", "colour": "red"}])
    with pytest.raises(CorpusError, match="unknown field"):
        parse_corpus([{"name": "a", "expr": "z/2", "expected": {"kind": "x"}}])


@pytest.mark.parametrize(
    "entry, message",
    [
        ({"name": "a"}, "missing"),
        ({"name": "a", "expr": "z^"}, "byte offset 2"),
        ({"name": "a", "expr": "z/2", "expected": {"dw": [2, 0]}}, r"\|dw\|"),
        ({"name": "a", "expr": "z/2", "expected": {"dw": [1, 0], "multiplier": 1.5}}, "multiplier"),
        ({"name": "a", "expr": "z/2", "expected": {"type": "loxodromic"}}, "label"),
        ({"name": "a", "expr": "z/2", "expected": {"step": "big"}}, "label"),
    ],
)
def test_corpus_validation(entry, message):
    with pytest.raises(CorpusError, match=message):
        parse_corpus([entry])


def test_corpus_file_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(CorpusError, match="invalid JSON"):
        load_corpus(p)
    p.write_text(json.dumps({"name": "a"}))
    with pytest.raises(CorpusError, match="list"):
        load_corpus(p)
    p.write_text(json.dumps([{"name": "a", "expr": "z"}, {"name": "a", "expr": "z"}]))
    with pytest.raises(CorpusError, match="unique"):
        load_corpus(p)


def test_complex_values_accept_both_forms():
    a = parse_corpus([{"name": "a", "expr": "z/2", "expected": {"dw": {"re": 0, "im": 0}}}])
    b = parse_corpus([{"name": "a", "expr": "z/2", "expected": {"dw": [0, 0]}}])
    assert a[0].expected.dw == b[0].expected.dw == 0
