"""Text syntax for map expressions, plus the corpus file loader.

Grammar (loosest binding first)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := primary ("^" ["-" | "+"] INT)*
    primary := NUMBER ["i"] | "i" | "z" | "(" expr ")"
             | "sqrt(" expr ")" | "neg(" expr ")" | "compose(" expr "," expr ")"
             | ("cayley" | "icayley") "(" "tau" "=" expr "," "to" "=" ("H" | "RH") ")"

``tau`` must be a constant expression.  Parse errors report byte offsets.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .core import (
    Add,
    Cayley,
    CayleyInverse,
    Compose,
    Const,
    Div,
    MapExpr,
    Mul,
    Neg,
    Pow,
    Sqrt,
    Sub,
    Var,
    evaluate,
)
from .errors import CorpusError, ParseError

MAX_DEPTH = 100

_NUMBER = re.compile(r"(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_PUNCT = set("+-*/^(),=")


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, imag, ident, punct, end
    text: str
    pos: int  # character index
    value: complex = 0j


def _tokenize(src: str, offset) -> list[_Tok]:
    toks = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n":
            i += 1
            continue
        if c.isdigit() or (c == "." and i + 1 < n and src[i + 1].isdigit()):
            m = _NUMBER.match(src, i)
            j = m.end()
            val = float(m.group(0))
            if not math.isfinite(val):
                raise ParseError("literal out of range", offset(i))
            if j < n and src[j] == "i" and not (j + 1 < n and (src[j + 1].isalnum() or src[j + 1] == "_")):
                toks.append(_Tok("num", src[i : j + 1], i, complex(0, val)))
                i = j + 1
            elif j < n and (src[j].isalpha() or src[j] == "_" or src[j] == "."):
                raise ParseError("malformed numeric literal", offset(j))
            else:
                toks.append(_Tok("num", m.group(0), i, complex(val)))
                i = j
            continue
        if c.isascii() and (c.isalpha() or c == "_"):
            m = _IDENT.match(src, i)
            toks.append(_Tok("ident", m.group(0), i))
            i = m.end()
            continue
        if c in _PUNCT:
            toks.append(_Tok("punct", c, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {c!r}", offset(i))
    toks.append(_Tok("end", "", n))
    return toks


class _Parser:
    def __init__(self, src: str):
        self.src = src
        self.toks = _tokenize(src, self.offset)
        self.k = 0
        self.depth = 0

    def offset(self, pos: int) -> int:
        return len(self.src[:pos].encode("utf-8"))

    def fail(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.peek()
        raise ParseError(msg, self.offset(tok.pos))

    def peek(self) -> _Tok:
        return self.toks[self.k]

    def take(self) -> _Tok:
        t = self.toks[self.k]
        self.k += 1
        return t

    def accept(self, text: str) -> bool:
        t = self.peek()
        if t.kind in ("punct", "ident") and t.text == text:
            self.k += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        t = self.peek()
        if t.kind in ("punct", "ident") and t.text == text:
            self.k += 1
            return t
        what = "end of input" if t.kind == "end" else repr(t.text)
        self.fail(f"expected {text!r}, found {what}")

    def parse(self) -> MapExpr:
        e = self.expr()
        if self.peek().kind != "end":
            self.fail(f"unexpected {self.peek().text!r}")
        return e

    def expr(self) -> MapExpr:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            self.fail("expression nested too deeply")
        e = self.term()
        while True:
            if self.accept("+"):
                e = _fold(Add, e, self.term())
            elif self.accept("-"):
                e = _fold(Sub, e, self.term())
            else:
                break
        self.depth -= 1
        return e

    def term(self) -> MapExpr:
        e = self.unary()
        while True:
            if self.accept("*"):
                e = Mul(e, self.unary())
            elif self.accept("/"):
                e = Div(e, self.unary())
            else:
                return e

    def unary(self) -> MapExpr:
        if self.accept("-"):
            self.depth += 1
            if self.depth > MAX_DEPTH:
                self.fail("expression nested too deeply")
            e = self.unary()
            self.depth -= 1
            if isinstance(e, Const):
                return Const(-e.value)
            return Neg(e)
        return self.power()

    def power(self) -> MapExpr:
        e = self.primary()
        while self.accept("^"):
            sign = 1
            if self.accept("-"):
                sign = -1
            elif self.accept("+"):
                pass
            t = self.peek()
            if t.kind != "num" or not t.text.isdigit():
                self.fail("expected an integer exponent")
            self.k += 1
            k = int(t.text)
            if k > 10**6:
                self.fail("exponent too large", t)
            e = Pow(e, sign * k)
        return e

    def primary(self) -> MapExpr:
        t = self.peek()
        if t.kind == "num":
            self.k += 1
            return Const(t.value)
        if t.kind == "punct" and t.text == "(":
            self.k += 1
            e = self.expr()
            self.expect(")")
            return e
        if t.kind != "ident":
            what = "end of input" if t.kind == "end" else repr(t.text)
            self.fail(f"expected an operand, found {what}")
        self.k += 1
        name = t.text
        if name == "z":
            return Var()
        if name == "i":
            return Const(1j)
        if name in ("sqrt", "neg"):
            self.expect("(")
            e = self.expr()
            self.expect(")")
            return Sqrt(e) if name == "sqrt" else Neg(e)
        if name == "compose":
            self.expect("(")
            f = self.expr()
            self.expect(",")
            g = self.expr()
            self.expect(")")
            return Compose(f, g)
        if name in ("cayley", "icayley"):
            return self.cayley(name, t)
        self.fail(f"unknown identifier {name!r}", t)

    def cayley(self, name: str, head: _Tok) -> MapExpr:
        self.expect("(")
        args = {}
        while True:
            key = self.peek()
            if key.kind != "ident" or key.text not in ("tau", "to"):
                self.fail("expected 'tau=' or 'to='")
            if key.text in args:
                self.fail(f"duplicate argument {key.text!r}")
            self.k += 1
            self.expect("=")
            if key.text == "tau":
                at = self.peek()
                e = self.expr()
                if _mentions_z(e):
                    self.fail("tau must be a constant", at)
                try:
                    args["tau"] = (complex(evaluate(e, 0j)), at)
                except Exception:
                    self.fail("tau is not a finite constant", at)
            else:
                tgt = self.peek()
                if tgt.kind != "ident" or tgt.text not in ("H", "RH"):
                    self.fail("expected H or RH")
                self.k += 1
                args["to"] = (tgt.text, tgt)
            if not self.accept(","):
                break
        self.expect(")")
        for req in ("tau", "to"):
            if req not in args:
                self.fail(f"missing argument {req!r}", head)
        tau, at = args["tau"]
        if abs(abs(tau) - 1) > 1e-12:
            self.fail("tau must lie on the unit circle", at)
        cls = Cayley if name == "cayley" else CayleyInverse
        return cls(tau, args["to"][0])


def _fold(cls, a: MapExpr, b: MapExpr) -> MapExpr:
    # "(0.1-0.2i)" reads back as one constant; same arithmetic as evaluation
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value if cls is Add else a.value - b.value)
    return cls(a, b)


def _mentions_z(e: MapExpr) -> bool:
    stack = [e]
    while stack:
        x = stack.pop()
        if isinstance(x, Var):
            return True
        stack.extend(x.children)
    return False


def parse(src: Union[str, bytes]) -> MapExpr:
    """Parse a map expression; raises :class:`ParseError` with a byte offset."""
    if isinstance(src, (bytes, bytearray)):
        try:
            src = bytes(src).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError("input is not valid UTF-8", exc.start) from None
    return _Parser(src).parse()


def _real(x: float) -> str:
    s = repr(float(x))
    return f"({s})" if s.startswith("-") else s


def _literal(c: complex) -> str:
    re_, im = c.real, c.imag
    if im == 0 and math.copysign(1, im) > 0:
        return _real(re_)
    mag = repr(abs(im))
    sign = "-" if math.copysign(1, im) < 0 else "+"
    return f"({re_!r}{sign}{mag}i)"


def format_expr(e: MapExpr) -> str:
    """Canonical text form; ``parse(format_expr(e))`` evaluates like ``e``."""
    if isinstance(e, Var):
        return "z"
    if isinstance(e, Const):
        return _literal(e.value)
    ops = {Add: "+", Sub: "-", Mul: "*", Div: "/"}
    if type(e) in ops:
        return f"({format_expr(e.left)} {ops[type(e)]} {format_expr(e.right)})"
    if isinstance(e, Pow):
        return f"({format_expr(e.base)})^{e.k}"
    if isinstance(e, Sqrt):
        return f"sqrt({format_expr(e.arg)})"
    if isinstance(e, Neg):
        return f"neg({format_expr(e.arg)})"
    if isinstance(e, Compose):
        return f"compose({format_expr(e.outer)}, {format_expr(e.inner)})"
    if isinstance(e, (Cayley, CayleyInverse)):
        name = "cayley" if isinstance(e, Cayley) else "icayley"
        head = f"{name}(tau={_literal(e.tau)}, to={e.target})"
        return head if isinstance(e.arg, Var) else f"compose({head}, {format_expr(e.arg)})"
    raise TypeError(f"unknown node {type(e).__name__}")


# ---------------------------------------------------------------- corpus


@dataclass(frozen=True)
class Expected:
    dw: Optional[complex] = None
    type: Optional[str] = None
    multiplier: Optional[float] = None
    step: Optional[str] = None
    koenigs_closed_form: Optional[str] = None
    slc_partners: tuple = ()  # ((partner expression, c), ...)


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    expr: str
    expected: Expected = field(default_factory=Expected)

    @property
    def map(self) -> MapExpr:
        return parse(self.expr)


TYPE_LABELS = ("identity", "elliptic", "elliptic-automorphism", "hyperbolic", "parabolic")
STEP_LABELS = ("zero", "positive")


def _complex_value(v, where: str) -> complex:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex(v[0], v[1])
    if isinstance(v, dict) and set(v) == {"re", "im"}:
        return complex(v["re"], v["im"])
    raise CorpusError(f"{where}: expected a complex value [re, im]")


def _check_keys(obj, allowed, where, required=()):
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: expected an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        raise CorpusError(f"{where}: unknown field(s) {', '.join(extra)}")
    missing = [k for k in required if k not in obj]
    if missing:
        raise CorpusError(f"{where}: missing field(s) {', '.join(missing)}")


def _entry(obj, k: int) -> CorpusEntry:
    where = f"entry {k}"
    _check_keys(obj, ("name", "expr", "expected"), where, required=("name", "expr"))
    if not isinstance(obj["name"], str) or not isinstance(obj["expr"], str):
        raise CorpusError(f"{where}: name and expr must be strings")
    try:
        parse(obj["expr"])
    except ParseError as exc:
        raise CorpusError(f"{where} ({obj['name']}): {exc}") from None
    exp = obj.get("expected") or {}
    w = f"{where}.expected"
    _check_keys(exp, Expected.__dataclass_fields__, w)
    dw = _complex_value(exp["dw"], f"{w}.dw") if "dw" in exp else None
    if dw is not None and abs(dw) > 1 + 1e-12:
        raise CorpusError(f"{w}.dw: must satisfy |dw| <= 1")
    typ = exp.get("type")
    if typ is not None and typ not in TYPE_LABELS:
        raise CorpusError(f"{w}.type: unknown label {typ!r}")
    mult = exp.get("multiplier")
    if mult is not None:
        if not isinstance(mult, (int, float)) or isinstance(mult, bool):
            raise CorpusError(f"{w}.multiplier: expected a number")
        if dw is not None and abs(dw) > 1 - 1e-12 and not 0 < mult <= 1:
            raise CorpusError(f"{w}.multiplier: boundary multiplier must lie in (0, 1]")
    step = exp.get("step")
    if step is not None and step not in STEP_LABELS:
        raise CorpusError(f"{w}.step: unknown label {step!r}")
    kcf = exp.get("koenigs_closed_form")
    if kcf is not None:
        try:
            parse(kcf)
        except ParseError as exc:
            raise CorpusError(f"{w}.koenigs_closed_form: {exc}") from None
    partners = []
    for j, p in enumerate(exp.get("slc_partners", [])):
        pw = f"{w}.slc_partners[{j}]"
        _check_keys(p, ("partner", "c"), pw, required=("partner", "c"))
        try:
            parse(p["partner"])
        except ParseError as exc:
            raise CorpusError(f"{pw}: {exc}") from None
        partners.append((p["partner"], _complex_value(p["c"], f"{pw}.c")))
    return CorpusEntry(
        obj["name"],
        obj["expr"],
        Expected(dw, typ, None if mult is None else float(mult), step, kcf, tuple(partners)),
    )


def load_corpus(source: Union[str, Path]) -> list[CorpusEntry]:
    """Read a corpus file (a JSON list of entries) and validate it."""
    path = Path(source)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CorpusError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return parse_corpus(data)


def parse_corpus(data) -> list[CorpusEntry]:
    if not isinstance(data, list):
        raise CorpusError("corpus must be a JSON list of entries")
    entries = [_entry(obj, k) for k, obj in enumerate(data)]
    names = [e.name for e in entries]
    if len(set(names)) != len(names):
        raise CorpusError("corpus entry names must be unique")
    return entries


def default_corpus_path() -> Path:
    return Path(__file__).with_name("data") / "corpus.json"


__all__ = [
    "parse",
    "format_expr",
    "load_corpus",
    "parse_corpus",
    "CorpusEntry",
    "Expected",
    "default_corpus_path",
]
