"""Line-oriented optical-bench language.

::

    # comment
    space lmax=4 paths=1
    hwp theta=pi/8
    sagnac gamma=pi/16
    phase phi=-pi/2 oam=2
    qplate q=1 delta=pi
    postselect pol=H path=0

Values are exact: numbers are rationals and angles rational multiples of
``pi``, so ``pi/16`` never goes through a decimal. Parsing is total; every
problem becomes a :class:`Diagnostic` and the parser resynchronizes at the next
line.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator

from .circuits import Circuit, Postselection
from .elements import (
    HWP,
    PBS,
    QWP,
    Attenuator,
    DovePrism,
    Mirror,
    OpticalElement,
    PhaseShift,
    QPlate,
    SagnacPSI,
)
from .errors import QTransferError
from .hilbert import Space, default_lmax

POL_KEYS = {"pol"}

# kind -> (required keys, optional keys)
SIGNATURES: dict[str, tuple[tuple[str, ...], tuple[str, ...]]] = {
    "hwp": (("theta",), ()),
    "qwp": (("theta",), ()),
    "dove": (("gamma",), ()),
    "qplate": (("q", "delta"), ()),
    "pbs": ((), ()),
    "mirror": ((), ()),
    "phase": (("phi",), ("pol", "oam", "path")),
    "att": (("eta",), ()),
    "sagnac": (("gamma",), ()),
    "postselect": (("pol", "path"), ("oam",)),
}
DECL_SIGNATURE = (("lmax",), ("paths",))


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str
    token: str = ""

    def format(self, filename: str = "<bench>") -> str:
        tail = f" (at {self.token!r})" if self.token else ""
        return f"{filename}:{self.line}:{self.col}: {self.message}{tail}"


class BenchError(QTransferError):
    def __init__(self, diagnostics, filename: str = "<bench>"):
        self.diagnostics = tuple(diagnostics)
        self.filename = filename
        super().__init__("\n".join(d.format(filename) for d in self.diagnostics))


@dataclass(frozen=True)
class Value:
    """``coeff * pi**pi_power`` with ``pi_power`` in {0, 1}."""

    coeff: Fraction
    pi_power: int = 0

    def __float__(self):
        return float(self.coeff) * (math.pi if self.pi_power else 1.0)

    def is_integer(self) -> bool:
        return self.pi_power == 0 and self.coeff.denominator == 1

    def format(self) -> str:
        c = self.coeff
        if self.pi_power == 0:
            return str(c)
        if c == 0:
            return "0"
        sign = "-" if c < 0 else ""
        num, den = abs(c.numerator), c.denominator
        body = "pi" if num == 1 else f"{num}*pi"
        return f"{sign}{body}" + (f"/{den}" if den != 1 else "")


@dataclass(frozen=True)
class Statement:
    kind: str
    args: dict
    line: int
    col: int
    arg_cols: dict = field(default_factory=dict, compare=False)

    def format(self) -> str:
        required, optional = SIGNATURES.get(self.kind, DECL_SIGNATURE)
        parts = [self.kind]
        for key in required + optional:
            if key in self.args:
                v = self.args[key]
                parts.append(f"{key}={v if isinstance(v, str) else v.format()}")
        return " ".join(parts)


@dataclass(frozen=True)
class BenchSpec:
    space: Statement | None = None
    statements: tuple[Statement, ...] = ()
    postselect: Statement | None = None
    diagnostics: tuple[Diagnostic, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.diagnostics


# -- lexing -------------------------------------------------------------------

TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<comment>\#.*)
  | (?P<number>(?:[0-9]|\.[0-9])(?:[eE][+-][0-9]|[0-9A-Za-z_.])*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[=/*\-])
""", re.VERBOSE)
NUMBER_RE = re.compile(r"(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+)(?P<exp>[eE][+-]?[0-9]+)?")
# exact rationals: keep 10**exp small enough to build
MAX_EXPONENT = 400


@dataclass(frozen=True)
class Token:
    kind: str  # number | ident | op | bad | eol
    text: str
    col: int


def _lex(line: str) -> Iterator[Token]:
    pos = 0
    while pos < len(line):
        m = TOKEN_RE.match(line, pos)
        if m is None:
            yield Token("bad", line[pos], pos + 1)
            pos += 1
            continue
        kind = m.lastgroup
        if kind == "comment":
            break
        if kind != "ws":
            yield Token(kind, m.group(), pos + 1)
        pos = m.end()
    yield Token("eol", "", len(line) + 1)


class _LineError(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


class _LineParser:
    def __init__(self, line: str, lineno: int):
        self.tokens = list(_lex(line))
        self.i = 0
        self.lineno = lineno

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.tok
        raise _LineError(Diagnostic(self.lineno, tok.col, message, tok.text))

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def statement(self) -> Statement | None:
        if self.tok.kind == "eol":
            return None
        head = self.tok
        if head.kind != "ident":
            self.fail("expected an element name")
        self.advance()
        args, cols = {}, {}
        while self.tok.kind != "eol":
            key = self.tok
            if key.kind != "ident" or self.peek().text != "=":
                self.fail("expected KEY=value")
            self.advance()
            self.advance()
            if key.text in args:
                self.fail(f"duplicate argument {key.text!r}", key)
            cols[key.text] = key.col
            if key.text in POL_KEYS:
                val = self.tok
                if val.kind != "ident":
                    self.fail(f"{key.text} expects a polarization name")
                self.advance()
                args[key.text] = val.text
            else:
                args[key.text] = self.expr()
        return Statement(head.text, args, self.lineno, head.col, cols)

    def expr(self) -> Value:
        value = self.unary()
        while self.tok.text in ("*", "/") and self.tok.kind == "op":
            op = self.advance()
            rhs = self.unary()
            if op.text == "*":
                value = Value(value.coeff * rhs.coeff, value.pi_power + rhs.pi_power)
            else:
                if rhs.coeff == 0:
                    self.fail("division by zero", op)
                value = Value(value.coeff / rhs.coeff, value.pi_power - rhs.pi_power)
            if value.pi_power not in (0, 1):
                self.fail("expression must be a rational multiple of pi", op)
        return value

    def unary(self) -> Value:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            v = self.unary()
            return Value(-v.coeff, v.pi_power)
        tok = self.tok
        if tok.kind == "number":
            m = NUMBER_RE.fullmatch(tok.text)
            if not m:
                self.fail("malformed number")
            if m.group("exp") and abs(int(m.group("exp")[1:])) > MAX_EXPONENT:
                self.fail("number out of range")
            self.advance()
            return Value(Fraction(tok.text))
        if tok.kind == "ident" and tok.text == "pi":
            self.advance()
            return Value(Fraction(1), 1)
        if tok.kind == "eol":
            self.fail("expected a value")
        self.fail("expected a number or pi")


def _check_signature(st: Statement, signature) -> list[Diagnostic]:
    required, optional = signature
    diags = []
    for key in st.args:
        if key not in required + optional:
            diags.append(Diagnostic(st.line, st.arg_cols.get(key, st.col),
                                    f"{st.kind} does not take argument {key!r}", key))
    for key in required:
        if key not in st.args:
            diags.append(Diagnostic(st.line, st.col, f"{st.kind} is missing argument {key!r}",
                                    st.kind))
    return diags


def _decode(data) -> tuple[str | None, Diagnostic | None]:
    if isinstance(data, str):
        return data, None
    try:
        return bytes(data).decode("utf-8"), None
    except UnicodeDecodeError as exc:
        prefix = bytes(data)[:exc.start]
        line = prefix.count(b"\n") + 1
        col = exc.start - (prefix.rfind(b"\n") + 1) + 1
        return None, Diagnostic(line, col, "input is not valid UTF-8")


def parse(text) -> BenchSpec:
    """Parse bench text (``str`` or ``bytes``); never raises on bad input."""
    text, bad = _decode(text)
    if bad is not None:
        return BenchSpec(diagnostics=(bad,))
    diags: list[Diagnostic] = []
    space = post = None
    statements = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        try:
            st = _LineParser(line, lineno).statement()
        except _LineError as exc:
            diags.append(exc.diag)
            continue
        if st is None:
            continue
        if st.kind == "space":
            diags += _check_signature(st, DECL_SIGNATURE)
            if space is not None:
                diags.append(Diagnostic(lineno, st.col, "duplicate space declaration", "space"))
            for key in ("lmax", "paths"):
                v = st.args.get(key)
                if isinstance(v, Value) and not v.is_integer():
                    diags.append(Diagnostic(lineno, st.arg_cols[key], f"{key} must be an integer",
                                            v.format()))
            space = st
        elif st.kind not in SIGNATURES:
            diags.append(Diagnostic(lineno, st.col, f"unknown element {st.kind!r}", st.kind))
        else:
            diags += _check_signature(st, SIGNATURES[st.kind])
            if st.kind == "postselect":
                if post is not None:
                    diags.append(Diagnostic(lineno, st.col, "duplicate postselect", st.kind))
                post = st
            statements.append(st)
    return BenchSpec(space, tuple(statements), post, tuple(diags))


def format_bench(spec: BenchSpec) -> str:
    """Canonical text; ``format_bench(parse(format_bench(s))) == format_bench(s)``."""
    lines = [spec.space.format()] if spec.space is not None else []
    lines += [st.format() for st in spec.statements]
    return "\n".join(lines) + ("\n" if lines else "")


# -- lowering -----------------------------------------------------------------

def _int_arg(st: Statement, key: str, diags: list) -> int | None:
    v = st.args.get(key)
    if v is None:
        return None
    if not v.is_integer():
        diags.append(Diagnostic(st.line, st.arg_cols.get(key, st.col),
                                f"{key} must be an integer", v.format()))
        return None
    return int(v.coeff)


def _element(st: Statement, space: Space, diags: list) -> OpticalElement | None:
    a = st.args
    col = lambda key: st.arg_cols.get(key, st.col)  # noqa: E731
    if st.kind == "hwp":
        return HWP(float(a["theta"]))
    if st.kind == "qwp":
        return QWP(float(a["theta"]))
    if st.kind == "dove":
        return DovePrism(float(a["gamma"]))
    if st.kind == "sagnac":
        return SagnacPSI(float(a["gamma"]))
    if st.kind == "qplate":
        q = a["q"]
        if q.pi_power or (2 * q.coeff).denominator != 1:
            diags.append(Diagnostic(st.line, col("q"), "q-plate charge must be a half-integer",
                                    q.format()))
            return None
        return QPlate(float(q.coeff), float(a["delta"]))
    if st.kind == "pbs":
        if space.paths < 2:
            diags.append(Diagnostic(st.line, st.col, "pbs needs at least two paths", "pbs"))
            return None
        return PBS()
    if st.kind == "mirror":
        return Mirror()
    if st.kind == "att":
        eta = float(a["eta"])
        if a["eta"].pi_power or not 0 <= eta <= 1:
            diags.append(Diagnostic(st.line, col("eta"), "eta must lie in [0, 1]",
                                    a["eta"].format()))
            return None
        return Attenuator(eta)
    if st.kind == "phase":
        pol = a.get("pol")
        if pol is not None and pol not in ("H", "V"):
            diags.append(Diagnostic(st.line, col("pol"), "pol must be H or V", pol))
            return None
        oam, path = _int_arg(st, "oam", diags), _int_arg(st, "path", diags)
        if oam is not None and abs(oam) > space.lmax:
            diags.append(Diagnostic(st.line, col("oam"), f"|oam| exceeds lmax={space.lmax}",
                                    str(oam)))
            return None
        if path is not None and not 0 <= path < space.paths:
            diags.append(Diagnostic(st.line, col("path"), f"path outside {space.paths} paths",
                                    str(path)))
            return None
        return PhaseShift(float(a["phi"]), pol, oam, path)
    raise AssertionError(st.kind)


def _postselection(st: Statement, space: Space, diags: list) -> Postselection | None:
    pol = st.args["pol"]
    if pol not in ("H", "V"):
        diags.append(Diagnostic(st.line, st.arg_cols.get("pol", st.col), "pol must be H or V", pol))
    path = _int_arg(st, "path", diags)
    if path is not None and not 0 <= path < space.paths:
        diags.append(Diagnostic(st.line, st.arg_cols.get("path", st.col),
                                f"path outside {space.paths} paths", str(path)))
    oam = _int_arg(st, "oam", diags)
    return Postselection(pol, path, oam)


def lower(spec: BenchSpec, input_lmax: int = 2, filename: str = "<bench>") -> Circuit:
    """Build a :class:`Circuit`; semantic problems raise :class:`BenchError`."""
    if spec.diagnostics:
        raise BenchError(spec.diagnostics, filename)
    diags: list[Diagnostic] = []
    elements_st = [st for st in spec.statements if st.kind != "postselect"]
    if spec.space is not None:
        lmax = _int_arg(spec.space, "lmax", diags)
        paths = _int_arg(spec.space, "paths", diags) if "paths" in spec.space.args else 1
        if diags:
            raise BenchError(diags, filename)
        if lmax < 0 or paths < 1:
            raise BenchError([Diagnostic(spec.space.line, spec.space.col,
                                         "space needs lmax >= 0 and paths >= 1", "space")],
                             filename)
        declared_input = None
    else:
        charges = []
        for st in elements_st:
            q = st.args.get("q")
            if st.kind == "qplate" and q is not None and not q.pi_power:
                charges.append(float(q.coeff))
        lmax = default_lmax(charges, input_lmax)
        paths = 2 if any(st.kind == "pbs" for st in elements_st) else 1
        declared_input = input_lmax
    space = Space(lmax, paths)
    elements = []
    for st in elements_st:
        try:
            e = _element(st, space, diags)
        except (ValueError, QTransferError) as exc:
            diags.append(Diagnostic(st.line, st.col, str(exc), st.kind))
            continue
        if e is not None:
            elements.append(e)
    post = _postselection(spec.postselect, space, diags) if spec.postselect else None
    if diags:
        raise BenchError(diags, filename)
    if declared_input is None:
        charges = sum(round(2 * abs(e.qplate_charge)) for e in elements)
        if lmax - charges < 0:
            raise BenchError([Diagnostic(spec.space.line, spec.space.col,
                                         f"lmax={lmax} too small for q-plates shifting |l| by "
                                         f"{charges}", "space")], filename)
    return Circuit(space, tuple(elements), post, input_lmax=declared_input)


def load_bench(path) -> Circuit:
    from pathlib import Path

    p = Path(path)
    return lower(parse(p.read_bytes()), filename=str(p))


def circuit_to_bench(c: Circuit) -> str:
    """Bench text for a circuit built from DSL-expressible elements."""

    def val(x: float) -> str:
        frac = Fraction(x / math.pi).limit_denominator(1 << 16)
        if float(frac) * math.pi == x:
            return Value(frac, 1).format()
        return Value(Fraction(x)).format()

    lines = [f"space lmax={c.space.lmax} paths={c.space.paths}"]
    for e in c.elements:
        if isinstance(e, HWP):
            lines.append(f"hwp theta={val(e.theta)}")
        elif isinstance(e, QWP):
            lines.append(f"qwp theta={val(e.theta)}")
        elif isinstance(e, SagnacPSI):
            lines.append(f"sagnac gamma={val(e.gamma)}")
        elif isinstance(e, DovePrism):
            lines.append(f"dove gamma={val(e.gamma)}")
        elif isinstance(e, QPlate):
            lines.append(f"qplate q={Value(Fraction(e.q)).format()} delta={val(e.delta)}")
        elif isinstance(e, PBS) and e.transmit is None and e.reflect is None and e.phase == 1j:
            lines.append("pbs")
        elif isinstance(e, Mirror):
            lines.append("mirror")
        elif isinstance(e, Attenuator):
            lines.append(f"att eta={Value(Fraction(e.eta)).format()}")
        elif isinstance(e, PhaseShift):
            extra = "".join(f" {k}={v}" for k, v in (("pol", e.pol), ("oam", e.oam),
                                                       ("path", e.path)) if v is not None)
            lines.append(f"phase phi={val(e.phi)}{extra}")
        else:
            raise ValueError(f"{type(e).__name__} has no bench representation")
    if c.postselection is not None:
        p = c.postselection
        if p.pol is None or p.path is None:
            raise ValueError("bench postselect needs both pol and path")
        tail = f" oam={p.oam}" if p.oam is not None else ""
        lines.append(f"postselect pol={p.pol} path={p.path}{tail}")
    return format_bench(parse("\n".join(lines)))
