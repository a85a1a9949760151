"""Built-in geometries, a small geometry-definition language, and
closed-form hyperbolic operations.

The text format is line-oriented UTF-8 with ``#`` comments:

    param R = 2.0
    surface torus (u,v in [0,6.28]x[0,6.28]) =
        ((R + cos(v))*cos(u), (R + cos(v))*sin(u), sin(v))

    metric hyp (x,y in [-5,5]x[0.1,10]) = [[1/y^2, 0], [0, 1/y^2]]

    curve helix (t in [0,10]) = (cos(t), sin(t), 0.5*t)

Expressions support + - * / ^ (right-associative power), unary minus, the
functions sin, cos, tan, exp, log, sqrt, sinh, cosh, the constant pi, and
names bound by ``param`` lines.  The grammar is deliberately minimal: no
conditionals and no user functions, so jet evaluation is total on the
declared domain.

Most builtins are defined as source text in this same language and go
through the parser; the exceptions are the 3D round-sphere chart (the
grammar is two-dimensional) and function-shaped builtins whose defining
expressions arrive as parameters.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from . import numkit as nk
from .numkit import Jet, PreconditionError
from .curves import ParamCurve
from .surface_patch import SurfacePatch
from .intrinsic import MetricChart


# ---------------------------------------------------------------------------
# expression AST
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Name:
    ident: str
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Unary:
    op: str                       # "-"
    arg: object
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Binary:
    op: str                       # + - * / ^
    lhs: object
    rhs: object
    pos: tuple = field(default=(0, 0), compare=False)


@dataclass(frozen=True)
class Call:
    fn: str
    arg: object
    pos: tuple = field(default=(0, 0), compare=False)


FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh")

_FN_TABLE = {name: getattr(nk, name) for name in FUNCTIONS}


def free_names(e):
    """All identifiers appearing in an expression."""
    if isinstance(e, Num):
        return set()
    if isinstance(e, Name):
        return {e.ident}
    if isinstance(e, Unary):
        return free_names(e.arg)
    if isinstance(e, Binary):
        return free_names(e.lhs) | free_names(e.rhs)
    if isinstance(e, Call):
        return free_names(e.arg)
    raise PreconditionError(f"not an expression node: {e!r}")


def eval_expr(e, env):
    """Evaluate an expression over floats or jets."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Name):
        if e.ident == "pi" and "pi" not in env:
            return math.pi
        return env[e.ident]
    if isinstance(e, Unary):
        return -eval_expr(e.arg, env)
    if isinstance(e, Call):
        return _FN_TABLE[e.fn](eval_expr(e.arg, env))
    a = eval_expr(e.lhs, env)
    if e.op == "^":
        b = eval_expr(e.rhs, env)
        if isinstance(b, float) and float(b).is_integer():
            b = int(b)
        return a ** b
    b = eval_expr(e.rhs, env)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return a / b
    raise PreconditionError(f"unknown operator {e.op}")


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def print_expr(e, parent_prec=0):
    """Render an expression; parse(print(e)) reproduces e exactly."""
    if isinstance(e, Num):
        s = repr(float(e.value))
        if s.endswith(".0"):
            s = s[:-2]
        # negative literals re-enter the parser through unary minus, so
        # they need parens anywhere an operator could grab the sign
        return f"({s})" if e.value < 0 and parent_prec > 0 else s
    if isinstance(e, Name):
        return e.ident
    if isinstance(e, Call):
        return f"{e.fn}({print_expr(e.arg)})"
    if isinstance(e, Unary):
        s = f"-{print_expr(e.arg, _PREC['neg'])}"
        return f"({s})" if parent_prec > _PREC["neg"] else s
    p = _PREC[e.op]
    if e.op == "^":
        ls = print_expr(e.lhs, p + 1)      # right-associative
        rs = print_expr(e.rhs, p)
    else:
        ls = print_expr(e.lhs, p)          # left-associative
        rs = print_expr(e.rhs, p + 1)
    s = f"{ls} {e.op} {rs}" if e.op in ("+", "-") else f"{ls}{e.op}{rs}"
    return f"({s})" if parent_prec > p else s


# ---------------------------------------------------------------------------
# tokenizer and parser
# ---------------------------------------------------------------------------


class ParseError(ValueError):
    """Syntax error with location and the token set that was expected."""

    def __init__(self, message, line, col, expected=()):
        self.line = line
        self.col = col
        self.expected = tuple(sorted(expected))
        hint = f" (expected one of: {', '.join(self.expected)})" \
            if self.expected else ""
        super().__init__(f"line {line}, column {col}: {message}{hint}")


_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>\n)
  | (?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?
      |\d+(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<sym>\*|\+|-|/|\^|\(|\)|\[|\]|,|=)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str          # number | ident | sym | eof
    text: str
    line: int
    col: int


def tokenize(text):
    tokens = []
    line, col = 1, 1
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            raise ParseError(f"unexpected character {text[i]!r}", line, col)
        kind = m.lastgroup
        s = m.group()
        if kind == "newline":
            line += 1
            col = 1
        elif kind in ("ws", "comment"):
            col += len(s)
        else:
            tokens.append(Token(kind, s, line, col))
            col += len(s)
        i = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens):
        self.toks = tokens
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def advance(self):
        t = self.toks[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def fail(self, message, expected=()):
        t = self.peek()
        raise ParseError(message, t.line, t.col, expected)

    def expect_sym(self, sym):
        t = self.peek()
        if t.kind == "sym" and t.text == sym:
            return self.advance()
        self.fail(f"found {t.text!r}" if t.text else "unexpected end of "
                  "input", expected=(sym,))

    def expect_ident(self, what="identifier"):
        t = self.peek()
        if t.kind == "ident":
            return self.advance()
        self.fail(f"found {t.text!r} where {what} was expected",
                  expected=("identifier",))

    def expect_keyword(self, kw):
        t = self.peek()
        if t.kind == "ident" and t.text == kw:
            return self.advance()
        self.fail(f"found {t.text!r}", expected=(kw,))

    # expressions ------------------------------------------------------

    def parse_expr(self):
        return self.parse_sum()

    def parse_sum(self):
        e = self.parse_term()
        while self.peek().kind == "sym" and self.peek().text in "+-":
            op = self.advance()
            rhs = self.parse_term()
            e = Binary(op.text, e, rhs, (op.line, op.col))
        return e

    def parse_term(self):
        e = self.parse_unary()
        while self.peek().kind == "sym" and self.peek().text in "*/":
            op = self.advance()
            rhs = self.parse_unary()
            e = Binary(op.text, e, rhs, (op.line, op.col))
        return e

    def parse_unary(self):
        t = self.peek()
        if t.kind == "sym" and t.text == "-":
            self.advance()
            return Unary("-", self.parse_unary(), (t.line, t.col))
        return self.parse_power()

    def parse_power(self):
        base = self.parse_atom()
        t = self.peek()
        if t.kind == "sym" and t.text == "^":
            self.advance()
            exp = self.parse_unary()      # right-associative
            return Binary("^", base, exp, (t.line, t.col))
        return base

    def parse_atom(self):
        t = self.peek()
        if t.kind == "number":
            self.advance()
            return Num(float(t.text), (t.line, t.col))
        if t.kind == "ident":
            self.advance()
            if t.text in FUNCTIONS:
                self.expect_sym("(")
                arg = self.parse_expr()
                self.expect_sym(")")
                return Call(t.text, arg, (t.line, t.col))
            return Name(t.text, (t.line, t.col))
        if t.kind == "sym" and t.text == "(":
            self.advance()
            e = self.parse_expr()
            self.expect_sym(")")
            return e
        self.fail(f"found {t.text!r}" if t.text else "unexpected end of "
                  "input", expected=("number", "identifier", "("))

    # headers and declarations ----------------------------------------

    def parse_number_literal(self):
        neg = False
        t = self.peek()
        if t.kind == "sym" and t.text in "+-":
            neg = t.text == "-"
            self.advance()
            t = self.peek()
        if t.kind != "number":
            self.fail(f"found {t.text!r}", expected=("number",))
        self.advance()
        v = float(t.text)
        return -v if neg else v

    def parse_bound(self, coords, params):
        """A domain bound: a constant expression (no coordinates)."""
        e = self.parse_expr()
        bad = free_names(e) & set(coords)
        if bad:
            self.fail(f"domain bound uses coordinate {sorted(bad)[0]!r}")
        env = dict(params)
        try:
            return float(eval_expr(e, env))
        except KeyError as k:
            self.fail(f"unbound name {k.args[0]!r} in domain bound")

    def parse_range(self, coords, params):
        self.expect_sym("[")
        lo = self.parse_bound(coords, params)
        self.expect_sym(",")
        hi = self.parse_bound(coords, params)
        self.expect_sym("]")
        if not hi > lo:
            self.fail("empty domain interval")
        return (lo, hi)


def _node_pos(e, ident):
    """Position of the first occurrence of an identifier in an expression."""
    if isinstance(e, Name):
        if e.ident == ident:
            return e.pos
    elif isinstance(e, (Unary, Call)):
        return _node_pos(e.arg, ident)
    elif isinstance(e, Binary):
        try:
            return _node_pos(e.lhs, ident)
        except LookupError:
            return _node_pos(e.rhs, ident)
    raise LookupError(ident)


# ---------------------------------------------------------------------------
# geometry specs
# ---------------------------------------------------------------------------


@dataclass
class GeometrySpec:
    """A parsed or built-in geometry: curve, surface, or metric.

    ``exprs`` is a tuple of component expressions (curve, surface) or a
    nested tuple matrix (metric); builtins that cannot be expressed in the
    grammar provide a ``builder`` instead.  ``params`` are the bound
    constants; ``warnings`` collects non-fatal diagnostics such as a
    metric that fails positive definiteness at domain samples.
    """

    kind: str
    name: str
    coords: tuple
    domain: tuple
    exprs: object = None
    params: dict = field(default_factory=dict)
    periods: tuple = None
    flip_normal: bool = False
    builder: Optional[Callable] = None
    provenance: str = "parsed"
    warnings: list = field(default_factory=list)

    def with_domain(self, domain):
        return replace(self, domain=tuple((float(a), float(b))
                                          for a, b in domain))

    def with_params(self, **params):
        merged = dict(self.params)
        merged.update(params)
        return replace(self, params=merged)

    @property
    def dim(self):
        return len(self.coords)

    def _env(self, jets):
        env = dict(self.params)
        for cname, j in zip(self.coords, jets):
            env[cname] = j
        return env

    def build(self):
        """Compile to a ParamCurve, SurfacePatch, or MetricChart."""
        if self.builder is not None:
            return self.builder(self)
        periods = self.periods or (None,) * self.dim

        if self.kind == "curve":
            exprs = self.exprs

            def cfn(t):
                env = self._env([t])
                return [eval_expr(e, env) for e in exprs]

            return ParamCurve(cfn, self.domain[0], dim=len(exprs))

        if self.kind == "surface":
            exprs = self.exprs

            def sfn(u, v):
                env = self._env([u, v])
                return [eval_expr(e, env) for e in exprs]

            return SurfacePatch(sfn, self.domain, flip_normal=
                                self.flip_normal, periods=periods,
                                name=self.name)

        if self.kind == "metric":
            exprs = self.exprs
            n = self.dim

            def gfn(xj):
                env = self._env(list(xj))
                return [[eval_expr(exprs[i][j], env) for j in range(n)]
                        for i in range(n)]

            chart = MetricChart(n, self.domain, gfn,
                                provenance=self.provenance, periods=periods,
                                name=self.name)
            self._spd_check(chart)
            return chart

        raise PreconditionError(f"unknown geometry kind {self.kind}")

    def _spd_check(self, chart, grid=8):
        axes = [np.linspace(lo, hi, grid) for lo, hi in self.domain]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.ravel() for m in mesh])
        g = chart.g_at(pts)
        gm = np.moveaxis(g, (0, 1), (-2, -1))
        try:
            eig = np.linalg.eigvalsh(gm)
        except np.linalg.LinAlgError:
            self.warnings.append("metric eigenvalue check failed to run")
            return
        if eig.min() <= 0:
            self.warnings.append(
                "metric is not positive definite at some domain samples "
                f"(min eigenvalue {eig.min():.3g})")


def parse_geometry(text) -> GeometrySpec:
    """Parse one geometry declaration plus any ``param`` lines."""
    p = _Parser(tokenize(text))
    params = {}
    spec = None
    while p.peek().kind != "eof":
        t = p.peek()
        if t.kind != "ident":
            p.fail(f"found {t.text!r}",
                   expected=("surface", "metric", "curve", "param"))
        if t.text == "param":
            p.advance()
            pname = p.expect_ident("parameter name").text
            p.expect_sym("=")
            params[pname] = p.parse_number_literal()
            continue
        if t.text in ("surface", "metric", "curve"):
            if spec is not None:
                p.fail("only one geometry declaration per document")
            spec = _parse_declaration(p, t.text, params)
            continue
        p.fail(f"found {t.text!r}",
               expected=("surface", "metric", "curve", "param"))
    if spec is None:
        last = p.peek()
        raise ParseError("no geometry declaration found", last.line,
                         last.col, ("surface", "metric", "curve"))
    spec.params.update(params)
    return spec


def parse_expression(text, variables=("s",), params=None):
    """Compile a single expression into a callable of ``variables``.

    The expression uses the same grammar as geometry component
    expressions.  ``params`` supplies extra bound constants.
    """
    p = _Parser(tokenize(text))
    expr = p.parse_expr()
    tok = p.peek()
    if tok.kind != "eof":
        raise ParseError(f"unexpected trailing input {tok.text!r}",
                         tok.line, tok.col)
    bound = dict(params or {})
    unknown = free_names(expr) - set(bound) - set(variables) - {"pi"}
    if unknown:
        raise PreconditionError(
            f"expression uses unbound names: {', '.join(sorted(unknown))}")

    def fn(*vals):
        env = dict(bound)
        env.update(zip(variables, vals))
        return eval_expr(expr, env)

    return fn


def _parse_declaration(p: _Parser, kind, params):
    p.advance()
    name = p.expect_ident("geometry name").text
    p.expect_sym("(")
    coords = [p.expect_ident("coordinate name").text]
    while p.peek().kind == "sym" and p.peek().text == ",":
        p.advance()
        coords.append(p.expect_ident("coordinate name").text)
    if kind == "curve" and len(coords) != 1:
        p.fail("curves take exactly one coordinate")
    if kind in ("surface", "metric") and len(coords) != 2:
        p.fail(f"{kind} declarations take exactly two coordinates")
    p.expect_keyword("in")
    ranges = [p.parse_range(coords, params)]
    for _ in coords[1:]:
        p.expect_keyword("x")
        ranges.append(p.parse_range(coords, params))
    p.expect_sym(")")
    p.expect_sym("=")

    def check(e):
        extra = free_names(e) - set(coords) - set(params) - {"pi"}
        if extra:
            nm = sorted(extra)[0]
            try:
                line, col = _node_pos(e, nm)
            except LookupError:
                line, col = p.peek().line, p.peek().col
            raise ParseError(f"unbound name {nm!r}", line, col)
        return e

    if kind in ("curve", "surface"):
        p.expect_sym("(")
        comps = [check(p.parse_expr())]
        while p.peek().kind == "sym" and p.peek().text == ",":
            p.advance()
            comps.append(check(p.parse_expr()))
        p.expect_sym(")")
        want = (2, 3) if kind == "curve" else (3,)
        if len(comps) not in want:
            p.fail(f"{kind} needs {' or '.join(map(str, want))} components, "
                   f"got {len(comps)}")
        return GeometrySpec(kind, name, tuple(coords), tuple(ranges),
                            tuple(comps), dict(params))

    # metric: [[e, e], [e, e]]
    p.expect_sym("[")
    rows = []
    for i in range(2):
        p.expect_sym("[")
        row = [check(p.parse_expr())]
        p.expect_sym(",")
        row.append(check(p.parse_expr()))
        p.expect_sym("]")
        rows.append(tuple(row))
        if i == 0:
            p.expect_sym(",")
    p.expect_sym("]")
    return GeometrySpec("metric", name, tuple(coords), tuple(ranges),
                        tuple(rows), dict(params))


def print_geometry(spec: GeometrySpec) -> str:
    """Render a spec back to source text (inverse of parse_geometry)."""
    if spec.builder is not None:
        raise PreconditionError("builder-backed geometries have no source "
                                "form")
    lines = [f"param {k} = {repr(float(v))}" for k, v in spec.params.items()]
    coords = ",".join(spec.coords)
    ranges = "x".join(f"[{repr(lo)},{repr(hi)}]" for lo, hi in spec.domain)
    head = f"{spec.kind} {spec.name} ({coords} in {ranges}) = "
    if spec.kind in ("curve", "surface"):
        body = "(" + ", ".join(print_expr(e) for e in spec.exprs) + ")"
    else:
        body = "[[" + ", ".join(print_expr(e) for e in spec.exprs[0]) + \
            "], [" + ", ".join(print_expr(e) for e in spec.exprs[1]) + "]]"
    lines.append(head + body)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# builtins
# ---------------------------------------------------------------------------


_TWO_PI = repr(2 * math.pi)
_POLAR_HI = repr(math.pi - 0.1)

_BUILTIN_SOURCES = {
    "plane": """
        surface plane (u,v in [-2,2]x[-2,2]) = (u, v, 0)
    """,
    "sphere": f"""
        param R = 1
        surface sphere (u,v in [0,{_TWO_PI}]x[0.1,{_POLAR_HI}]) =
            (R*cos(u)*sin(v), R*sin(u)*sin(v), R*cos(v))
    """,
    "cylinder": f"""
        param R = 1
        surface cylinder (u,v in [0,{_TWO_PI}]x[-2,2]) =
            (R*cos(u), R*sin(u), v)
    """,
    "cone": f"""
        surface cone (u,v in [0,{_TWO_PI}]x[0.2,2]) =
            (v*cos(u), v*sin(u), v)
    """,
    "torus": f"""
        param R = 2
        param r = 1
        surface torus (u,v in [0,{_TWO_PI}]x[0,{_TWO_PI}]) =
            ((R + r*cos(v))*cos(u), (R + r*cos(v))*sin(u), r*sin(v))
    """,
    "saddle": """
        surface saddle (u,v in [-1,1]x[-1,1]) = (u, v, u*v)
    """,
    "helix": f"""
        param r = 1
        param omega = 1
        param v = 0.5
        curve helix (t in [0,{repr(4 * math.pi)}]) =
            (r*cos(omega*t), r*sin(omega*t), v*t)
    """,
    "parabola": """
        curve parabola (t in [-2,2]) = (t, t*t)
    """,
    "cycloid": """
        param R = 1
        curve cycloid (t in [0.3,6]) = (R*(t - sin(t)), R*(1 - cos(t)))
    """,
    "viviani": f"""
        param R = 1
        curve viviani (t in [0,{_TWO_PI}]) =
            (R*(1 + cos(t)), R*sin(t), 2*R*sin(t/2))
    """,
    "lobachevsky_halfplane": """
        metric lobachevsky_halfplane (x,y in [-6,6]x[0.05,20]) =
            [[1/y^2, 0], [0, 1/y^2]]
    """,
    "hyperboloid_pullback": """
        metric hyperboloid_pullback (x,y in [-2,2]x[-2,2]) =
            [[1 - x^2/(1 + x^2 + y^2), -(x*y)/(1 + x^2 + y^2)],
             [-(x*y)/(1 + x^2 + y^2), 1 - y^2/(1 + x^2 + y^2)]]
    """,
}

_BUILTIN_PERIODS = {
    "sphere": (2 * math.pi, None),
    "cylinder": (2 * math.pi, None),
    "cone": (2 * math.pi, None),
    "torus": (2 * math.pi, 2 * math.pi),
    "revolution": (2 * math.pi, None),
}

_EXPR_PARAM_BUILTINS = {
    # name: (template, expression parameter defaults)
    "graph": ("surface graph (u,v in [-1,1]x[-1,1]) = (u, v, {f})",
              {"f": "u^2 + v^2"}),
    "revolution": (f"surface revolution (u,v in [0,{_TWO_PI}]x[-1.2,1.2]) = "
                   "(({f})*cos(u), ({f})*sin(u), {h})",
                   {"f": "2 + cos(v)", "h": "v"}),
    "conformal": ("metric conformal (x,y in [-1.5,1.5]x[-1.5,1.5]) = "
                  "[[{lam}, 0], [0, {lam}]]", {"lam": "1 + x^2 + y^2"}),
}

BUILTIN_NAMES = tuple(sorted(list(_BUILTIN_SOURCES) +
                             list(_EXPR_PARAM_BUILTINS) + ["s3_round"]))


def _s3_builder(spec: GeometrySpec) -> MetricChart:
    def gfn(xj):
        x, y, z = xj
        r2 = x * x + y * y + z * z
        one = x._like_const(np.ones_like(x.coef[0]))
        f = ((one + 0.25 * r2) ** 2).reciprocal()
        zero = x._like_const(np.zeros_like(x.coef[0]))
        return [[f, zero, zero], [zero, f, zero], [zero, zero, f]]

    return MetricChart(3, spec.domain, gfn, provenance="builtin",
                       name="s3_round")


def builtin(name, params=None) -> GeometrySpec:
    """A ready-made geometry spec by name.

    Numeric parameters (R, r, omega, v) override the defaults; the
    function-shaped builtins graph(f), revolution(f, h), and
    conformal(lam) accept expression strings for those parameters.
    """
    params = dict(params or {})

    if name == "s3_round":
        spec = GeometrySpec("metric", "s3_round", ("x", "y", "z"),
                            ((-2.5, 2.5),) * 3, builder=_s3_builder,
                            provenance="builtin")
        if params:
            raise PreconditionError("s3_round takes no parameters")
        return spec

    if name in _EXPR_PARAM_BUILTINS:
        template, defaults = _EXPR_PARAM_BUILTINS[name]
        exprs = dict(defaults)
        numeric = {}
        for k, v in params.items():
            if k in exprs:
                exprs[k] = str(v)
            else:
                numeric[k] = float(v)
        src = template.format(**exprs)
        spec = parse_geometry(src)
        extra = set()
        if spec.kind == "surface":
            for e in spec.exprs:
                extra |= free_names(e)
        else:
            for row in spec.exprs:
                for e in row:
                    extra |= free_names(e)
        extra -= set(spec.coords) | {"pi"}
        missing = extra - set(numeric)
        if missing:
            raise PreconditionError(
                f"{name} expression uses unbound names {sorted(missing)}")
        spec.params.update(numeric)
        spec.provenance = "builtin"
        if name in _BUILTIN_PERIODS:
            spec.periods = _BUILTIN_PERIODS[name]
        return spec

    if name not in _BUILTIN_SOURCES:
        raise PreconditionError(f"unknown builtin {name!r}; known: "
                                f"{', '.join(BUILTIN_NAMES)}")
    spec = parse_geometry(_BUILTIN_SOURCES[name])
    for k, v in params.items():
        if k not in spec.params:
            raise PreconditionError(f"{name} has no parameter {k!r}")
        spec.params[k] = float(v)
    for k in ("R", "r"):
        if k in spec.params and spec.params[k] <= 0:
            raise PreconditionError(f"{name}: parameter {k} must be "
                                    "positive")
    if name == "torus" and spec.params["r"] >= spec.params["R"]:
        raise PreconditionError("torus needs r < R for an embedded surface")
    if name in _BUILTIN_PERIODS:
        spec.periods = _BUILTIN_PERIODS[name]
    spec.provenance = "builtin"
    return spec


def sphere_atlas(R=1.0):
    """Two rotated polar patches that jointly cover the sphere.

    The first chart's poles are on the z-axis, the second's on the x-axis,
    so each chart's excluded caps are interior to the other.  Both use the
    same inward orientation; overlap consistency is a catalog invariant.
    """
    R = float(R)
    if R <= 0:
        raise PreconditionError("sphere radius must be positive")
    a = builtin("sphere", {"R": R}).build()

    def fn(u, v):
        return [R * v.cos(), R * v.sin() * u.cos(), R * v.sin() * u.sin()]

    b = SurfacePatch(fn, [(0.0, 2 * math.pi), (0.1, math.pi - 0.1)],
                     periods=(2 * math.pi, None), name="sphere-xaxis")
    return a, b


# ---------------------------------------------------------------------------
# hyperbolic closed forms
# ---------------------------------------------------------------------------


def _as_complex(z):
    if isinstance(z, complex):
        return z
    z = np.asarray(z, dtype=float).ravel()
    if z.size != 2:
        raise PreconditionError("half-plane points are complex numbers or "
                                "(x, y) pairs")
    return complex(z[0], z[1])


def hyperbolic_distance(z1, z2) -> float:
    """Distance in the upper half-plane: arcosh(1 + |z1-z2|^2 / (2 y1 y2))."""
    z1 = _as_complex(z1)
    z2 = _as_complex(z2)
    if z1.imag <= 0 or z2.imag <= 0:
        raise PreconditionError("points must have positive imaginary part")
    q = 1.0 + abs(z1 - z2) ** 2 / (2.0 * z1.imag * z2.imag)
    return math.acosh(max(q, 1.0))


def halfplane_from_hyperboloid(x, y) -> complex:
    """Map a hyperboloid-chart point to the half-plane model.

    (x, y) are the chart coordinates of (x, y, sqrt(1 + x^2 + y^2)) on the
    upper hyperboloid sheet; the point goes through the Poincare disk
    (zeta = (x + i y) / (1 + z)) and the Cayley transform
    w = i (1 + zeta) / (1 - zeta).
    """
    z = math.sqrt(1.0 + x * x + y * y)
    zeta = complex(x, y) / (1.0 + z)
    w = 1j * (1 + zeta) / (1 - zeta)
    return w


def hyperbolic_circle_length(R) -> float:
    """Circumference of a hyperbolic circle of geodesic radius R."""
    if R < 0:
        raise PreconditionError("radius must be nonnegative")
    return 2.0 * math.pi * math.sinh(R)


def hyperbolic_right_triangle(P, leg_a, leg_b):
    """Vertices of a right triangle in the half-plane, legs along
    perpendicular geodesics through P; returns (A, B) endpoints.

    The right angle sits at P; leg_a runs along the vertical geodesic,
    leg_b along the geodesic whose tangent at P is horizontal.
    Closed forms: the vertical geodesic scales y by e^t; the horizontal
    one is the semicircle through P centered where the normal hits the
    real axis.
    """
    P = _as_complex(P)
    A = complex(P.real, P.imag * math.exp(leg_a))
    # semicircle centered at (P.real, 0) with radius P.imag, arc-length
    # parameter t from the top: z(t) = c + r (sin(phi), cos(phi)) with
    # phi the Gudermannian of t
    phi = 2.0 * math.atan(math.tanh(leg_b / 2.0))
    B = complex(P.real + P.imag * math.sin(phi), P.imag * math.cos(phi))
    return A, B
