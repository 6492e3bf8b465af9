"""Expressions over jet coordinates.

Expressions are plain sympy expressions built from the symbols handed out by a
:class:`JetContext`.  Coefficients stay exact (sympy rationals); floats only
appear in :func:`evaluate`.  This module adds what sympy does not give us for
free: a fixed naming scheme for jet coordinates, a text grammar with a Pratt
parser, a deterministic canonical printer, and a zero test that degrades
gracefully for transcendental expressions.
"""
from __future__ import annotations

import contextlib
import contextvars
import enum
import math
import re
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Iterable, Mapping

import numpy as np
import sympy as sp
from sympy.polys.fields import FracField

FUNCTIONS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp, "log": sp.log}
CONSTANTS = {"pi": sp.pi}
_IDENT = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")


class JetError(Exception):
    """Base class for errors raised by jetvar."""


class ParseError(JetError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class OrderError(JetError):
    pass


class DomainError(JetError):
    pass


class MissingCoordinateError(JetError):
    pass


class MultiIndex(tuple):
    """Tuple of n non-negative derivative counts."""

    def __new__(cls, entries: Iterable[int]):
        entries = tuple(int(a) for a in entries)
        if any(a < 0 for a in entries):
            raise ValueError(f"negative multi-index entry in {entries}")
        return super().__new__(cls, entries)

    @classmethod
    def zero(cls, n: int) -> "MultiIndex":
        return cls((0,) * n)

    @classmethod
    def unit(cls, n: int, lam: int) -> "MultiIndex":
        return cls.zero(n).raised(lam)

    @property
    def order(self) -> int:
        return sum(self)

    def raised(self, lam: int, times: int = 1) -> "MultiIndex":
        entries = list(self)
        entries[lam] += times
        return MultiIndex(entries)

    def __add__(self, other):  # componentwise, not concatenation
        return MultiIndex(a + b for a, b in zip(self, other))

    def __sub__(self, other):
        return MultiIndex(a - b for a, b in zip(self, other))

    def dominates(self, other: "MultiIndex") -> bool:
        return all(a >= b for a, b in zip(self, other))

    def binomial(self, other: "MultiIndex") -> int:
        return math.prod(math.comb(a, b) for a, b in zip(self, other))


def multi_indices(n: int, order: int) -> list[MultiIndex]:
    """All multi-indices of dimension n with |alpha| == order, in canonical order."""
    out = []
    for combo in combinations_with_replacement(range(n), order):
        entries = [0] * n
        for lam in combo:
            entries[lam] += 1
        out.append(MultiIndex(entries))
    return sorted(out, reverse=True)


def multi_indices_upto(n: int, order: int) -> list[MultiIndex]:
    return [a for k in range(order + 1) for a in multi_indices(n, k)]


@dataclass(frozen=True)
class Coordinate:
    kind: str  # "base" or "jet"
    index: int
    alpha: MultiIndex | None = None

    @property
    def order(self) -> int:
        return 0 if self.alpha is None else self.alpha.order


@dataclass(frozen=True)
class JetContext:
    """Dimensions and coordinate names of a jet space J_r Y.

    Derivative coordinates are named ``<fiber>_<base names repeated per order>``,
    e.g. ``y_tt`` or ``y2_x1x2``.  Base names must be prefix-free so that the
    suffix tokenizes uniquely.
    """

    base_names: tuple[str, ...]
    fiber_names: tuple[str, ...]
    r: int = 1

    def __post_init__(self):
        object.__setattr__(self, "base_names", tuple(self.base_names))
        object.__setattr__(self, "fiber_names", tuple(self.fiber_names))
        names = self.base_names + self.fiber_names
        if not self.base_names or not self.fiber_names:
            raise ValueError("need n >= 1 and m >= 1")
        if self.r < 0:
            raise ValueError("jet order must be >= 0")
        if len(set(names)) != len(names):
            raise ValueError(f"coordinate names are not distinct: {names}")
        for name in names:
            if not _IDENT.match(name) or name in FUNCTIONS or name in CONSTANTS:
                raise ValueError(f"bad coordinate name {name!r}")
        for a in self.base_names:
            for b in self.base_names:
                if a != b and b.startswith(a):
                    raise ValueError(f"base names {a!r} and {b!r} are not prefix-free")

    @classmethod
    def create(cls, n: int = 1, m: int = 1, r: int = 1, base_names=None, fiber_names=None):
        if base_names is None:
            base_names = ("t",) if n == 1 else tuple(f"x{k + 1}" for k in range(n))
        if fiber_names is None:
            fiber_names = ("y",) if m == 1 else tuple(f"y{k + 1}" for k in range(m))
        return cls(tuple(base_names), tuple(fiber_names), r)

    @property
    def n(self) -> int:
        return len(self.base_names)

    @property
    def m(self) -> int:
        return len(self.fiber_names)

    def with_order(self, r: int) -> "JetContext":
        return JetContext(self.base_names, self.fiber_names, r)

    def base(self, lam: int) -> sp.Symbol:
        return sp.Symbol(self.base_names[lam], real=True)

    @property
    def base_symbols(self) -> tuple[sp.Symbol, ...]:
        return tuple(self.base(lam) for lam in range(self.n))

    def jet_name(self, i: int, alpha: Iterable[int] | None = None) -> str:
        name = self.fiber_names[i]
        if alpha is None:
            return name
        suffix = "".join(b * a for b, a in zip(self.base_names, alpha))
        return f"{name}_{suffix}" if suffix else name

    def jet(self, i: int, alpha: Iterable[int] | None = None) -> sp.Symbol:
        return sp.Symbol(self.jet_name(i, alpha), real=True)

    def jet_symbols(self, order: int | None = None) -> list[sp.Symbol]:
        order = self.r if order is None else order
        return [self.jet(i, a) for a in multi_indices_upto(self.n, order) for i in range(self.m)]

    def zero_index(self) -> MultiIndex:
        return MultiIndex.zero(self.n)

    def decode(self, sym: sp.Symbol) -> Coordinate | None:
        return _decode(self.base_names, self.fiber_names, sym.name)

    def decode_name(self, name: str) -> Coordinate | None:
        return _decode(self.base_names, self.fiber_names, name)

    def jet_coordinates(self, e: sp.Expr) -> dict[sp.Symbol, Coordinate]:
        """Jet coordinates y^i_alpha occurring in e."""
        out = {}
        for s in e.free_symbols:
            c = self.decode(s)
            if c is not None and c.kind == "jet":
                out[s] = c
        return out

    def order_of(self, e: sp.Expr) -> int:
        """Highest derivative order among the jet coordinates of e (0 if none)."""
        return max((c.order for c in self.jet_coordinates(e).values()), default=0)

    def depends_on_fiber(self, e: sp.Expr) -> bool:
        return bool(self.jet_coordinates(e))


@lru_cache(maxsize=None)
def _decode(base_names, fiber_names, name):
    if name in base_names:
        return Coordinate("base", base_names.index(name))
    head, sep, suffix = name.partition("_")
    if head not in fiber_names:
        return None
    alpha = [0] * len(base_names)
    pos = 0
    while pos < len(suffix):
        for lam, b in enumerate(base_names):
            if suffix.startswith(b, pos):
                alpha[lam] += 1
                pos += len(b)
                break
        else:
            return None
    if sep and not suffix:
        return None
    return Coordinate("jet", fiber_names.index(head), MultiIndex(alpha))


def coordinate_sort_key(ctx: JetContext, sym: sp.Symbol):
    """Total order on coordinates: base before fiber, then index, then multi-index."""
    c = ctx.decode(sym)
    if c is None:
        return (2, 0, (), sym.name)
    if c.kind == "base":
        return (0, c.index, (), "")
    return (1, c.index, tuple(c.alpha), "")


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?|\.\d+)|(?P<ident>[A-Za-z][A-Za-z0-9_]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str):
    pos = 0
    tokens = []
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        match = _TOKEN.match(text, pos)
        if match is None:
            bad = len(text) - len(text[pos:].lstrip())
            raise ParseError(f"unexpected character {text[bad]!r}", bad)
        start = match.start(match.lastindex)
        kind = match.lastgroup
        tokens.append((kind, match.group(kind), start))
        pos = match.end()
    tokens.append(("end", "", len(text)))
    return tokens


_BINARY = {"+": (10, "left"), "-": (10, "left"), "*": (20, "left"), "/": (20, "left"), "^": (40, "right")}
_UNARY_PREC = 30


class _Parser:
    def __init__(self, text, ctx, extra):
        self.tokens = _tokenize(text)
        self.i = 0
        self.ctx = ctx
        self.extra = extra

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value):
        tok = self.advance()
        if tok[1] != value:
            raise ParseError(f"expected {value!r}, got {tok[1] or 'end of input'!r}", tok[2])
        return tok

    def parse(self):
        e = self.expression(0)
        tok = self.peek()
        if tok[0] != "end":
            raise ParseError(f"unexpected token {tok[1]!r}", tok[2])
        return e

    def expression(self, min_prec):
        left = self.prefix()
        while True:
            kind, value, pos = self.peek()
            if kind != "op" or value not in _BINARY:
                return left
            prec, assoc = _BINARY[value]
            if prec < min_prec:
                return left
            self.advance()
            right = self.expression(prec + 1 if assoc == "left" else prec)
            left = self.combine(value, left, right, pos)

    def combine(self, op, left, right, pos):
        if op == "+":
            return left + right
        if op == "-":
            return left - right
        if op == "*":
            return left * right
        if op == "/":
            if right == 0:
                raise ParseError("division by zero", pos)
            return left / right
        if not (right.is_Integer):
            raise ParseError("exponent must be an integer constant", pos)
        return left**right

    def prefix(self):
        kind, value, pos = self.advance()
        if kind == "num":
            return sp.Rational(value)
        if kind == "op" and value == "-":
            return -self.expression(_UNARY_PREC)
        if kind == "op" and value == "+":
            return self.expression(_UNARY_PREC)
        if kind == "op" and value == "(":
            e = self.expression(0)
            self.expect(")")
            return e
        if kind == "ident":
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expression(0)
                self.expect(")")
                return FUNCTIONS[value](arg)
            if value in CONSTANTS:
                return CONSTANTS[value]
            return self.identifier(value, pos)
        raise ParseError(f"unexpected {value or 'end of input'!r}", pos)

    def identifier(self, name, pos):
        if name in self.extra:
            return self.extra[name]
        coord = self.ctx.decode_name(name)
        if coord is None:
            raise ParseError(f"unknown identifier {name!r}", pos)
        if coord.kind == "base":
            return self.ctx.base(coord.index)
        if coord.order > self.ctx.r:
            raise OrderError(f"{name!r} has order {coord.order} exceeding jet order {self.ctx.r} (position {pos})")
        # canonical spelling, so y_x2x1 and y_x1x2 name the same coordinate
        return self.ctx.jet(coord.index, coord.alpha)


def parse(text: str, ctx: JetContext, extra: Mapping[str, sp.Expr] | None = None) -> sp.Expr:
    """Parse ``text`` in the expression grammar of ``ctx``.

    ``extra`` maps additional identifiers (e.g. curve parameters) to symbols.
    """
    return _Parser(text, ctx, dict(extra or {})).parse()


# ---------------------------------------------------------------------------
# algebra


def partial(e: sp.Expr, c: sp.Symbol) -> sp.Expr:
    """Formal partial derivative; all jet coordinates are independent."""
    return sp.diff(e, c)


ELEMENTARY = (sp.sin, sp.cos, sp.exp, sp.log)


def _has_functions(e: sp.Expr) -> bool:
    return bool(e.atoms(*ELEMENTARY))


def simplify(e: sp.Expr) -> sp.Expr:
    """Canonical form: expanded polynomial, or reduced numerator/denominator.

    Arguments of elementary functions are canonicalized recursively; the
    function values and named constants are then treated as extra generators
    of a rational function field.
    """
    e = sp.sympify(e)
    if e.is_Number or e.is_Symbol:
        return e
    if _has_functions(e):
        e = e.replace(lambda a: isinstance(a, ELEMENTARY), lambda a: a.func(*(simplify(x) for x in a.args)))
    opaque = {a: sp.Dummy() for a in e.atoms(*ELEMENTARY) | e.atoms(sp.NumberSymbol)}
    body = e.xreplace(opaque) if opaque else e
    if any(not p.exp.is_Integer for p in body.atoms(sp.Pow)):
        out = sp.cancel(sp.together(sp.expand(body)))
        num, den = sp.fraction(out)
        num, den = sp.expand(num), sp.expand(den)
    else:
        gens = sorted(body.free_symbols, key=lambda x: x.sort_key())
        if not gens:
            return sp.nsimplify(body) if not body.is_Rational else body
        field = FracField(gens, sp.QQ)
        f = field.from_expr(body)
        num, den = f.numer.as_expr(), f.denom.as_expr()
    back = {d: a for a, d in opaque.items()}
    num, den = num.xreplace(back), den.xreplace(back)
    return num if den == 1 else num / den


class ZeroVerdict(enum.Enum):
    ZERO = "zero"
    PROBABLY_ZERO = "probably zero"
    NONZERO = "nonzero"


_ZERO_SETTINGS: contextvars.ContextVar = contextvars.ContextVar("zero_settings", default=(8, 1e-9))


@contextlib.contextmanager
def zero_test_settings(points: int = 8, tol: float = 1e-9):
    """Override the randomized zero-test defaults within a block (per context)."""
    token = _ZERO_SETTINGS.set((points, tol))
    try:
        yield
    finally:
        _ZERO_SETTINGS.reset(token)


def zero_test(e: sp.Expr, points: int | None = None, tol: float | None = None, seed: int = 0) -> ZeroVerdict:
    """Decide e == 0: exact for rational functions, randomized otherwise."""
    dp, dt = _ZERO_SETTINGS.get()
    points = dp if points is None else points
    tol = dt if tol is None else tol
    s = simplify(e)
    if s == 0:
        return ZeroVerdict.ZERO
    if not _has_functions(s):
        return ZeroVerdict.NONZERO
    s = sp.simplify(s)
    if s == 0:
        return ZeroVerdict.ZERO
    rng = np.random.default_rng(seed)
    syms = sorted(s.free_symbols, key=lambda x: x.name)
    f = sp.lambdify(syms, s, modules="mpmath")
    terms = sp.Add.make_args(sp.expand(s))
    scale_f = sp.lambdify(syms, sum(sp.Abs(t) for t in terms), modules="mpmath")
    hits = 0
    for _ in range(points * 4):
        vals = rng.uniform(0.3, 1.7, size=len(syms))
        try:
            v = complex(f(*vals))
            scale = float(abs(complex(scale_f(*vals))))
        except (ZeroDivisionError, ValueError, TypeError):
            continue
        if not math.isfinite(abs(v)):
            continue
        if abs(v) > tol * max(1.0, scale):
            return ZeroVerdict.NONZERO
        hits += 1
        if hits == points:
            break
    return ZeroVerdict.PROBABLY_ZERO


def is_zero(e: sp.Expr, points: int | None = None, tol: float | None = None) -> bool:
    return zero_test(e, points, tol) is not ZeroVerdict.NONZERO


def substitute(e: sp.Expr, mapping: Mapping[sp.Symbol, sp.Expr]) -> sp.Expr:
    return sp.sympify(e).xreplace(dict(mapping))


# ---------------------------------------------------------------------------
# evaluation


def evaluate(e: sp.Expr, assignment: Mapping) -> float:
    """Evaluate e at a point; keys are symbols or coordinate names."""
    values = {(k.name if isinstance(k, sp.Symbol) else str(k)): float(v) for k, v in assignment.items()}
    return _eval(sp.sympify(e), values)


def _eval(e, values):
    if e.is_Symbol:
        try:
            return values[e.name]
        except KeyError:
            raise MissingCoordinateError(f"no value for coordinate {e.name!r}") from None
    if e.is_Number or e is sp.pi or e is sp.E:
        return float(e)
    if e.is_Add:
        return math.fsum(_eval(a, values) for a in e.args)
    if e.is_Mul:
        return math.prod(_eval(a, values) for a in e.args)
    if e.is_Pow:
        base = _eval(e.args[0], values)
        expo = _eval(e.args[1], values)
        if base == 0 and expo < 0:
            raise DomainError("division by zero")
        if base < 0 and not float(expo).is_integer():
            raise DomainError(f"non-integer power of negative number in {e}")
        return base**expo
    if isinstance(e, sp.log):
        x = _eval(e.args[0], values)
        if x <= 0:
            raise DomainError(f"log of non-positive value {x}")
        return math.log(x)
    for name, func in (("sin", math.sin), ("cos", math.cos), ("exp", math.exp)):
        if isinstance(e, FUNCTIONS[name]):
            return func(_eval(e.args[0], values))
    raise DomainError(f"cannot evaluate {e}")


def lambdify(e: sp.Expr, symbols, backend: str = "numpy"):
    """Vectorized evaluator; ``backend`` is "numpy" or "mpmath"."""
    return sp.lambdify(list(symbols), e, modules=backend)


# ---------------------------------------------------------------------------
# printing


def _monomial_key(ctx, term):
    coeff, factors = term.as_coeff_mul()
    powers = []
    for f in factors:
        base, expo = f.as_base_exp()
        if base.is_Symbol:
            powers.append((coordinate_sort_key(ctx, base), -int(expo) if expo.is_Integer else 0, ""))
        else:
            powers.append(((3, 0, (), ""), 0, str(f)))
    powers.sort()
    return powers


def _fmt_factor(ctx, f):
    # exp(x).as_base_exp() is (E, x); keep it a function call
    base, expo = (f, sp.S.One) if isinstance(f, sp.exp) else f.as_base_exp()
    if base.is_Symbol:
        text = base.name
    elif isinstance(base, sp.Function):
        text = f"{type(base).__name__}({_fmt_expr(ctx, base.args[0])})"
    elif base is sp.pi:
        text = "pi"
    elif base is sp.E:
        text = "exp(1)"
    elif base.is_Number:
        text = f"({base})"
    else:
        text = f"({_fmt_sum(ctx, base)})"
    if expo == 1:
        return text
    if expo.is_Integer and expo > 0:
        return f"{text}^{expo}"
    return f"{text}^({expo})"


def _fmt_term(ctx, term):
    coeff, factors = term.as_coeff_mul()
    if coeff.is_Number and coeff < 0:
        sign, coeff = "-", -coeff
    else:
        sign = "+"
    parts = sorted(factors, key=lambda f: _monomial_key(ctx, f))
    body = "*".join(_fmt_factor(ctx, f) for f in parts)
    if coeff == 1 and body:
        return sign, body
    c = str(coeff) if coeff.is_Number else _fmt_factor(ctx, coeff)
    return sign, f"{c}*{body}" if body else c


def _fmt_sum(ctx, e):
    terms = sorted(sp.Add.make_args(e), key=lambda t: _monomial_key(ctx, t))
    out = ""
    for k, t in enumerate(terms):
        sign, body = _fmt_term(ctx, t)
        if k == 0:
            out = body if sign == "+" else f"-{body}"
        else:
            out += f" {sign} {body}"
    return out or "0"


def _fmt_expr(ctx, s):
    num, den = sp.fraction(s)
    if den.is_Number:
        num, den = sp.expand(s), sp.S.One
    if den == 1:
        return _fmt_sum(ctx, num)
    return f"({_fmt_sum(ctx, num)})/({_fmt_sum(ctx, den)})"


def to_text(e: sp.Expr, ctx: JetContext) -> str:
    """Print the canonical form of e in the expression grammar."""
    return _fmt_expr(ctx, simplify(e))
