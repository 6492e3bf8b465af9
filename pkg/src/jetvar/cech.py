"""Cech cochains on declared covers and the classification of local Lagrangians.

A cover is an ordered list of charts plus its nerve.  Every chart uses the
fiber coordinate names of the shared context; a transition ``(a, b)`` gives
chart-b fiber coordinates as expressions in chart-a coordinates, with the
base coordinates shared.  Cochain values live in the chart of the lowest
index of their simplex.
"""
from __future__ import annotations

import enum
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import sympy as sp
from scipy import integrate as sp_integrate

from .expr import JetContext, JetError, MultiIndex, is_zero, lambdify, multi_indices_upto, simplify
from .jet import derivative_table, total_derivative
from .varseq import Lagrangian, NotTrivialError, SourceForm, euler_lagrange, horizontal_homotopy, minor_components

QUAD_TOL = 1e-9
SNAP_TOL = 1e-6


class CoverError(JetError):
    pass


@dataclass(frozen=True)
class Chart:
    id: str
    center: tuple | None = None


@dataclass(frozen=True)
class OverlapCycle:
    """A closed curve inside the overlap of two charts, in the lower chart's coordinates."""

    edge: tuple
    param: sp.Symbol
    lower: sp.Expr
    upper: sp.Expr
    fiber: tuple
    base: tuple = ()


class Cover:
    def __init__(
        self,
        ctx: JetContext,
        charts: Sequence[Chart],
        transitions: Mapping[tuple, Sequence[sp.Expr]],
        simplices: Sequence[Sequence[str]] = (),
        cycles: Sequence[OverlapCycle] = (),
        lattice: sp.Expr | None = None,
    ):
        self.ctx = ctx
        self._inverse_cache = {}
        self.charts = tuple(charts)
        ids = [c.id for c in self.charts]
        if len(set(ids)) != len(ids):
            raise CoverError("chart identifiers must be distinct")
        self._index = {c: k for k, c in enumerate(ids)}
        self.transitions = {}
        for (a, b), exprs in transitions.items():
            exprs = tuple(sp.sympify(e) for e in exprs)
            if len(exprs) != ctx.m:
                raise CoverError(f"transition {a} -> {b} needs {ctx.m} components")
            if any(ctx.order_of(e) > 0 for e in exprs):
                raise CoverError(f"transition {a} -> {b} may only involve base and fiber coordinates")
            self.transitions[self.index(a), self.index(b)] = exprs
        nerve = {(k,) for k in range(len(self.charts))}
        nerve |= {tuple(sorted(e)) for e in self.transitions}
        for s in simplices:
            nerve.add(tuple(sorted(self.index(c) for c in s)))
        for s in list(nerve):
            if len(set(s)) != len(s):
                raise CoverError(f"degenerate simplex {s}")
            for k in range(1, len(s)):
                for face in itertools.combinations(s, k):
                    if face not in nerve:
                        raise CoverError(f"nerve is not closed under faces: {self.names(s)} lacks {self.names(face)}")
        self.nerve = frozenset(nerve)
        for s in self.simplices(1):
            self._forward(*s)
        self.cycles = tuple(cycles)
        for cyc in self.cycles:
            if tuple(sorted(self.index(c) for c in cyc.edge)) not in self.nerve:
                raise CoverError(f"overlap cycle on undeclared overlap {cyc.edge}")
        self.lattice = None if lattice is None else sp.sympify(lattice)

    # -- combinatorics ---------------------------------------------------

    def index(self, chart_id: str) -> int:
        try:
            return self._index[chart_id]
        except KeyError:
            raise CoverError(f"unknown chart {chart_id!r}") from None

    def names(self, simplex) -> tuple:
        return tuple(self.charts[k].id for k in simplex)

    def simplices(self, q: int) -> list:
        return sorted(s for s in self.nerve if len(s) == q + 1)

    @property
    def dimension(self) -> int:
        return max(len(s) for s in self.nerve) - 1

    def center(self, k: int) -> tuple:
        c = self.charts[k].center
        return (sp.S.Zero,) * self.ctx.m if c is None else c

    # -- transitions -----------------------------------------------------

    def _forward(self, a: int, b: int) -> tuple:
        """Chart-b fiber coordinates in terms of chart-a coordinates."""
        if a == b:
            return tuple(self.ctx.jet(i) for i in range(self.ctx.m))
        if (a, b) in self.transitions:
            return self.transitions[a, b]
        if (b, a) in self.transitions:
            return self._invert(b, a)
        raise CoverError(f"missing transition between {self.charts[a].id} and {self.charts[b].id}")

    def _invert(self, a: int, b: int) -> tuple:
        key = (a, b)
        if key in self._inverse_cache:
            return self._inverse_cache[key]
        ctx = self.ctx
        ys = [ctx.jet(i) for i in range(ctx.m)]
        new = [sp.Dummy(f"z{i}") for i in range(ctx.m)]
        eqs = [sp.Eq(z, e) for z, e in zip(new, self.transitions[a, b])]
        sols = sp.solve(eqs, ys, dict=True)
        if len(sols) != 1:
            raise CoverError(f"cannot invert transition {self.charts[a].id} -> {self.charts[b].id}; declare it in both directions")
        back = {z: y for z, y in zip(new, ys)}
        out = tuple(simplify(sols[0][y].xreplace(back)) for y in ys)
        self._inverse_cache[key] = out
        return out

    def transition(self, a, b) -> tuple:
        a = self.index(a) if isinstance(a, str) else a
        b = self.index(b) if isinstance(b, str) else b
        return self._forward(a, b)

    def pull(self, e: sp.Expr, frm: int, to: int) -> sp.Expr:
        """Rewrite a function given in chart ``frm`` coordinates in chart ``to`` coordinates."""
        if frm == to:
            return sp.sympify(e)
        ctx = self.ctx
        T = self._forward(to, frm)
        mapping = {}
        tables = {}
        for sym, c in ctx.jet_coordinates(e).items():
            if c.index not in tables:
                tables[c.index] = derivative_table(T[c.index], ctx)
            mapping[sym] = tables[c.index][c.alpha]
        return simplify(sp.sympify(e).xreplace(mapping))

    def pull_source(self, comps: Sequence[sp.Expr], frm: int, to: int) -> tuple:
        """Source-form components: eta^to_i = sum_k eta^frm_k(T) dT^k/dy^i."""
        if frm == to:
            return tuple(comps)
        ctx = self.ctx
        T = self._forward(to, frm)
        moved = [self.pull(c, frm, to) for c in comps]
        return tuple(
            simplify(sum(moved[k] * sp.diff(T[k], ctx.jet(i)) for k in range(ctx.m))) for i in range(ctx.m)
        )

    def check_cocycle_condition(self) -> list:
        """Triangles (a, b, c) where T_bc o T_ab differs from T_ac."""
        bad = []
        ctx = self.ctx
        for a, b, c in self.simplices(2):
            ab, bc, ac = self._forward(a, b), self._forward(b, c), self._forward(a, c)
            sub = {ctx.jet(i): ab[i] for i in range(ctx.m)}
            if any(not is_zero(x.xreplace(sub) - y) for x, y in zip(bc, ac)):
                bad.append(self.names((a, b, c)))
        return bad


class Kind(enum.Enum):
    CONSTANT = "constant"
    EXPRESSION = "expression"
    LAGRANGIAN = "lagrangian"
    CURRENT = "current"
    SOURCE = "source"


_TUPLE_KINDS = (Kind.CURRENT, Kind.SOURCE)


@dataclass(frozen=True)
class Cochain:
    cover: Cover
    degree: int
    kind: Kind
    values: Mapping = field(hash=False)

    def __post_init__(self):
        vals = {}
        for s, v in self.values.items():
            s = tuple(self.cover.index(c) if isinstance(c, str) else c for c in s)
            if s not in self.cover.nerve or len(s) != self.degree + 1:
                raise CoverError(f"{s} is not a {self.degree}-simplex of the nerve")
            vals[s] = tuple(sp.sympify(x) for x in v) if self.kind in _TUPLE_KINDS else sp.sympify(v)
        object.__setattr__(self, "values", vals)

    def _zero(self):
        width = self.cover.ctx.n if self.kind == Kind.CURRENT else self.cover.ctx.m
        return (sp.S.Zero,) * width if self.kind in _TUPLE_KINDS else sp.S.Zero

    def __getitem__(self, simplex):
        simplex = tuple(self.cover.index(c) if isinstance(c, str) else c for c in simplex)
        return self.values.get(simplex, self._zero())

    def is_zero(self) -> bool:
        for v in self.values.values():
            for x in v if isinstance(v, tuple) else (v,):
                if not is_zero(x):
                    return False
        return True

    def map(self, fn: Callable, kind: Kind | None = None) -> "Cochain":
        return Cochain(self.cover, self.degree, kind or self.kind, {s: fn(s, v) for s, v in self.values.items()})

    def __sub__(self, other):
        return _combine(self, other, -1)

    def __add__(self, other):
        return _combine(self, other, 1)

    def named(self) -> dict:
        return {self.cover.names(s): v for s, v in sorted(self.values.items())}


def _combine(a: Cochain, b: Cochain, sign) -> Cochain:
    if a.cover is not b.cover or a.degree != b.degree or a.kind != b.kind:
        raise CoverError("cochains are not compatible")
    out = {}
    for s in set(a.values) | set(b.values):
        x, y = a[s], b[s]
        out[s] = tuple(simplify(u + sign * v) for u, v in zip(x, y)) if isinstance(x, tuple) else simplify(x + sign * y)
    return Cochain(a.cover, a.degree, a.kind, out)


def restrict(cover: Cover, kind: Kind, value, frm: int, to: int):
    if kind == Kind.CONSTANT or frm == to:
        return value
    if kind == Kind.SOURCE:
        return cover.pull_source(value, frm, to)
    if kind == Kind.CURRENT:
        return tuple(cover.pull(v, frm, to) for v in value)
    return cover.pull(value, frm, to)


def coboundary(f: Cochain) -> Cochain:
    """(df)(s_0..s_{q+1}) = sum_k (-1)^(k+1) f(face_k), restricted to chart s_0.

    The overall sign makes (d lambda)_ij = lambda_i - lambda_j on 0-cochains.
    """
    cover = f.cover
    out = {}
    for s in cover.simplices(f.degree + 1):
        acc = None
        for k in range(len(s)):
            face = s[:k] + s[k + 1 :]
            val = restrict(cover, f.kind, f[face], face[0], s[0])
            sign = (-1) ** (k + 1)
            if isinstance(val, tuple):
                acc = tuple(sign * v for v in val) if acc is None else tuple(a + sign * v for a, v in zip(acc, val))
            else:
                acc = sign * val if acc is None else acc + sign * val
        out[s] = tuple(simplify(a) for a in acc) if isinstance(acc, tuple) else simplify(acc)
    return Cochain(cover, f.degree + 1, f.kind, out)


# ---------------------------------------------------------------------------
# constant-coefficient nerve cohomology


def _coboundary_matrix(cover: Cover, q: int) -> sp.Matrix:
    rows, cols = cover.simplices(q + 1), cover.simplices(q)
    col = {s: k for k, s in enumerate(cols)}
    M = sp.zeros(len(rows), len(cols))
    for r, s in enumerate(rows):
        for k in range(len(s)):
            M[r, col[s[:k] + s[k + 1 :]]] += (-1) ** (k + 1)
    return M


@dataclass(frozen=True)
class ConstantCohomology:
    degree: int
    dimension: int
    basis: tuple


def cohomology_constant(cover: Cover, q: int) -> ConstantCohomology:
    """dim H^q of the nerve with real coefficients, with representative cocycles."""
    cols = cover.simplices(q)
    if not cols:
        return ConstantCohomology(q, 0, ())
    D = _coboundary_matrix(cover, q)
    cocycles = D.nullspace() if D.rows else [sp.eye(len(cols))[:, k] for k in range(len(cols))]
    image = _coboundary_matrix(cover, q - 1).columnspace() if q > 0 and cover.simplices(q - 1) else []
    basis = []
    span = list(image)
    for z in cocycles:
        trial = sp.Matrix.hstack(*(span + [z]))
        if trial.rank() > len(span) and (not span or trial.rank() > sp.Matrix.hstack(*span).rank()):
            span.append(z)
            basis.append(Cochain(cover, q, Kind.CONSTANT, {s: z[k] for k, s in enumerate(cols) if z[k] != 0}))
    return ConstantCohomology(q, len(basis), tuple(basis))


def nerve_cycles(cover: Cover) -> list:
    """A basis of 1-cycles of the nerve modulo boundaries, as {edge: coefficient}."""
    edges = cover.simplices(1)
    if not edges:
        return []
    B1 = _coboundary_matrix(cover, 0).T
    cycles = B1.nullspace()
    bounds = _coboundary_matrix(cover, 1).T.columnspace() if cover.simplices(2) else []
    span = list(bounds)
    out = []
    for z in cycles:
        if sp.Matrix.hstack(*(span + [z])).rank() > len(span):
            span.append(z)
            out.append({e: z[k] for k, e in enumerate(edges) if z[k] != 0})
    return out


def solve_constant_coboundary(c: Cochain):
    """A constant (q-1)-cochain k with dk = c, or None when c is not a coboundary."""
    cover = c.cover
    q = c.degree
    rows = cover.simplices(q)
    if not rows:
        return Cochain(cover, q - 1, Kind.CONSTANT, {})
    rhs = sp.Matrix([c[s] for s in rows])
    if q == 0:
        return None if any(not is_zero(x) for x in rhs) else Cochain(cover, -1, Kind.CONSTANT, {})
    cols = cover.simplices(q - 1)
    D = _coboundary_matrix(cover, q - 1)
    try:
        sol, params = D.gauss_jordan_solve(rhs)
    except ValueError:
        return None
    sol = sol.xreplace({p: 0 for p in params})
    return Cochain(cover, q - 1, Kind.CONSTANT, {s: simplify(sol[k]) for k, s in enumerate(cols)})


# ---------------------------------------------------------------------------
# Lagrangian cochains


class Verdict(enum.Enum):
    GLOBAL = "GLOBAL"
    NON_GLOBAL = "NON_GLOBAL"
    INCOHERENT = "INCOHERENT"


class ClassLabel(enum.Enum):
    TRIVIAL = "trivial"
    NONTRIVIAL = "nontrivial"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class Classification:
    verdict: Verdict
    d_lambda: Cochain
    source: Cochain
    d_source: Cochain
    differences_trivial: bool | None


@dataclass(frozen=True)
class Period:
    edge: tuple
    raw: float
    snapped: sp.Expr | None
    tol: float = SNAP_TOL

    @property
    def value(self):
        return self.snapped if self.snapped is not None else self.raw

    @property
    def vanishes(self) -> bool:
        if self.snapped is not None:
            return self.snapped == 0
        return abs(self.raw) < self.tol


@dataclass(frozen=True)
class ClassReport:
    representative: Cochain
    is_cocycle: bool
    is_coboundary: bool | None
    label: ClassLabel
    periods: tuple = ()
    witness: Cochain | None = None
    note: str = ""


def lagrangian_cochain(cover: Cover, densities: Mapping[str, sp.Expr]) -> Cochain:
    missing = [c.id for c in cover.charts if c.id not in densities]
    if missing:
        raise CoverError(f"no local Lagrangian on chart(s) {', '.join(missing)}")
    return Cochain(cover, 0, Kind.LAGRANGIAN, {(cover.index(k),): v for k, v in densities.items()})


def global_cochain(cover: Cover, density: sp.Expr) -> Cochain:
    """The same coordinate expression on every chart; checked to glue."""
    lam = Cochain(cover, 0, Kind.LAGRANGIAN, {(k,): density for k in range(len(cover.charts))})
    if not coboundary(lam).is_zero():
        raise CoverError("the expression does not define a global Lagrangian on this cover")
    return lam


def _require(lam: Cochain):
    if lam.degree != 0 or lam.kind != Kind.LAGRANGIAN:
        raise CoverError("expected a 0-cochain of Lagrangians")


def _trivial(cover, density) -> bool:
    return euler_lagrange(Lagrangian(cover.ctx, density)).is_zero()


def classify_lagrangian_cochain(lam: Cochain) -> Classification:
    _require(lam)
    cover = lam.cover
    eta = lam.map(lambda s, v: euler_lagrange(Lagrangian(cover.ctx, v)).simplified().components, Kind.SOURCE)
    d_eta = coboundary(eta)
    d_lam = coboundary(lam)
    if d_lam.is_zero():
        return Classification(Verdict.GLOBAL, d_lam, eta, d_eta, True)
    if not d_eta.is_zero():
        return Classification(Verdict.INCOHERENT, d_lam, eta, d_eta, None)
    ok = all(_trivial(cover, v) for v in d_lam.values.values())
    return Classification(Verdict.NON_GLOBAL, d_lam, eta, d_eta, ok)


def _snap(cover: Cover, raw: float, tol: float):
    lattice = cover.lattice
    if lattice is not None:
        ell = float(sp.N(lattice, 30))
        if ell != 0:
            k = round(raw / ell)
            if abs(raw - k * ell) < tol:
                return sp.Integer(k) * lattice
            return None
    return sp.S.Zero if abs(raw) < tol else None


def overlap_period(
    cover: Cover, density: sp.Expr, cycle: OverlapCycle, quad_tol: float = QUAD_TOL, snap_tol: float = SNAP_TOL
) -> Period:
    """Integral of the closed one-form a_i dy^i + b dt attached to a first-order
    variationally trivial Lagrangian a_i y^i_t + b, along an overlap cycle."""
    ctx = cover.ctx
    if ctx.n != 1:
        raise JetError("overlap periods are implemented for a one-dimensional base")
    L = sp.expand(density)
    vel = [ctx.jet(i, (1,)) for i in range(ctx.m)]
    a = [sp.diff(L, v) for v in vel]
    b = simplify(L - sum(ai * v for ai, v in zip(a, vel)))
    if any(ctx.order_of(x) > 0 for x in a + [b]):
        raise JetError("overlap difference is not affine in the velocities")
    s = cycle.param
    base = cycle.base or (sp.S.Zero,)
    sub = {ctx.jet(i): cycle.fiber[i] for i in range(ctx.m)}
    sub[ctx.base(0)] = base[0]
    integrand = sum(ai.xreplace(sub) * sp.diff(cycle.fiber[i], s) for i, ai in enumerate(a))
    integrand += b.xreplace(sub) * sp.diff(base[0], s)
    f = lambdify(integrand, [s])
    raw, _ = sp_integrate.quad(
        lambda u: float(f(u)), float(cycle.lower), float(cycle.upper), epsabs=quad_tol, epsrel=quad_tol, limit=200
    )
    return Period(cycle.edge, raw, _snap(cover, raw, snap_tol), snap_tol)


def _homotopy(cover, density, chart):
    return minor_components(horizontal_homotopy(Lagrangian(cover.ctx, density), cover.center(chart)))


def _components(cover: Cover):
    """Connected components of the nerve's 1-skeleton as BFS trees: (root, [(parent, child)])."""
    adj = {k: set() for k in range(len(cover.charts))}
    for a, b in cover.simplices(1):
        adj[a].add(b)
        adj[b].add(a)
    seen, out = set(), []
    for root in range(len(cover.charts)):
        if root in seen:
            continue
        seen.add(root)
        tree, queue = [], deque([root])
        while queue:
            u = queue.popleft()
            for w in sorted(adj[u]):
                if w not in seen:
                    seen.add(w)
                    tree.append((u, w))
                    queue.append(w)
        out.append((root, tree))
    return out


def _integrate_tree(nu: Cochain) -> Cochain:
    """A 0-cochain mu of currents with (d mu) = nu, for a 1-cocycle nu."""
    cover = nu.cover
    n = cover.ctx.n
    mu = {}
    for root, tree in _components(cover):
        mu[(root,)] = (sp.S.Zero,) * n
        for parent, child in tree:
            edge = tuple(sorted((parent, child)))
            val = nu[edge]
            if parent < child:
                # mu_child = mu_parent - nu, rewritten in child coordinates
                target = tuple(a - b for a, b in zip(mu[(parent,)], val))
                mu[(child,)] = restrict(cover, Kind.CURRENT, target, parent, child)
            else:
                # mu_child = mu_parent + nu, both in child (lower) coordinates
                up = restrict(cover, Kind.CURRENT, mu[(parent,)], parent, child)
                mu[(child,)] = tuple(simplify(a + b) for a, b in zip(up, val))
    return Cochain(cover, 0, Kind.CURRENT, mu)


def _is_constant(ctx: JetContext, e: sp.Expr) -> bool:
    e = simplify(e)
    return not any(ctx.decode(s) is not None for s in e.free_symbols) and e.is_constant()


def _trivialize(rep: Cochain, primitive: Cochain, note_prefix=""):
    """Given rep = d_H(primitive) edgewise, try to make primitive a coboundary.

    Returns (is_coboundary, witness 0-cochain or None, note).
    """
    cover = rep.cover
    ctx = cover.ctx
    obstruction = coboundary(primitive)
    if ctx.n != 1:
        if obstruction.is_zero():
            return True, _integrate_tree(primitive), ""
        return None, None, "non-constant obstruction data on a base of dimension > 1"
    for s, v in obstruction.values.items():
        if not _is_constant(ctx, v[0]):
            return None, None, f"obstruction on {cover.names(s)} is not constant"
    const = Cochain(cover, 2, Kind.CONSTANT, {s: v[0] for s, v in obstruction.values.items()})
    kappa = solve_constant_coboundary(const)
    if kappa is None:
        return False, None, "constant obstruction is not a coboundary"
    adjusted = primitive.map(lambda s, v: (simplify(v[0] - kappa[s]),))
    return True, _integrate_tree(adjusted), ""


def delta_class(lam: Cochain, quad_tol: float = QUAD_TOL, snap_tol: float = SNAP_TOL) -> ClassReport:
    """Class of d(lambda) for a non-global Lagrangian cochain."""
    _require(lam)
    cover = lam.cover
    cls = classify_lagrangian_cochain(lam)
    if cls.verdict == Verdict.INCOHERENT:
        raise CoverError("local Euler-Lagrange forms do not agree on overlaps")
    rep = cls.d_lambda
    zero_witness = Cochain(cover, 0, Kind.CURRENT, {(k,): (sp.S.Zero,) * cover.ctx.n for k in range(len(cover.charts))})
    if cls.verdict == Verdict.GLOBAL:
        return ClassReport(rep, True, True, ClassLabel.TRIVIAL, (), zero_witness)
    if not cls.differences_trivial:
        raise CoverError("overlap differences are not variationally trivial")
    periods = []
    for cyc in cover.cycles:
        edge = tuple(sorted(cover.index(c) for c in cyc.edge))
        if edge[0] != cover.index(cyc.edge[0]):
            raise CoverError("overlap cycles are parametrized in the lower chart of their edge")
        try:
            periods.append(overlap_period(cover, rep[edge], cyc, quad_tol, snap_tol))
        except JetError as exc:
            return ClassReport(rep, True, None, ClassLabel.UNDECIDED, tuple(periods), None, str(exc))
    if any(not p.vanishes for p in periods):
        return ClassReport(rep, True, False, ClassLabel.NONTRIVIAL, tuple(periods), None, "nonzero overlap period")
    try:
        nu = rep.map(lambda s, v: _homotopy(cover, v, s[0]), Kind.CURRENT)
    except JetError as exc:
        return ClassReport(rep, True, None, ClassLabel.UNDECIDED, tuple(periods), None, f"homotopy failed: {exc}")
    ok, witness, note = _trivialize(rep, nu)
    if ok:
        return ClassReport(rep, True, True, ClassLabel.TRIVIAL, tuple(periods), witness)
    label = ClassLabel.UNDECIDED if ok is None else ClassLabel.NONTRIVIAL
    return ClassReport(rep, True, ok, label, tuple(periods), None, note)


def _d_h_current(ctx, comps):
    return sp.expand(sum(total_derivative(c, lam, ctx) for lam, c in enumerate(comps)))


def globalize(lam: Cochain, report: ClassReport | None = None) -> Cochain:
    """lambda'_i = lambda_i - d_H mu_i, gluing to a global Lagrangian."""
    _require(lam)
    report = report or delta_class(lam)
    if report.label != ClassLabel.TRIVIAL:
        raise CoverError(f"class is {report.label.value}; cannot globalize")
    if report.witness is None:
        raise CoverError("no witness available")
    ctx = lam.cover.ctx
    out = lam.map(lambda s, v: simplify(v - _d_h_current(ctx, report.witness[s])))
    if not coboundary(out).is_zero():
        raise CoverError("globalized pieces fail to agree on overlaps")
    return out


def delta_prime_class(lam: Cochain) -> ClassReport:
    """Class of d(beta) for per-chart primitives beta of a global trivial Lagrangian."""
    _require(lam)
    cover = lam.cover
    ctx = cover.ctx
    if not coboundary(lam).is_zero():
        raise CoverError("Lagrangian is not global")
    for v in lam.values.values():
        if not _trivial(cover, v):
            raise NotTrivialError("Lagrangian is not variationally trivial")
    beta = lam.map(lambda s, v: _homotopy(cover, v, s[0]), Kind.CURRENT)
    rep = coboundary(beta)
    if rep.is_zero():
        return ClassReport(rep, True, True, ClassLabel.TRIVIAL, (), beta)
    if ctx.n != 1:
        return ClassReport(rep, True, None, ClassLabel.UNDECIDED, (), None, "base of dimension > 1")
    for s, v in rep.values.items():
        if not _is_constant(ctx, v[0]):
            return ClassReport(rep, True, None, ClassLabel.UNDECIDED, (), None, f"{cover.names(s)} not constant")
    const = Cochain(cover, 1, Kind.CONSTANT, {s: v[0] for s, v in rep.values.items()})
    periods = tuple(
        Period(tuple(cover.names(e) for e in z), float(sp.N(p)), p)
        for z in nerve_cycles(cover)
        for p in [simplify(sum(c * const[e] for e, c in z.items()))]
    )
    kappa = solve_constant_coboundary(const)
    if kappa is None:
        return ClassReport(rep, True, False, ClassLabel.NONTRIVIAL, periods, None, "winding constants")
    glued = beta.map(lambda s, v: (simplify(v[0] - kappa[s]),) + tuple(v[1:]))
    return ClassReport(rep, True, True, ClassLabel.TRIVIAL, periods, glued)


def globalize_primitive(lam: Cochain) -> Cochain:
    """Per-chart primitives beta_i of a global trivial Lagrangian that agree on overlaps."""
    report = delta_prime_class(lam)
    if report.label != ClassLabel.TRIVIAL:
        raise CoverError(f"class is {report.label.value}; no global primitive")
    if not coboundary(report.witness).is_zero():
        raise CoverError("adjusted primitives fail to agree on overlaps")
    return report.witness


# ---------------------------------------------------------------------------
# refinement


def refinement_cover(
    coarse: Cover,
    chart_map: Mapping[str, str],
    simplices: Sequence[Sequence[str]],
    cycles: Sequence[OverlapCycle] = (),
    centers: Mapping[str, tuple] | None = None,
) -> Cover:
    """A finer cover whose charts reuse the coordinates of their image charts."""
    centers = centers or {}
    fine_ids = list(chart_map)
    charts = [Chart(j, centers.get(j, coarse.charts[coarse.index(chart_map[j])].center)) for j in fine_ids]
    edges = {tuple(sorted(e, key=fine_ids.index)) for s in simplices for e in itertools.combinations(s, 2)}
    transitions = {}
    for a, b in edges:
        transitions[a, b] = coarse.transition(chart_map[a], chart_map[b])
    return Cover(coarse.ctx, charts, transitions, simplices, cycles, coarse.lattice)


def refine(c: Cochain, finer: Cover, chart_map: Mapping[str, str]) -> Cochain:
    """Pull a cochain back along f with V_j inside U_f(j)."""
    coarse = c.cover
    f = {}
    for ch in finer.charts:
        if ch.id not in chart_map:
            raise CoverError(f"chart map misses {ch.id}")
        f[finer.index(ch.id)] = coarse.index(chart_map[ch.id])
    out = {}
    for s in finer.simplices(c.degree):
        image = tuple(f[k] for k in s)
        if len(set(image)) != len(image):
            if c.degree == 0:
                raise CoverError("degenerate vertex image")
            continue
        if tuple(sorted(image)) not in coarse.nerve:
            raise CoverError(f"invalid chart map: {finer.names(s)} has no image simplex")
        order = sorted(range(len(image)), key=lambda k: image[k])
        sign = sp.Matrix.eye(len(image))[:, order].det() if len(image) > 1 else 1
        target = tuple(sorted(image))
        val = restrict(coarse, c.kind, c[target], target[0], image[0])
        out[s] = tuple(sign * v for v in val) if isinstance(val, tuple) else sign * val
    return Cochain(finer, c.degree, c.kind, out)
