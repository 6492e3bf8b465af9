"""Jet kinematics: total derivatives, prolonged vector fields and sections."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Mapping, Sequence

import mpmath
import numpy as np
import sympy as sp

from .expr import (
    JetContext,
    JetError,
    MultiIndex,
    OrderError,
    lambdify,
    multi_indices_upto,
    simplify,
)

# Sampled sections are differentiated with 4th-order centered stencils.
MAX_SAMPLED_ORDER = 4
_F = Fraction
_STENCILS = {
    1: ((_F(1, 12), _F(-8, 12), 0, _F(8, 12), _F(-1, 12)), 2),
    2: ((_F(-1, 12), _F(16, 12), _F(-30, 12), _F(16, 12), _F(-1, 12)), 2),
    3: ((_F(1, 8), -1, _F(13, 8), 0, _F(-13, 8), 1, _F(-1, 8)), 3),
    4: ((_F(-1, 6), 2, _F(-13, 2), _F(28, 3), _F(-13, 2), 2, _F(-1, 6)), 3),
}


def total_derivative(e: sp.Expr, lam: int, ctx: JetContext) -> sp.Expr:
    """D_lam e = d_lam e + sum over jet coordinates of y^j_{alpha+lam} de/dy^j_alpha."""
    e = sp.sympify(e)
    out = sp.diff(e, ctx.base(lam))
    for sym, c in ctx.jet_coordinates(e).items():
        out += ctx.jet(c.index, c.alpha.raised(lam)) * sp.diff(e, sym)
    return sp.expand(out)


def iterated_total_derivative(e: sp.Expr, alpha: Sequence[int], ctx: JetContext) -> sp.Expr:
    for lam, count in enumerate(alpha):
        for _ in range(count):
            e = total_derivative(e, lam, ctx)
    return sp.expand(e)


class _DerivativeTable:
    """Memoized D_alpha of one expression, built up one index at a time."""

    def __init__(self, e, ctx):
        self.ctx = ctx
        self.table = {MultiIndex.zero(ctx.n): sp.expand(e)}

    def __getitem__(self, alpha):
        alpha = MultiIndex(alpha)
        if alpha not in self.table:
            lam = next(k for k, a in enumerate(alpha) if a > 0)
            parent = alpha - MultiIndex.unit(self.ctx.n, lam)
            self.table[alpha] = total_derivative(self[parent], lam, self.ctx)
        return self.table[alpha]


def derivative_table(e, ctx):
    return _DerivativeTable(e, ctx)


@dataclass(frozen=True)
class ProjectableVectorField:
    """xi^lam(x) d_lam + Xi^i(x, y) d_i on Y."""

    ctx: JetContext
    xi: tuple
    Xi: tuple

    def __post_init__(self):
        xi = tuple(sp.sympify(a) for a in self.xi)
        Xi = tuple(sp.sympify(a) for a in self.Xi)
        if len(xi) != self.ctx.n or len(Xi) != self.ctx.m:
            raise ValueError("field needs n base and m fiber components")
        for a in xi:
            if self.ctx.depends_on_fiber(a):
                raise ValueError(f"base component {a} depends on fiber coordinates")
        for a in Xi:
            if self.ctx.order_of(a) > 0:
                raise ValueError(f"fiber component {a} depends on derivative coordinates")
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "Xi", Xi)

    @classmethod
    def zero(cls, ctx):
        return cls(ctx, (0,) * ctx.n, (0,) * ctx.m)

    def characteristic(self, i: int) -> sp.Expr:
        """Xi^i - y^i_mu xi^mu, the generator of the vertical part."""
        ctx = self.ctx
        return sp.expand(
            self.Xi[i] - sum(ctx.jet(i, MultiIndex.unit(ctx.n, mu)) * self.xi[mu] for mu in range(ctx.n))
        )

    def bracket(self, other: "ProjectableVectorField") -> "ProjectableVectorField":
        ctx = self.ctx
        coords = list(ctx.base_symbols) + [ctx.jet(i) for i in range(ctx.m)]
        mine = list(self.xi) + list(self.Xi)
        theirs = list(other.xi) + list(other.Xi)
        comps = [
            sp.expand(sum(a * sp.diff(w, c) - b * sp.diff(u, c) for c, a, b in zip(coords, mine, theirs)))
            for u, w in zip(mine, theirs)
        ]
        return ProjectableVectorField(ctx, tuple(comps[: ctx.n]), tuple(comps[ctx.n :]))


@dataclass(frozen=True)
class ProlongedField:
    """A vector field on J_s Y: base part xi and components Xi^i_alpha, |alpha| <= s."""

    ctx: JetContext
    order: int
    xi: tuple
    components: Mapping = field(hash=False)

    def component(self, i: int, alpha) -> sp.Expr:
        alpha = MultiIndex(alpha)
        if alpha.order > self.order:
            raise OrderError(f"field is prolonged to order {self.order}, component of order {alpha.order} requested")
        return self.components[(i, alpha)]

    def vertical(self) -> "ProlongedField":
        ctx = self.ctx
        comps = {
            (i, a): sp.expand(v - sum(ctx.jet(i, a.raised(lam)) * self.xi[lam] for lam in range(ctx.n)))
            for (i, a), v in self.components.items()
        }
        return ProlongedField(ctx, self.order, (sp.S.Zero,) * ctx.n, comps)

    def horizontal(self) -> "ProlongedField":
        ctx = self.ctx
        comps = {
            (i, a): sp.expand(sum(ctx.jet(i, a.raised(lam)) * self.xi[lam] for lam in range(ctx.n)))
            for (i, a) in self.components
        }
        return ProlongedField(ctx, self.order, self.xi, comps)

    def is_vertical(self) -> bool:
        return all(simplify(a) == 0 for a in self.xi)

    def __add__(self, other):
        order = min(self.order, other.order)
        comps = {k: sp.expand(v + other.components[k]) for k, v in self.components.items() if k[1].order <= order}
        return ProlongedField(self.ctx, order, tuple(a + b for a, b in zip(self.xi, other.xi)), comps)

    def equals(self, other) -> bool:
        if self.order != other.order:
            return False
        if any(simplify(a - b) != 0 for a, b in zip(self.xi, other.xi)):
            return False
        return all(simplify(v - other.components[k]) == 0 for k, v in self.components.items())

    def coordinate_components(self) -> dict:
        """Map coordinate symbol -> component, for use as a derivation."""
        out = {self.ctx.base(lam): x for lam, x in enumerate(self.xi)}
        for (i, a), v in self.components.items():
            out[self.ctx.jet(i, a)] = v
        return out

    def apply(self, e: sp.Expr) -> sp.Expr:
        """The field acting as a derivation on a function of J_s Y."""
        comps = self.coordinate_components()
        out = sp.S.Zero
        for sym in sp.sympify(e).free_symbols:
            if sym in comps:
                out += comps[sym] * sp.diff(e, sym)
            else:
                c = self.ctx.decode(sym)
                if c is not None and c.kind == "jet":
                    raise OrderError(f"field of order {self.order} cannot act on {sym}")
        return sp.expand(out)

    def bracket(self, other: "ProlongedField") -> "ProlongedField":
        order = min(self.order, other.order)
        ctx = self.ctx
        xi = tuple(sp.expand(self.apply(b) - other.apply(a)) for a, b in zip(self.xi, other.xi))
        comps = {
            k: sp.expand(self.apply(other.components[k]) - other.apply(v))
            for k, v in self.components.items()
            if k[1].order <= order
        }
        return ProlongedField(ctx, order, xi, comps)


def prolong_field(v: ProjectableVectorField, s: int) -> ProlongedField:
    """j_s of a projectable field: Xi^i_alpha = D_alpha(Xi^i - y^i_mu xi^mu) + y^i_{alpha+mu} xi^mu."""
    ctx = v.ctx
    comps = {}
    for i in range(ctx.m):
        table = derivative_table(v.characteristic(i), ctx)
        for alpha in multi_indices_upto(ctx.n, s):
            if alpha.order == 0:
                comps[(i, alpha)] = sp.sympify(v.Xi[i])
                continue
            comps[(i, alpha)] = sp.expand(
                table[alpha] + sum(ctx.jet(i, alpha.raised(mu)) * v.xi[mu] for mu in range(ctx.n))
            )
    return ProlongedField(ctx, s, v.xi, comps)


def split_prolonged(v: ProlongedField) -> tuple[ProlongedField, ProlongedField]:
    """(horizontal part xi^lam D_lam, vertical part) of a prolonged field."""
    return v.horizontal(), v.vertical()


# ---------------------------------------------------------------------------
# sections


@dataclass(frozen=True)
class Section:
    """A section x -> y(x), closed-form or sampled on a uniform grid.

    Closed-form sections hold m expressions in the base coordinates.  Sampled
    ones hold the grid axes and an array of shape (m, *grid shape).
    """

    ctx: JetContext
    exprs: tuple | None = None
    axes: tuple | None = field(default=None, hash=False)
    values: np.ndarray | None = field(default=None, hash=False)
    dps: int | None = None  # working precision of mpmath samples

    @classmethod
    def closed(cls, ctx, exprs):
        exprs = tuple(sp.sympify(e) for e in exprs)
        if len(exprs) != ctx.m:
            raise ValueError("section needs m components")
        for e in exprs:
            if ctx.depends_on_fiber(e):
                raise ValueError(f"section component {e} depends on fiber coordinates")
        return cls(ctx, exprs=exprs)

    @classmethod
    def sampled(cls, ctx, axes, values, dps=None):
        axes = tuple(np.asarray(a) for a in axes)
        values = np.asarray(values)
        if len(axes) != ctx.n:
            raise ValueError("need one grid axis per base coordinate")
        shape = tuple(len(a) for a in axes)
        if values.shape != (ctx.m,) + shape:
            raise ValueError(f"values have shape {values.shape}, expected {(ctx.m,) + shape}")
        for a in axes:
            if len(a) > 1:
                d = np.diff(a.astype(float))
                if not np.allclose(d, d[0], rtol=1e-9, atol=0):
                    raise ValueError("sampled sections need a uniform grid")
        return cls(ctx, axes=axes, values=values, dps=dps)

    @property
    def is_closed(self) -> bool:
        return self.exprs is not None

    @property
    def steps(self) -> tuple:
        return tuple(a[1] - a[0] for a in self.axes)


@dataclass
class JetValues:
    """Values of base and jet coordinates along j_s sigma on a grid."""

    ctx: JetContext
    order: int
    points: dict
    values: dict
    steps: tuple | None = None

    @property
    def shape(self):
        return next(iter(self.points.values())).shape

    def evaluate(self, e: sp.Expr) -> np.ndarray:
        e = sp.sympify(e)
        syms = sorted(e.free_symbols, key=lambda s: s.name)
        args = []
        for s in syms:
            if s in self.points:
                args.append(self.points[s])
            elif s in self.values:
                args.append(self.values[s])
            else:
                raise OrderError(f"{s} not available on the order-{self.order} prolongation")
        sample = next(iter(self.points.values()))
        if sample.dtype == object:
            f = lambdify(e, syms, backend="mpmath")
            out = np.frompyfunc(f, len(syms), 1)(*args) if syms else f()
            return np.broadcast_to(np.asarray(out, dtype=object), sample.shape).copy()
        f = lambdify(e, syms)
        return np.broadcast_to(np.asarray(f(*args), dtype=float), sample.shape).copy()


def _diff_axis(arr, axis, h, k):
    coeffs, half = _STENCILS[k]
    out = np.full(arr.shape, np.nan, dtype=arr.dtype)
    if arr.dtype == object:
        out[...] = None
    n = arr.shape[axis]
    if n < 2 * half + 1:
        raise JetError(f"insufficient samples ({n}) for a derivative of order {k}")
    acc = 0
    for j, c in enumerate(coeffs):
        if c == 0:
            continue
        sl = [slice(None)] * arr.ndim
        sl[axis] = slice(j, n - 2 * half + j)
        acc = acc + _coef(c, arr) * arr[tuple(sl)]
    dst = [slice(None)] * arr.ndim
    dst[axis] = slice(half, n - half)
    out[tuple(dst)] = acc / (h**k)
    return out


def _coef(c, arr):
    c = Fraction(c)
    if arr.dtype == object:
        return mpmath.mpf(c.numerator) / c.denominator
    return float(c)


def _margin(k):
    return 0 if k == 0 else _STENCILS[k][1]


def prolong_section(sigma: Section, s: int, grid=None) -> JetValues:
    """Values of y^i_alpha o j_s sigma for |alpha| <= s.

    Closed-form sections are differentiated exactly and evaluated on ``grid``
    (a sequence of n axes).  Sampled sections use 4th-order centered
    differences and are trimmed to the points where every stencil fits.
    """
    ctx = sigma.ctx
    xs = ctx.base_symbols
    alphas = multi_indices_upto(ctx.n, s)
    if sigma.is_closed:
        if grid is None:
            raise JetError("closed-form sections need an evaluation grid")
        mesh = np.meshgrid(*[np.asarray(a) for a in grid], indexing="ij")
        object_mode = mesh[0].dtype == object
        points = dict(zip(xs, mesh))
        values = {}
        for i, expr in enumerate(sigma.exprs):
            for alpha in alphas:
                d = expr
                for lam, count in enumerate(alpha):
                    d = sp.diff(d, xs[lam], count)
                f = lambdify(d, xs, backend="mpmath" if object_mode else "numpy")
                if object_mode:
                    val = np.frompyfunc(f, ctx.n, 1)(*mesh)
                else:
                    val = np.broadcast_to(np.asarray(f(*mesh), dtype=float), mesh[0].shape).copy()
                values[ctx.jet(i, alpha)] = val
        return JetValues(ctx, s, points, values)

    if any(max(a) > MAX_SAMPLED_ORDER for a in alphas if a.order):
        raise OrderError(f"sampled sections support derivative orders up to {MAX_SAMPLED_ORDER}")
    h = sigma.steps
    margins = [max(_margin(a[lam]) for a in alphas) for lam in range(ctx.n)]
    for lam, axis in enumerate(sigma.axes):
        if len(axis) <= 2 * margins[lam]:
            raise JetError(f"insufficient samples near the boundary along {ctx.base_names[lam]}")
    trim = tuple(slice(mg, len(ax) - mg) for mg, ax in zip(margins, sigma.axes))
    mesh = np.meshgrid(*sigma.axes, indexing="ij")
    points = {x: grid_[trim] for x, grid_ in zip(xs, mesh)}
    values = {}
    for i in range(ctx.m):
        for alpha in alphas:
            arr = sigma.values[i]
            for lam, count in enumerate(alpha):
                if count:
                    arr = _diff_axis(arr, lam, h[lam], count)
            values[ctx.jet(i, alpha)] = arr[trim]
    return JetValues(ctx, s, points, values, steps=h)


def read_trajectory(path, ctx: JetContext) -> Section:
    """Read a ``# step <h>`` headed file of ``t y1 ... ym`` lines."""
    if ctx.n != 1:
        raise JetError("trajectory files describe sections over a one-dimensional base")
    step = None
    rows = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        text = line.strip()
        if not text:
            continue
        if text.startswith("#"):
            parts = text[1:].split()
            if parts and parts[0] == "step":
                step = float(parts[1])
            continue
        fields = text.split()
        if len(fields) != ctx.m + 1:
            raise JetError(f"{path}:{lineno}: expected {ctx.m + 1} columns, got {len(fields)}")
        rows.append([float(f) for f in fields])
    if step is None:
        raise JetError(f"{path}: missing '# step <h>' header")
    data = np.array(rows)
    t = data[:, 0]
    if len(t) > 1 and not np.allclose(np.diff(t), step, rtol=1e-6, atol=1e-12):
        raise JetError(f"{path}: samples are not spaced by the declared step {step}")
    return Section.sampled(ctx, (t,), data[:, 1:].T)


def write_trajectory(path, section: Section) -> None:
    (t,) = section.axes
    lines = [f"# step {float(section.steps[0])!r}"]
    for k in range(len(t)):
        lines.append(" ".join(repr(float(x)) for x in [t[k], *section.values[:, k]]))
    Path(path).write_text("\n".join(lines) + "\n")
