"""Euler-Lagrange, momentum and Helmholtz operators; local inverse problems."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import sympy as sp

from .expr import JetContext, JetError, MultiIndex, is_zero, multi_indices_upto, simplify
from .forms import MixedForm, contract, d_H, horizontal_factor
from .jet import ProlongedField, derivative_table, total_derivative

MAX_MOMENTUM_ORDER = 2


class NotVariationalError(JetError):
    pass


class NotTrivialError(JetError):
    """Raised when a Lagrangian expected to be variationally trivial is not."""


@dataclass(frozen=True)
class Lagrangian:
    """Horizontal n-form L d^1 ^ ... ^ d^n; the density L is the whole datum."""

    ctx: JetContext
    density: sp.Expr

    def __post_init__(self):
        object.__setattr__(self, "density", sp.sympify(self.density))

    @property
    def order(self) -> int:
        return self.ctx.order_of(self.density)

    @property
    def form(self) -> MixedForm:
        return MixedForm.volume(self.ctx, self.density)

    @classmethod
    def from_form(cls, form: MixedForm) -> "Lagrangian":
        ctx = form.ctx
        if form.terms and form.bidegree != (0, ctx.n):
            raise JetError(f"a Lagrangian is a (0, {ctx.n}) form, got bidegree {form.bidegree}")
        return cls(ctx, form.coefficient(tuple(horizontal_factor(k) for k in range(ctx.n))))

    def __add__(self, other):
        return Lagrangian(self.ctx, sp.expand(self.density + other.density))

    def __sub__(self, other):
        return Lagrangian(self.ctx, sp.expand(self.density - other.density))

    def equals(self, other) -> bool:
        return is_zero(self.density - other.density)


@dataclass(frozen=True)
class SourceForm:
    """eta_i theta^i ^ d^1 ^ ... ^ d^n with contact factors of order zero."""

    ctx: JetContext
    components: tuple

    def __post_init__(self):
        comps = tuple(sp.sympify(c) for c in self.components)
        if len(comps) != self.ctx.m:
            raise ValueError("a source form has one component per fiber coordinate")
        object.__setattr__(self, "components", comps)

    @property
    def order(self) -> int:
        return max((self.ctx.order_of(c) for c in self.components), default=0)

    @property
    def form(self) -> MixedForm:
        out = MixedForm(self.ctx, {})
        vol = MixedForm.volume(self.ctx)
        for i, c in enumerate(self.components):
            out = out + MixedForm.theta(self.ctx, i, coeff=c).wedge(vol)
        return out

    def simplified(self) -> "SourceForm":
        return SourceForm(self.ctx, tuple(simplify(c) for c in self.components))

    def __sub__(self, other):
        return SourceForm(self.ctx, tuple(a - b for a, b in zip(self.components, other.components)))

    def __add__(self, other):
        return SourceForm(self.ctx, tuple(a + b for a, b in zip(self.components, other.components)))

    def is_zero(self) -> bool:
        return all(is_zero(c) for c in self.components)

    def equals(self, other) -> bool:
        return (self - other).is_zero()


def euler_lagrange(lag: Lagrangian) -> SourceForm:
    """eta_i = sum over alpha of (-1)^|alpha| D_alpha(dL/dy^i_alpha)."""
    ctx = lag.ctx
    L = sp.expand(lag.density)
    comps = [sp.S.Zero] * ctx.m
    for sym, c in ctx.jet_coordinates(L).items():
        table = derivative_table(sp.diff(L, sym), ctx)
        comps[c.index] += (-1) ** c.alpha.order * table[c.alpha]
    return SourceForm(ctx, tuple(sp.expand(x) for x in comps))


def interior_euler(form: MixedForm) -> SourceForm:
    """Source-form representative of a (1, n) form sum A^alpha_i theta^i_alpha ^ omega_0."""
    ctx = form.ctx
    comps = [sp.S.Zero] * ctx.m
    for key, coeff in form.terms.items():
        if MixedForm.bidegree_of(key) != (1, ctx.n):
            raise JetError("interior Euler operator acts on (1, n) forms")
        _, i, alpha = key[0]
        comps[i] += (-1) ** alpha.order * derivative_table(coeff, ctx)[alpha]
    return SourceForm(ctx, tuple(sp.expand(x) for x in comps))


def _second_order_weights(ctx, L, i):
    """P^{lam mu}_i: dL/dy^i_{lam+mu}, halved off the diagonal."""
    P = {}
    for lam in range(ctx.n):
        for mu in range(ctx.n):
            alpha = MultiIndex.unit(ctx.n, lam).raised(mu)
            d = sp.diff(L, ctx.jet(i, alpha))
            P[lam, mu] = d if lam == mu else d / 2
    return P


@dataclass(frozen=True)
class Momentum:
    """A (1, n-1) form p with d_V lambda = E(lambda) - d_H p."""

    ctx: JetContext
    form: MixedForm


def momentum(lag: Lagrangian) -> Momentum:
    """Canonical momentum by iterated integration by parts (orders <= 2)."""
    ctx = lag.ctx
    if lag.order > MAX_MOMENTUM_ORDER:
        raise JetError(f"momentum is implemented for Lagrangians of order <= {MAX_MOMENTUM_ORDER}, got {lag.order}")
    L = sp.expand(lag.density)
    zero = ctx.zero_index()
    out = MixedForm(ctx, {})
    for i in range(ctx.m):
        P = _second_order_weights(ctx, L, i)
        for lam in range(ctx.n):
            minor = MixedForm.volume_minor(ctx, lam)
            first = sp.diff(L, ctx.jet(i, MultiIndex.unit(ctx.n, lam)))
            first -= sum(total_derivative(P[lam, mu], mu, ctx) for mu in range(ctx.n))
            out = out + MixedForm.theta(ctx, i, zero, first).wedge(minor)
            for mu in range(ctx.n):
                if P[lam, mu] != 0:
                    out = out + MixedForm.theta(ctx, i, MultiIndex.unit(ctx.n, mu), P[lam, mu]).wedge(minor)
    return Momentum(ctx, out)


@dataclass(frozen=True)
class HelmholtzTensor:
    """Components H[i, j, beta]; acting on a vertical generator V it gives
    H(V)_i = sum_{j, beta} H[i, j, beta] D_beta V^j."""

    ctx: JetContext
    components: Mapping = field(hash=False)

    def is_zero(self) -> bool:
        return all(is_zero(v) for v in self.components.values())

    def nonzero(self) -> dict:
        return {k: v for k, v in self.components.items() if not is_zero(v)}

    def apply(self, generator: Sequence[sp.Expr]) -> SourceForm:
        ctx = self.ctx
        tables = [derivative_table(g, ctx) for g in generator]
        comps = [sp.S.Zero] * ctx.m
        for (i, j, beta), h in self.components.items():
            comps[i] += h * tables[j][beta]
        return SourceForm(ctx, tuple(sp.expand(c) for c in comps))


def helmholtz(eta: SourceForm) -> HelmholtzTensor:
    """dEta_i/dy^j_b - sum_{g >= b} (-1)^|g| C(g, b) D_{g-b}(dEta_j/dy^i_g)."""
    ctx = eta.ctx
    s = eta.order
    alphas = multi_indices_upto(ctx.n, s)
    partials = {}
    for j, comp in enumerate(eta.components):
        comp = sp.expand(comp)
        for i in range(ctx.m):
            for g in alphas:
                d = sp.diff(comp, ctx.jet(i, g))
                if d != 0:
                    partials[j, i, g] = derivative_table(d, ctx)
    out = {}
    for i in range(ctx.m):
        for j in range(ctx.m):
            for b in alphas:
                h = sp.diff(sp.expand(eta.components[i]), ctx.jet(j, b))
                for g in alphas:
                    if (j, i, g) in partials and g.dominates(b):
                        h -= (-1) ** g.order * g.binomial(b) * partials[j, i, g][g - b]
                h = simplify(h)
                if h != 0:
                    out[i, j, b] = h
    return HelmholtzTensor(ctx, out)


def is_locally_variational(eta: SourceForm) -> bool:
    return helmholtz(eta).is_zero()


def _scaling(ctx, expr, center, s):
    """Substitute y -> c + s (y - c) and y_alpha -> s y_alpha for |alpha| >= 1."""
    mapping = {}
    for sym, c in ctx.jet_coordinates(expr).items():
        if c.order == 0:
            mapping[sym] = center[c.index] + s * (sym - center[c.index])
        else:
            mapping[sym] = s * sym
    return sp.sympify(expr).xreplace(mapping)


def _integrate_unit(expr, s):
    expr = sp.expand(expr)
    if expr.is_polynomial(s):
        return sp.expand(sp.integrate(expr, (s, 0, 1)))
    result = sp.integrate(sp.cancel(expr), (s, 0, 1), conds="none")
    if result.has(sp.Integral, sp.Piecewise) or result.has(sp.zoo, sp.oo, sp.nan):
        raise JetError("the homotopy integral has no closed form")
    return simplify(result)


def _center(ctx, center):
    if center is None:
        return (sp.S.Zero,) * ctx.m
    center = tuple(sp.sympify(c) for c in center)
    if len(center) != ctx.m:
        raise ValueError("center needs one value per fiber coordinate")
    return center


def vainberg_tonti(eta: SourceForm, center=None) -> Lagrangian:
    """L = (y^i - c^i) * integral_0^1 eta_i(x, c + s(y - c), s y_alpha) ds."""
    if not is_locally_variational(eta):
        raise NotVariationalError("source form fails the Helmholtz conditions")
    ctx = eta.ctx
    c = _center(ctx, center)
    s = sp.Dummy("s")
    L = sp.S.Zero
    for i, comp in enumerate(eta.components):
        if comp == 0:
            continue
        L += (ctx.jet(i) - c[i]) * _integrate_unit(_scaling(ctx, comp, c, s), s)
    return Lagrangian(ctx, sp.expand(L))


def vertical_generator_field(ctx: JetContext, generator: Sequence[sp.Expr], order: int) -> ProlongedField:
    """Prolongation of the vertical (evolutionary) field with components D_alpha V^i."""
    comps = {}
    for i, g in enumerate(generator):
        table = derivative_table(g, ctx)
        for alpha in multi_indices_upto(ctx.n, order):
            comps[i, alpha] = table[alpha]
    return ProlongedField(ctx, order, (sp.S.Zero,) * ctx.n, comps)


def minor_components(form: MixedForm) -> tuple:
    """Coefficients eps^lam of a (0, n-1) form sum eps^lam (d_lam _| omega_0)."""
    ctx = form.ctx
    out = []
    for lam in range(ctx.n):
        key = tuple(horizontal_factor(k) for k in range(ctx.n) if k != lam)
        out.append(sp.expand((-1) ** lam * form.coefficient(key)))
    return tuple(out)


def from_minor_components(ctx: JetContext, comps: Sequence[sp.Expr]) -> MixedForm:
    out = MixedForm(ctx, {})
    for lam, c in enumerate(comps):
        out = out + MixedForm.volume_minor(ctx, lam, c)
    return out


def horizontal_homotopy(lag: Lagrangian, center=None) -> MixedForm:
    """A (0, n-1) form beta with d_H beta = lambda, for variationally trivial lambda.

    The fiber part comes from scaling the fibers toward ``center``: with
    V = y - c, lambda - lambda|_c = d_H of integral_0^1 (1/s) phi_s^*(j V _| p) ds.
    The remaining base density lambda|_c is integrated along the first base
    coordinate.
    """
    ctx = lag.ctx
    if not euler_lagrange(lag).is_zero():
        raise NotTrivialError("Lagrangian is not variationally trivial")
    c = _center(ctx, center)
    s = sp.Dummy("s", positive=True)
    generator = [ctx.jet(i) - c[i] for i in range(ctx.m)]
    p = momentum(lag)
    field = vertical_generator_field(ctx, generator, max(lag.order - 1, 0))
    eps = minor_components(contract(field, p.form))
    comps = []
    for e in eps:
        scaled = sp.cancel(_scaling(ctx, e, c, s) / s)
        comps.append(_integrate_unit(scaled, s) if scaled != 0 else sp.S.Zero)
    base_density = _scaling(ctx, lag.density, c, s)
    base_density = sp.limit(base_density, s, 0) if base_density.has(s) else base_density
    if base_density.has(sp.zoo, sp.oo, sp.nan) or ctx.depends_on_fiber(base_density):
        raise JetError("Lagrangian is singular at the homotopy center")
    base_density = simplify(base_density)
    if base_density != 0:
        x0 = ctx.base(0)
        u = sp.Dummy("u")
        prim = sp.integrate(base_density.xreplace({x0: u}), (u, 0, x0))
        if prim.has(sp.Integral):
            raise JetError("base part of the homotopy has no closed form")
        comps[0] += prim
    return from_minor_components(ctx, [simplify(x) for x in comps])
