"""Seeded random jet objects for property checks and experiments.

Everything is polynomial with small rational coefficients so that exact
symbolic comparisons stay cheap.  Fresh ``numpy.random.Generator`` instances
make runs reproducible from a single seed.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from .expr import JetContext, MultiIndex, multi_indices_upto
from .forms import MixedForm
from .jet import ProjectableVectorField
from .varseq import Lagrangian, SourceForm, from_minor_components


def rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _coefficient(g: np.random.Generator) -> sp.Rational:
    num = int(g.integers(1, 6)) * (1 if g.random() < 0.5 else -1)
    return sp.Rational(num, int(g.integers(1, 4)))


def random_monomial(g, variables, max_factors: int = 3) -> sp.Expr:
    k = int(g.integers(0, max_factors + 1))
    picks = g.choice(len(variables), size=k) if k else []
    out = _coefficient(g)
    for idx in picks:
        out *= variables[int(idx)]
    return out


def random_polynomial(g, variables, terms: int, max_factors: int = 3) -> sp.Expr:
    return sp.expand(sum(random_monomial(g, variables, max_factors) for _ in range(terms)))


def jet_variables(ctx: JetContext, order: int, with_base: bool = True) -> list:
    out = list(ctx.base_symbols) if with_base else []
    out += [ctx.jet(i, a) for a in multi_indices_upto(ctx.n, order) for i in range(ctx.m)]
    return out


def random_context(g, max_n: int = 2, max_m: int = 2, r: int = 2) -> JetContext:
    return JetContext.create(n=int(g.integers(1, max_n + 1)), m=int(g.integers(1, max_m + 1)), r=r)


def random_lagrangian(g, ctx: JetContext, order: int | None = None, terms: int | None = None, max_factors: int = 3) -> Lagrangian:
    """Polynomial density of jet order <= ``order`` with at most ``terms`` monomials.

    One monomial carries a top-order coordinate, so the order is attained
    unless that monomial cancels against another.
    """
    order = ctx.r if order is None else order
    terms = int(g.integers(1, 7)) if terms is None else terms
    variables = jet_variables(ctx, order)
    density = random_polynomial(g, variables, terms - 1, max_factors)
    tops = [ctx.jet(i, a) for a in multi_indices_upto(ctx.n, order) if a.order == order for i in range(ctx.m)]
    top = tops[int(g.integers(0, len(tops)))]
    density = sp.expand(density + random_monomial(g, variables, max_factors - 1) * top)
    return Lagrangian(ctx, density)


def random_horizontal_minor(g, ctx: JetContext, order: int = 1, terms: int = 3) -> MixedForm:
    """A (0, n-1) horizontal form with polynomial minor components."""
    variables = jet_variables(ctx, order)
    comps = [random_polynomial(g, variables, terms, max_factors=2) for _ in range(ctx.n)]
    return from_minor_components(ctx, comps)


def random_projectable_field(g, ctx: JetContext, terms: int = 2) -> ProjectableVectorField:
    """xi^lam polynomial in x, Xi^i polynomial in (x, y)."""
    base = list(ctx.base_symbols)
    fiber = base + [ctx.jet(i) for i in range(ctx.m)]
    xi = [random_polynomial(g, base, int(g.integers(0, terms + 1)), max_factors=2) for _ in range(ctx.n)]
    Xi = [random_polynomial(g, fiber, int(g.integers(1, terms + 1)), max_factors=2) for _ in range(ctx.m)]
    return ProjectableVectorField(ctx, tuple(xi), tuple(Xi))


def random_non_variational(g, ctx: JetContext, base: SourceForm) -> SourceForm:
    """base plus a perturbation whose Helmholtz expressions cannot all vanish.

    The perturbation is ``y^0_mu * f`` with f nonzero and free of
    derivative coordinates.  Its Helmholtz component at (0, 0, mu) is
    ``2 f``, which no variational base can cancel.
    """
    variables = list(ctx.base_symbols) + [ctx.jet(i) for i in range(ctx.m)]
    f = sp.Integer(0)
    while f == 0:
        f = random_polynomial(g, variables, int(g.integers(1, 3)), max_factors=2)
    mu = int(g.integers(0, ctx.n))
    bump = sp.expand(ctx.jet(0, MultiIndex.unit(ctx.n, mu)) * f)
    comps = list(base.components)
    comps[0] = sp.expand(comps[0] + bump)
    return SourceForm(ctx, tuple(comps))
