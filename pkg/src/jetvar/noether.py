"""Variational Lie derivatives, Noether currents and numerical conservation checks."""
from __future__ import annotations

import contextlib
import enum
from dataclasses import dataclass, field
from typing import Sequence

import mpmath
import numpy as np
import sympy as sp
from scipy import integrate as sp_integrate

from .expr import JetContext, JetError, MultiIndex, is_zero, lambdify, simplify
from .forms import MixedForm, contract, exterior_d, horizontalize, lie_derivative, to_naive
from .jet import ProjectableVectorField, Section, prolong_field, prolong_section, total_derivative
from .varseq import (
    Lagrangian,
    SourceForm,
    euler_lagrange,
    from_minor_components,
    helmholtz,
    horizontal_homotopy,
    interior_euler,
    minor_components,
    momentum,
    vertical_generator_field,
)

CRITICALITY_TOL = 1e-6


class CurrentKind(enum.Enum):
    CANONICAL = "canonical"
    IMPROVED = "improved"
    GENERALIZED = "generalized"


class NotGeneralizedSymmetryError(JetError):
    pass


@dataclass(frozen=True)
class Current:
    """A (0, n-1) form sum eps^lam (d_lam _| omega_0)."""

    ctx: JetContext
    form: MixedForm
    kind: CurrentKind = CurrentKind.CANONICAL

    @classmethod
    def from_components(cls, ctx, comps, kind=CurrentKind.CANONICAL) -> "Current":
        return cls(ctx, from_minor_components(ctx, [simplify(c) for c in comps]), kind)

    @property
    def components(self) -> tuple:
        return minor_components(self.form)

    def divergence(self) -> sp.Expr:
        """Coefficient of omega_0 in d_H of the current."""
        return sp.expand(sum(total_derivative(c, lam, self.ctx) for lam, c in enumerate(self.components)))

    def is_zero(self) -> bool:
        return self.form.is_zero()


@dataclass(frozen=True)
class LieDecomposition:
    """total = work + boundary, with boundary = d_H(current)."""

    total: Lagrangian
    work: Lagrangian
    boundary: Lagrangian
    current: Current


@dataclass(frozen=True)
class SourceLieDecomposition:
    """total = euler_part + helmholtz_part."""

    total: SourceForm
    euler_part: SourceForm
    helmholtz_part: SourceForm


def _generator(v: ProjectableVectorField):
    return [v.characteristic(i) for i in range(v.ctx.m)]


def _work(lag_ctx, generator, eta: SourceForm) -> sp.Expr:
    return sp.expand(sum(g * e for g, e in zip(generator, eta.components)))


def _check_ctx(a, b):
    if a != b:
        raise JetError("objects live on different jet contexts")


def canonical_current(lag: Lagrangian, v: ProjectableVectorField) -> Current:
    """j Xi_V _| p + xi _| lambda."""
    _check_ctx(lag.ctx, v.ctx)
    ctx = lag.ctx
    p = momentum(lag)
    field_v = vertical_generator_field(ctx, _generator(v), max(lag.order - 1, 0))
    comps = minor_components(contract(field_v, p.form))
    comps = [c + lag.density * xi for c, xi in zip(comps, v.xi)]
    return Current.from_components(ctx, comps)


def variational_lie_lagrangian(lag: Lagrangian, v: ProjectableVectorField) -> LieDecomposition:
    ctx = lag.ctx
    eta = euler_lagrange(lag)
    current = canonical_current(lag, v)
    work = Lagrangian(ctx, simplify(_work(ctx, _generator(v), eta)))
    boundary = Lagrangian(ctx, simplify(current.divergence()))
    return LieDecomposition(Lagrangian(ctx, simplify(work.density + boundary.density)), work, boundary, current)


def direct_lie_lagrangian(lag: Lagrangian, v: ProjectableVectorField) -> Lagrangian:
    """h of the classical Lie derivative of lambda along the prolonged field (naive basis)."""
    ctx = lag.ctx
    flow = prolong_field(v, lag.order)
    out = horizontalize(lie_derivative(flow, to_naive(lag.form)))
    return Lagrangian.from_form(out)


def variational_lie_source(eta: SourceForm, v: ProjectableVectorField) -> SourceLieDecomposition:
    ctx = eta.ctx
    _check_ctx(ctx, v.ctx)
    generator = _generator(v)
    euler_part = euler_lagrange(Lagrangian(ctx, _work(ctx, generator, eta))).simplified()
    helm_part = helmholtz(eta).apply(generator).simplified()
    return SourceLieDecomposition((euler_part + helm_part).simplified(), euler_part, helm_part)


def direct_lie_source(eta: SourceForm, v: ProjectableVectorField) -> SourceForm:
    """Cartan Lie derivative of eta along the prolonged field, reduced to its source-form class."""
    flow = prolong_field(v, eta.order + 2)
    return interior_euler(lie_derivative(flow, eta.form).part(1, eta.ctx.n)).simplified()


def noether_current(lag: Lagrangian, v: ProjectableVectorField) -> Current:
    return canonical_current(lag, v)


def is_symmetry(lag: Lagrangian, v: ProjectableVectorField) -> bool:
    return is_zero(variational_lie_lagrangian(lag, v).total.density)


def is_generalized_symmetry(lag: Lagrangian, v: ProjectableVectorField) -> bool:
    return variational_lie_source(euler_lagrange(lag), v).total.is_zero()


def improved_current(lag: Lagrangian, v: ProjectableVectorField, center=None, beta: MixedForm | None = None) -> Current:
    """eps - beta with d_H beta the variational Lie derivative of lambda.

    beta defaults to the fiber-scaling homotopy about ``center``; a supplied
    primitive is checked and tags the result as generalized.
    """
    if not is_generalized_symmetry(lag, v):
        raise NotGeneralizedSymmetryError("field is not a generalized symmetry of the Lagrangian")
    dec = variational_lie_lagrangian(lag, v)
    ctx = lag.ctx
    kind = CurrentKind.IMPROVED
    if beta is None:
        beta = horizontal_homotopy(dec.total, center)
    else:
        kind = CurrentKind.GENERALIZED
        div = sum(total_derivative(c, lam, ctx) for lam, c in enumerate(minor_components(beta)))
        if not is_zero(div - dec.total.density):
            raise JetError("supplied beta is not a primitive of the variational Lie derivative")
    comps = [a - b for a, b in zip(dec.current.components, minor_components(beta))]
    return Current.from_components(ctx, comps, kind)


@dataclass(frozen=True)
class SymmetryReport:
    lie_derivative: Lagrangian
    is_symmetry: bool
    is_generalized_symmetry: bool
    current: Current | None
    canonical: Current
    obstruction_note: str = ""

    @property
    def conserved(self) -> bool:
        return self.current is not None


def symmetry_report(lag: Lagrangian, v: ProjectableVectorField, center=None) -> SymmetryReport:
    dec = variational_lie_lagrangian(lag, v)
    exact = is_zero(dec.total.density)
    generalized = exact or is_generalized_symmetry(lag, v)
    if exact:
        return SymmetryReport(dec.total, True, True, dec.current, dec.current, "")
    if generalized:
        try:
            cur = improved_current(lag, v, center)
        except JetError as exc:
            return SymmetryReport(dec.total, False, True, None, dec.current, f"no primitive found: {exc}")
        note = "canonical current not conserved; improved current subtracts a primitive of the Lie derivative"
        return SymmetryReport(dec.total, False, True, cur, dec.current, note)
    return SymmetryReport(dec.total, False, False, None, dec.current, "Lie derivative of the source form is nonzero")


# ---------------------------------------------------------------------------
# numerics


def _mp_array(values, dps):
    return np.array([mpmath.mpf(v) for v in values], dtype=object)


def _top_derivative_solver(eta: SourceForm):
    """Solve eta = 0 for the highest time derivatives, which must enter affinely."""
    ctx = eta.ctx
    if ctx.n != 1:
        raise JetError("critical sections are integrated only over a one-dimensional base")
    k = eta.order
    if k == 0:
        raise JetError("source form has no derivative terms to integrate")
    tops = [ctx.jet(i, (k,)) for i in range(ctx.m)]
    try:
        A, b = sp.linear_eq_to_matrix([sp.expand(c) for c in eta.components], tops)
    except ValueError:  # sympy's NonlinearError
        raise JetError("equations are not affine in the highest derivatives") from None
    if any(ctx.order_of(e) >= k for e in list(A) + list(b)) or A.has(*tops):
        raise JetError("equations are not affine in the highest derivatives")
    if is_zero(A.det()):
        raise JetError("equations are degenerate in the highest derivatives")
    sol = A.LUsolve(b)
    state = [ctx.jet(i, (a,)) for a in range(k) for i in range(ctx.m)]
    return k, state, [simplify(s) for s in sol]


def integrate_critical(
    eta: SourceForm,
    initial: Sequence[float],
    span: tuple[float, float],
    step: float,
    dps: int | None = None,
) -> Section:
    """Classical RK4 for eta = 0 with fixed step; ``initial`` lists y, y_t, ... per order.

    With ``dps`` set the integration runs in mpmath at that precision and the
    samples are object arrays, so round-off stays below the truncation error.
    """
    ctx = eta.ctx
    k, state_syms, accel = _top_derivative_solver(eta)
    if len(initial) != len(state_syms):
        raise JetError(f"expected {len(state_syms)} initial values (orders 0..{k - 1} per fiber)")
    t = ctx.base(0)
    args = [t, *state_syms]
    m = ctx.m
    steps = int(round((span[1] - span[0]) / step))
    if steps <= 0 or abs(steps * step - (span[1] - span[0])) > 1e-9 * max(1.0, abs(span[1])):
        raise JetError("span must be a positive whole number of steps")
    if dps is None:
        fs = [lambdify(a, args) for a in accel]
        y = np.asarray(initial, dtype=float)
        h = float(step)
        t0 = float(span[0])
        def rhs(tt, s):
            return np.concatenate([s[m:], [float(f(tt, *s)) for f in fs]])
        out = np.empty((steps + 1, len(y)))
        times = t0 + h * np.arange(steps + 1)
    else:
        with mpmath.workdps(dps):
            fs = [lambdify(a, args, backend="mpmath") for a in accel]
            y = _mp_array([mpmath.mpmathify(str(v)) for v in initial], dps)
            h = mpmath.mpmathify(str(step))
            t0 = mpmath.mpmathify(str(span[0]))
        def rhs(tt, s):
            return np.concatenate([s[m:], np.array([f(tt, *s) for f in fs], dtype=object)])
        out = np.empty((steps + 1, len(y)), dtype=object)
        times = np.array([t0 + h * j for j in range(steps + 1)], dtype=object)
    ctxmgr = mpmath.workdps(dps) if dps else contextlib.nullcontext()
    with ctxmgr:
        out[0] = y
        for j in range(steps):
            tt = times[j]
            k1 = rhs(tt, y)
            k2 = rhs(tt + h / 2, y + h / 2 * k1)
            k3 = rhs(tt + h / 2, y + h / 2 * k2)
            k4 = rhs(tt + h, y + h * k3)
            y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            out[j + 1] = y
    return Section.sampled(ctx, (times,), out[:, :m].T.copy(), dps=dps)


@dataclass
class ConservationReport:
    criticality_residual: float
    conservation_residual: float
    relative_drift: float | None
    is_critical: bool
    values: np.ndarray = field(repr=False)

    @property
    def conserved_value(self) -> float | None:
        if self.values.ndim != 1:
            return None
        return float(np.mean(self.values.astype(float)))


def _max_abs(arr) -> float:
    if arr.dtype == object:
        return float(max((abs(v) for v in arr.ravel()), default=0))
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def check_conservation(
    current: Current,
    sigma: Section,
    eta: SourceForm,
    grid=None,
    tol: float = CRITICALITY_TOL,
) -> ConservationReport:
    """Criticality and conservation residuals of a current along a section.

    The conservation residual is max |sum_lam D_lam eps^lam| pulled back; for
    n = 1 the relative drift (max eps - min eps) / max |eps| is also reported.
    """
    ctx = current.ctx
    _check_ctx(ctx, eta.ctx)
    if ctx.n not in (1, 2):
        raise JetError("numerical verification supports one- or two-dimensional bases")
    div = current.divergence()
    order = max(eta.order, ctx.order_of(div), current.form.jet_order(), 1)
    if sigma.is_closed and grid is None:
        raise JetError("closed-form sections need an evaluation grid")
    if not sigma.is_closed and grid is not None:
        raise JetError("sampled sections carry their own grid")
    with mpmath.workdps(sigma.dps) if sigma.dps else contextlib.nullcontext():
        jv = prolong_section(sigma, order, grid)
        crit = max((_max_abs(jv.evaluate(c)) for c in eta.components), default=0.0)
        cons = _max_abs(jv.evaluate(div))
        values = jv.evaluate(current.components[0]) if ctx.n == 1 else np.stack([jv.evaluate(c) for c in current.components])
        drift = None
        if ctx.n == 1:
            spread = values.max() - values.min()
            scale = max(abs(values.max()), abs(values.min()))
            drift = float(spread / scale) if scale != 0 else float(spread)
    return ConservationReport(crit, cons, drift, crit < tol, values)


@dataclass(frozen=True)
class CycleX:
    """A closed curve s -> x(s) in a two-dimensional base."""

    param: sp.Symbol
    x: tuple
    lower: float
    upper: float


@dataclass
class CurrentClassReport:
    charges: list
    trivial: bool


def classify_current(current: Current, solutions: Sequence, grid=None, cycles: Sequence[CycleX] = (), tol: float = 1e-9) -> CurrentClassReport:
    """Topological charge of a conserved current on critical sections.

    n = 1: the conserved value of the pulled-back current, one per solution;
    solutions are (Section, SourceForm) pairs and must be critical.
    n = 2: period integrals over declared closed curves of the base, for
    closed-form solutions.
    """
    ctx = current.ctx
    charges = []
    for sigma, eta in solutions:
        if ctx.n == 1:
            rep = check_conservation(current, sigma, eta, grid)
            if not rep.is_critical:
                raise JetError("section is not critical")
            charges.append(rep.conserved_value)
        elif ctx.n == 2:
            if not sigma.is_closed:
                raise JetError("period integrals need closed-form sections")
            per = []
            for cyc in cycles:
                per.append(_period(current, sigma, eta, cyc))
            charges.append(per)
        else:
            raise JetError("current classification supports n = 1 or n = 2")
    flat = [abs(c) for ch in charges for c in (ch if isinstance(ch, list) else [ch])]
    return CurrentClassReport(charges, all(c < tol for c in flat))


def _pullback(expr, sigma: Section):
    ctx = sigma.ctx
    xs = ctx.base_symbols
    mapping = {}
    for sym, c in ctx.jet_coordinates(expr).items():
        d = sigma.exprs[c.index]
        for lam, count in enumerate(c.alpha):
            d = sp.diff(d, xs[lam], count)
        mapping[sym] = d
    return sp.sympify(expr).xreplace(mapping)


def _period(current: Current, sigma: Section, eta: SourceForm, cyc: CycleX) -> float:
    ctx = current.ctx
    for c in eta.components:
        if not is_zero(_pullback(c, sigma)):
            raise JetError("section is not critical")
    e1, e2 = (_pullback(c, sigma) for c in current.components)
    x1, x2 = ctx.base_symbols
    sub = {x1: cyc.x[0], x2: cyc.x[1]}
    # eps^1 dx2 - eps^2 dx1 along the curve
    integrand = e1.xreplace(sub) * sp.diff(cyc.x[1], cyc.param) - e2.xreplace(sub) * sp.diff(cyc.x[0], cyc.param)
    f = lambdify(integrand, [cyc.param])
    val, _ = sp_integrate.quad(lambda s: float(f(s)), cyc.lower, cyc.upper, epsabs=1e-12, epsrel=1e-10)
    return val
