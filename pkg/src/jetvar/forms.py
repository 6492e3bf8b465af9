"""Differential forms on jet spaces in the contact/horizontal bigrading.

A form is a sparse map from basis monomials to coefficient expressions.  A
monomial is a sorted tuple of one-form factors ``(kind, index, alpha)``:
kind 0 is a fiber factor and kind 1 the horizontal ``d^lam`` (alpha empty).
Fiber factors mean the contact forms theta^i_alpha in the ``"contact"`` basis
and the coordinate differentials d^i_alpha in the ``"naive"`` basis.  Fiber
factors sort before horizontal ones, so every monomial has one canonical
ordering and signs are normalized to it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import sympy as sp

from .expr import JetContext, JetError, MultiIndex, is_zero, simplify
from .jet import ProlongedField, total_derivative

FIBER, HORIZONTAL = 0, 1
CONTACT, NAIVE = "contact", "naive"


def _sort_with_sign(factors):
    """Sort factors, returning (sign, sorted) or (0, None) on a repeated factor."""
    if len(set(factors)) != len(factors):
        return 0, None
    items = list(factors)
    sign = 1
    for i in range(len(items)):
        for j in range(len(items) - 1 - i):
            if items[j] > items[j + 1]:
                items[j], items[j + 1] = items[j + 1], items[j]
                sign = -sign
    return sign, tuple(items)


def horizontal_factor(lam: int):
    return (HORIZONTAL, lam, ())


def fiber_factor(i: int, alpha):
    return (FIBER, i, MultiIndex(alpha))


@dataclass(frozen=True)
class MixedForm:
    ctx: JetContext
    terms: Mapping = field(default_factory=dict, hash=False)
    basis: str = CONTACT

    # -- construction ------------------------------------------------------

    @classmethod
    def build(cls, ctx, items, basis=CONTACT) -> "MixedForm":
        """Sum coefficient * wedge(factors) over (factors, coefficient) items."""
        terms: dict = {}
        for factors, coeff in items:
            sign, key = _sort_with_sign(tuple(factors))
            if sign == 0:
                continue
            terms[key] = terms.get(key, 0) + sign * sp.sympify(coeff)
        return cls(ctx, _clean(terms), basis)

    @classmethod
    def scalar(cls, ctx, f, basis=CONTACT):
        return cls.build(ctx, [((), f)], basis)

    @classmethod
    def dx(cls, ctx, lam, basis=CONTACT):
        return cls.build(ctx, [((horizontal_factor(lam),), 1)], basis)

    @classmethod
    def theta(cls, ctx, i, alpha=None, coeff=1):
        alpha = ctx.zero_index() if alpha is None else alpha
        return cls.build(ctx, [((fiber_factor(i, alpha),), coeff)], CONTACT)

    @classmethod
    def dy(cls, ctx, i, alpha=None, coeff=1):
        alpha = ctx.zero_index() if alpha is None else alpha
        return cls.build(ctx, [((fiber_factor(i, alpha),), coeff)], NAIVE)

    @classmethod
    def volume(cls, ctx, coeff=1, basis=CONTACT):
        """coeff * d^1 ^ ... ^ d^n."""
        return cls.build(ctx, [(tuple(horizontal_factor(k) for k in range(ctx.n)), coeff)], basis)

    @classmethod
    def volume_minor(cls, ctx, lam, coeff=1, basis=CONTACT):
        """coeff * (d_lam contracted into the volume form)."""
        rest = tuple(horizontal_factor(k) for k in range(ctx.n) if k != lam)
        return cls.build(ctx, [(rest, (-1) ** lam * sp.sympify(coeff))], basis)

    # -- algebra -----------------------------------------------------------

    def _same(self, other):
        if self.basis != other.basis:
            raise JetError(f"cannot combine {self.basis} and {other.basis} basis forms")

    def __add__(self, other):
        self._same(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms.get(k, 0) + v
        return MixedForm(self.ctx, _clean(terms), self.basis)

    def __neg__(self):
        return MixedForm(self.ctx, {k: -v for k, v in self.terms.items()}, self.basis)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, f):
        return MixedForm(self.ctx, _clean({k: f * v for k, v in self.terms.items()}), self.basis)

    def wedge(self, other):
        self._same(other)
        items = [(a + b, ca * cb) for a, ca in self.terms.items() for b, cb in other.terms.items()]
        return MixedForm.build(self.ctx, items, self.basis)

    __xor__ = wedge

    def coefficient(self, factors) -> sp.Expr:
        sign, key = _sort_with_sign(tuple(factors))
        if sign == 0:
            return sp.S.Zero
        return sign * self.terms.get(key, sp.S.Zero)

    @staticmethod
    def bidegree_of(key):
        q = sum(1 for f in key if f[0] == FIBER)
        return q, len(key) - q

    @property
    def bidegrees(self) -> set:
        return {self.bidegree_of(k) for k in self.terms}

    @property
    def bidegree(self):
        degs = self.bidegrees
        if len(degs) > 1:
            raise JetError(f"form is not homogeneous: bidegrees {sorted(degs)}")
        return next(iter(degs)) if degs else None

    def part(self, q: int, p: int) -> "MixedForm":
        return MixedForm(self.ctx, {k: v for k, v in self.terms.items() if self.bidegree_of(k) == (q, p)}, self.basis)

    def simplified(self) -> "MixedForm":
        terms = {k: simplify(v) for k, v in self.terms.items()}
        return MixedForm(self.ctx, {k: v for k, v in terms.items() if v != 0}, self.basis)

    def is_zero(self) -> bool:
        return all(is_zero(v) for v in self.terms.values())

    def equals(self, other) -> bool:
        return (self - other).is_zero()

    def jet_order(self) -> int:
        order = 0
        for key, v in self.terms.items():
            order = max(order, self.ctx.order_of(v))
            for f in key:
                if f[0] == FIBER:
                    order = max(order, f[2].order)
        return order

    def __repr__(self):
        if not self.terms:
            return "MixedForm(0)"
        parts = []
        for key, v in sorted(self.terms.items(), key=lambda kv: kv[0]):
            parts.append(f"({v})" + "".join(" ^ " + self._factor_name(f) for f in key))
        return " + ".join(parts)

    def _factor_name(self, f):
        if f[0] == HORIZONTAL:
            return f"d{self.ctx.base_names[f[1]]}"
        head = "th" if self.basis == CONTACT else "d"
        return f"{head}[{self.ctx.jet_name(f[1], f[2])}]"


def _clean(terms):
    out = {}
    for k, v in terms.items():
        v = sp.expand(v)
        if v != 0:
            out[k] = v
    return out


def wedge(a: MixedForm, b: MixedForm) -> MixedForm:
    return a.wedge(b)


def _derivation(omega: MixedForm, on_coefficient, on_factor) -> MixedForm:
    """Apply a degree +1 graded derivation defined on coefficients and basis factors.

    ``on_coefficient(f)`` returns a list of (factor, coefficient) one-form pieces,
    ``on_factor(phi)`` returns a list of (factors tuple, coefficient) two-form pieces.
    """
    items = []
    for key, coeff in omega.terms.items():
        for factor, c in on_coefficient(coeff):
            items.append(((factor,) + key, c))
        for j, phi in enumerate(key):
            for pieces, c in on_factor(phi):
                items.append((key[:j] + pieces + key[j + 1 :], (-1) ** j * coeff * c))
    return MixedForm.build(omega.ctx, items, omega.basis)


def _need(omega, basis):
    if omega.basis != basis:
        raise JetError(f"operation needs a {basis} basis form, got {omega.basis}")


def d_H(omega: MixedForm) -> MixedForm:
    """Horizontal differential: D_lam on coefficients, d_H theta^i_a = -theta^i_{a+lam} ^ d^lam."""
    _need(omega, CONTACT)
    ctx = omega.ctx

    def coeff(f):
        return [(horizontal_factor(lam), total_derivative(f, lam, ctx)) for lam in range(ctx.n)]

    def factor(phi):
        if phi[0] == HORIZONTAL:
            return []
        _, i, alpha = phi
        return [((fiber_factor(i, alpha.raised(lam)), horizontal_factor(lam)), -1) for lam in range(ctx.n)]

    return _derivation(omega, coeff, factor)


def _vertical_pieces(ctx, f):
    return [(fiber_factor(c.index, c.alpha), sp.diff(f, s)) for s, c in ctx.jet_coordinates(f).items()]


def d_V(omega: MixedForm) -> MixedForm:
    """Vertical differential: de/dy^i_a theta^i_a on coefficients, zero on the basis."""
    _need(omega, CONTACT)
    return _derivation(omega, lambda f: _vertical_pieces(omega.ctx, f), lambda phi: [])


def exterior_d(omega: MixedForm) -> MixedForm:
    """d = d_H + d_V (contact basis) or the coordinate exterior derivative (naive basis)."""
    if omega.basis == CONTACT:
        return d_H(omega) + d_V(omega)
    ctx = omega.ctx

    def coeff(f):
        pieces = [(horizontal_factor(lam), sp.diff(f, ctx.base(lam))) for lam in range(ctx.n)]
        return pieces + _vertical_pieces(ctx, f)

    return _derivation(omega, coeff, lambda phi: [])


def to_naive(omega: MixedForm) -> MixedForm:
    """Expand theta^i_a = d^i_a - y^i_{a+lam} d^lam."""
    if omega.basis == NAIVE:
        return omega
    return _rebase(omega, NAIVE, -1)


def to_contact(omega: MixedForm) -> MixedForm:
    """Rewrite d^i_a = theta^i_a + y^i_{a+lam} d^lam."""
    if omega.basis == CONTACT:
        return omega
    return _rebase(omega, CONTACT, +1)


def _rebase(omega, basis, sign):
    ctx = omega.ctx
    out = MixedForm(ctx, {}, basis)
    for key, coeff in omega.terms.items():
        acc = MixedForm.scalar(ctx, coeff, basis)
        for f in key:
            if f[0] == HORIZONTAL:
                piece = MixedForm.build(ctx, [((f,), 1)], basis)
            else:
                _, i, alpha = f
                items = [((f,), 1)] + [
                    ((horizontal_factor(lam),), sign * ctx.jet(i, alpha.raised(lam))) for lam in range(ctx.n)
                ]
                piece = MixedForm.build(ctx, items, basis)
            acc = acc.wedge(piece)
        out = out + acc
    return out


def horizontalize(omega: MixedForm) -> MixedForm:
    """h: the purely horizontal part after passing to the contact basis."""
    degrees = {sum(MixedForm.bidegree_of(k)) for k in omega.terms}
    if any(p > omega.ctx.n for p in degrees):
        raise JetError(f"cannot horizontalize a form of degree > n = {omega.ctx.n}")
    contact = to_contact(omega)
    return MixedForm(contact.ctx, {k: v for k, v in contact.terms.items() if all(f[0] == HORIZONTAL for f in k)})


def _evaluate_factor(phi, v: ProlongedField, basis):
    if phi[0] == HORIZONTAL:
        return v.xi[phi[1]]
    _, i, alpha = phi
    if alpha.order > v.order:
        raise JetError(f"field prolonged to order {v.order} cannot be contracted with a factor of order {alpha.order}")
    comp = v.component(i, alpha)
    if basis == NAIVE:
        return comp
    ctx = v.ctx
    return comp - sum(ctx.jet(i, alpha.raised(lam)) * v.xi[lam] for lam in range(ctx.n))


def contract(v: ProlongedField, omega: MixedForm) -> MixedForm:
    """Graded interior product v _| omega."""
    items = []
    for key, coeff in omega.terms.items():
        for j, phi in enumerate(key):
            value = _evaluate_factor(phi, v, omega.basis)
            if value != 0:
                items.append((key[:j] + key[j + 1 :], (-1) ** j * coeff * value))
    return MixedForm.build(omega.ctx, items, omega.basis)


def lie_derivative(v: ProlongedField, omega: MixedForm) -> MixedForm:
    """Cartan's formula v _| d omega + d(v _| omega)."""
    return contract(v, exterior_d(omega)) + exterior_d(contract(v, omega))
