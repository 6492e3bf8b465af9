import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from jetvar import sampling
from jetvar.expr import JetContext, JetError, multi_indices_upto
from jetvar.forms import (
    CONTACT,
    NAIVE,
    MixedForm,
    contract,
    d_H,
    d_V,
    exterior_d,
    fiber_factor,
    horizontal_factor,
    horizontalize,
    lie_derivative,
    to_contact,
    to_naive,
)
from jetvar.jet import prolong_field

seeds = st.integers(0, 10_000)


def random_form(g, ctx, degree, basis=CONTACT, terms=3):
    factors = [horizontal_factor(lam) for lam in range(ctx.n)]
    factors += [fiber_factor(i, a) for a in multi_indices_upto(ctx.n, 1) for i in range(ctx.m)]
    variables = sampling.jet_variables(ctx, 1)
    items = []
    for _ in range(terms):
        picks = g.choice(len(factors), size=degree, replace=False) if degree else []
        coeff = sampling.random_polynomial(g, variables, 2, max_factors=2)
        items.append((tuple(factors[int(k)] for k in picks), coeff))
    return MixedForm.build(ctx, items, basis)


def _ctx(g):
    return JetContext.create(int(g.integers(1, 3)), int(g.integers(1, 3)), 4)


@given(seeds, st.integers(0, 2))
def test_differentials_square_to_zero(seed, degree):
    g = sampling.rng(seed)
    ctx = _ctx(g)
    w = random_form(g, ctx, degree)
    assert d_H(d_H(w)).is_zero()
    assert d_V(d_V(w)).is_zero()
    assert (d_H(d_V(w)) + d_V(d_H(w))).is_zero()
    assert exterior_d(exterior_d(w)).is_zero()
    naive = to_naive(w)
    assert exterior_d(exterior_d(naive)).is_zero()


@given(seeds, st.integers(0, 2))
def test_bases_agree(seed, degree):
    g = sampling.rng(seed)
    ctx = _ctx(g)
    w = random_form(g, ctx, degree)
    assert to_contact(to_naive(w)).equals(w)
    assert to_naive(exterior_d(w)).equals(exterior_d(to_naive(w)))


@given(seeds, st.integers(0, 1))
def test_horizontalization_intertwines(seed, degree):
    g = sampling.rng(seed)
    ctx = JetContext.create(2, int(g.integers(1, 3)), 4)
    w = random_form(g, ctx, degree, basis=NAIVE)
    assert horizontalize(exterior_d(w)).equals(d_H(horizontalize(w)))


@given(seeds, st.integers(0, 2), st.integers(0, 2))
def test_contraction_is_graded_derivation(seed, p, q):
    g = sampling.rng(seed)
    ctx = _ctx(g)
    v = prolong_field(sampling.random_projectable_field(g, ctx), 2)
    a, b = random_form(g, ctx, p, terms=2), random_form(g, ctx, q, terms=2)
    lhs = contract(v, a.wedge(b))
    rhs = contract(v, a).wedge(b) + a.wedge(contract(v, b)).scale((-1) ** p)
    assert lhs.equals(rhs)


@given(seeds)
def test_prolonged_fields_preserve_contact_forms(seed):
    g = sampling.rng(seed)
    ctx = _ctx(g)
    v = prolong_field(sampling.random_projectable_field(g, ctx), 3)
    for i in range(ctx.m):
        for alpha in multi_indices_upto(ctx.n, 1):
            lie = lie_derivative(v, MixedForm.theta(ctx, i, alpha))
            assert horizontalize(lie).is_zero()


@given(seeds, st.integers(0, 1))
def test_lie_derivative_is_basis_independent(seed, degree):
    g = sampling.rng(seed)
    ctx = _ctx(g)
    v = prolong_field(sampling.random_projectable_field(g, ctx), 3)
    w = random_form(g, ctx, degree)
    assert to_naive(lie_derivative(v, w)).equals(lie_derivative(v, to_naive(w)))


class TestExamples:
    ctx = JetContext.create(1, 1, 3)

    def test_horizontal_part_of_dy(self):
        dy = MixedForm.dy(self.ctx, 0)
        assert horizontalize(dy).equals(MixedForm.dx(self.ctx, 0, CONTACT).scale(self.ctx.jet(0, (1,))))

    def test_d_h_of_theta(self):
        c = self.ctx
        expected = MixedForm.theta(c, 0, (1,)).wedge(MixedForm.dx(c, 0)).scale(-1)
        assert d_H(MixedForm.theta(c, 0)).equals(expected)

    def test_d_v_of_lagrangian(self):
        c = self.ctx
        yt = c.jet(0, (1,))
        lam = MixedForm.volume(c, yt**2 / 2)
        assert d_V(lam).equals(MixedForm.theta(c, 0, (1,), coeff=yt).wedge(MixedForm.dx(c, 0)))

    def test_bidegree_and_parts(self):
        c = self.ctx
        w = MixedForm.theta(c, 0).wedge(MixedForm.dx(c, 0)) + MixedForm.dx(c, 0)
        assert w.bidegrees == {(1, 1), (0, 1)}
        with pytest.raises(JetError):
            _ = w.bidegree
        assert w.part(0, 1).bidegree == (0, 1)

    def test_mixing_bases_rejected(self):
        c = self.ctx
        with pytest.raises(JetError):
            MixedForm.theta(c, 0) + MixedForm.dy(c, 0)
        with pytest.raises(JetError):
            d_H(MixedForm.dy(c, 0))

    def test_wedge_is_graded(self):
        c = JetContext.create(2, 1, 2)
        a, b = MixedForm.dx(c, 0), MixedForm.theta(c, 0)
        assert a.wedge(b).equals(b.wedge(a).scale(-1))
        assert a.wedge(a).is_zero()

    def test_horizontalize_rejects_high_degree(self):
        c = self.ctx
        with pytest.raises(JetError):
            horizontalize(MixedForm.dy(c, 0).wedge(MixedForm.dy(c, 0, (1,))))

    def test_contract_with_short_prolongation(self):
        c = self.ctx
        v = prolong_field(sampling.random_projectable_field(sampling.rng(0), c), 1)
        with pytest.raises(JetError):
            contract(v, MixedForm.theta(c, 0, (2,)))


def test_scalar_coefficients_are_expanded():
    ctx = JetContext.create(1, 1, 1)
    y = ctx.jet(0)
    f = MixedForm.scalar(ctx, (y + 1) ** 2)
    assert f.coefficient(()) == sp.expand((y + 1) ** 2)
