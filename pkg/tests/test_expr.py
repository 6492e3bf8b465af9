import math

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from jetvar.expr import (
    DomainError,
    JetContext,
    MissingCoordinateError,
    MultiIndex,
    OrderError,
    ParseError,
    ZeroVerdict,
    evaluate,
    is_zero,
    multi_indices,
    multi_indices_upto,
    parse,
    partial,
    simplify,
    to_text,
    zero_test,
    zero_test_settings,
)

CTX = JetContext.create(n=2, m=2, r=2)
ATOMS = [CTX.base(0), CTX.base(1)] + [CTX.jet(i, a) for a in multi_indices_upto(2, 2) for i in range(2)]


def _exprs():
    leaves = st.one_of(
        st.sampled_from(ATOMS),
        st.integers(-4, 4).map(sp.Integer),
        st.fractions(min_value=-3, max_value=3, max_denominator=5).map(lambda f: sp.Rational(f.numerator, f.denominator)),
    )

    def extend(children):
        return st.one_of(
            st.tuples(children, children).map(lambda p: p[0] + p[1]),
            st.tuples(children, children).map(lambda p: p[0] * p[1]),
            st.tuples(children, children).map(lambda p: p[0] - p[1]),
            st.tuples(children, st.integers(0, 3)).map(lambda p: p[0] ** p[1]),
            children.map(sp.sin),
            children.map(sp.exp),
        )

    return st.recursive(leaves, extend, max_leaves=8)


EXPRS = _exprs()


class TestMultiIndex:
    def test_arithmetic(self):
        a, b = MultiIndex((2, 1)), MultiIndex((1, 0))
        assert a + b == (3, 1) and a - b == (1, 1)
        assert a.order == 3 and a.dominates(b) and not b.dominates(a)
        assert a.binomial(b) == 2

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            MultiIndex((1, -1))

    @given(st.integers(1, 3), st.integers(0, 4))
    def test_counts(self, n, k):
        assert len(multi_indices(n, k)) == math.comb(n + k - 1, k)
        assert all(a.order == k for a in multi_indices(n, k))


class TestContext:
    def test_names(self):
        assert CTX.jet_name(0, (1, 1)) == "y1_x1x2"
        assert CTX.jet_name(1, (0, 2)) == "y2_x2x2"
        c = CTX.decode_name("y2_x1x1")
        assert (c.index, tuple(c.alpha)) == (1, (2, 0))

    def test_prefix_free(self):
        with pytest.raises(ValueError):
            JetContext(("x", "xx"), ("y",), 1)

    def test_order_of(self):
        assert CTX.order_of(parse("x1*y1 + y2_x1x2", CTX)) == 2


class TestParser:
    def test_precedence(self):
        t = JetContext.create(1, 1, 2)
        assert parse("-y^2", t) == -t.jet(0) ** 2
        assert parse("2^3^2", t) == 512
        assert parse("1/2*y_t^2 - 1/2*y^2", t) == t.jet(0, (1,)) ** 2 / 2 - t.jet(0) ** 2 / 2

    def test_functions_and_pi(self):
        t = JetContext.create(1, 1, 1)
        assert parse("sin(pi*t) + exp(y)", t) == sp.sin(sp.pi * t.base(0)) + sp.exp(t.jet(0))

    @pytest.mark.parametrize(
        "text, exc",
        [
            ("y_tt", OrderError),
            ("z + 1", ParseError),
            ("(y + 1", ParseError),
            ("y +", ParseError),
            ("tan(y)", ParseError),
            ("y $ 2", ParseError),
        ],
    )
    def test_errors(self, text, exc):
        with pytest.raises(exc):
            parse(text, JetContext.create(1, 1, 1))

    def test_error_position(self):
        with pytest.raises(ParseError) as info:
            parse("y + * 2", JetContext.create(1, 1, 1))
        assert info.value.position is not None

    def test_extra_names(self):
        t = JetContext.create(1, 1, 1)
        g = sp.Rational(1, 2)
        assert parse("g*y", t, {"g": g}) == t.jet(0) / 2

    @given(EXPRS)
    def test_round_trip(self, e):
        assert is_zero(parse(to_text(e, CTX), CTX) - e)


class TestSimplify:
    @given(EXPRS)
    def test_idempotent(self, e):
        s = simplify(e)
        assert simplify(s) == s

    @given(EXPRS, EXPRS)
    def test_canonical_on_polynomials(self, a, b):
        if a.atoms(sp.sin, sp.exp) or b.atoms(sp.sin, sp.exp):
            return
        assert simplify(sp.expand((a + b) ** 2)) == simplify(a**2 + 2 * a * b + b**2)

    def test_rational_cancellation(self):
        u, w = CTX.jet(0), CTX.jet(1)
        assert simplify((u**2 - w**2) / (u - w)) == u + w
        assert simplify(sp.sin(u) / sp.sin(u)) == 1


class TestZero:
    def test_exact_and_randomized(self):
        u = CTX.jet(0)
        assert zero_test(u - u) is ZeroVerdict.ZERO
        assert zero_test(u + 1) is ZeroVerdict.NONZERO
        assert is_zero(sp.sin(u) ** 2 + sp.cos(u) ** 2 - 1)
        assert not is_zero(sp.sin(u) ** 2 - sp.cos(u) ** 2)

    def test_settings_scope(self):
        u = CTX.jet(0)
        e = sp.exp(u) * 1e-7
        with zero_test_settings(points=4, tol=1e-3):
            assert is_zero(sp.sin(u) * 0 + e - sp.exp(u) * 0)
        assert not is_zero(e)


class TestPartialAndEval:
    @given(EXPRS, st.sampled_from(ATOMS), st.sampled_from(ATOMS))
    def test_partials_commute(self, e, a, b):
        assert is_zero(partial(partial(e, a), b) - partial(partial(e, b), a))

    @given(EXPRS)
    def test_eval_matches_sympy(self, e):
        point = {s: 0.25 + 0.1 * k for k, s in enumerate(ATOMS)}
        try:
            mine = evaluate(e, point)
        except (DomainError, OverflowError):
            return
        ref = complex(sp.N(e.xreplace({s: sp.Float(v) for s, v in point.items()}), 30))
        assert mine == pytest.approx(ref.real, rel=1e-9, abs=1e-9)

    def test_eval_errors(self):
        t = JetContext.create(1, 1, 1)
        with pytest.raises(MissingCoordinateError):
            evaluate(parse("y + t", t), {"t": 1.0})
        with pytest.raises(DomainError):
            evaluate(parse("log(y)", t), {"y": -1.0})
        with pytest.raises(DomainError):
            evaluate(parse("1/y", t), {"y": 0.0})

    def test_printing(self):
        t = JetContext.create(1, 1, 2)
        assert to_text(parse("1/2*y_t^2 - 1/2*y^2", t), t) in {"1/2*y_t^2 - 1/2*y^2", "-1/2*y^2 + 1/2*y_t^2"}
