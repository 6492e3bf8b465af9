import itertools

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from jetvar import cech, sampling
from jetvar.cech import (
    Chart,
    ClassLabel,
    Cochain,
    Cover,
    CoverError,
    Kind,
    OverlapCycle,
    Verdict,
    coboundary,
    cohomology_constant,
    nerve_cycles,
    refine,
    solve_constant_coboundary,
)
from jetvar.expr import JetContext, parse, simplify
from jetvar.varseq import Lagrangian, euler_lagrange

seeds = st.integers(0, 10_000)
CTX = JetContext.create(1, 1, 1)
Y, YT, T = CTX.jet(0), CTX.jet(0, (1,)), CTX.base(0)


def complex_from(g, size):
    tris = [c for c in itertools.combinations(range(size), 3) if g.random() < 0.4]
    edges = {e for tri in tris for e in itertools.combinations(tri, 2)}
    edges |= {e for e in itertools.combinations(range(size), 2) if g.random() < 0.4}
    names = [f"U{k}" for k in range(size)]
    simplices = [tuple(names[k] for k in s) for s in list(edges) + tris]
    return Cover(CTX, [Chart(n) for n in names], {(names[a], names[b]): (Y,) for a, b in edges}, simplices)


def affine_cover():
    transitions = {("A", "B"): (Y + T,), ("B", "C"): (2 * Y - 1,), ("A", "C"): (2 * Y + 2 * T - 1,)}
    return Cover(CTX, [Chart("A"), Chart("B"), Chart("C")], transitions, [("A", "B", "C")])


@given(seeds)
def test_euler_characteristic(seed):
    g = sampling.rng(seed)
    cover = complex_from(g, int(g.integers(2, 6)))
    chi_cells = sum((-1) ** q * len(cover.simplices(q)) for q in range(cover.dimension + 1))
    chi_homology = sum((-1) ** q * cohomology_constant(cover, q).dimension for q in range(cover.dimension + 1))
    assert chi_cells == chi_homology
    assert len(nerve_cycles(cover)) == cohomology_constant(cover, 1).dimension


@given(seeds)
def test_coboundaries_are_solved(seed):
    g = sampling.rng(seed)
    cover = complex_from(g, int(g.integers(3, 6)))
    for q in (0, 1):
        if not cover.simplices(q + 1):
            continue
        k = Cochain(cover, q, Kind.CONSTANT, {s: int(g.integers(-4, 5)) for s in cover.simplices(q)})
        c = coboundary(k)
        back = solve_constant_coboundary(c)
        assert back is not None and (coboundary(back) - c).is_zero()


@given(seeds)
def test_restriction_is_natural_for_euler_lagrange(seed):
    """Pulling a Lagrangian through a transition commutes with E."""
    g = sampling.rng(seed)
    cover = affine_cover()
    lam = sampling.random_lagrangian(g, CTX.with_order(1), order=1)
    for a, b in [(0, 1), (1, 2), (0, 2)]:
        pulled = Lagrangian(CTX, cover.pull(lam.density, b, a))
        lhs = euler_lagrange(pulled).components
        rhs = cover.pull_source(euler_lagrange(lam).components, b, a)
        assert all(simplify(x - y) == 0 for x, y in zip(lhs, rhs))


def test_coboundary_sign_convention():
    cover = affine_cover()
    lam = Cochain(cover, 0, Kind.LAGRANGIAN, {("A",): YT, ("B",): Y})
    d = coboundary(lam)
    # chart B's y is y + t in chart A coordinates
    assert simplify(d["A", "B"] - (YT - (Y + T))) == 0
    assert simplify(d["A", "C"] - YT) == 0
    assert simplify(d["B", "C"] - Y) == 0


def test_small_complexes():
    two_points = Cover(CTX, [Chart("A"), Chart("B")], {})
    assert cohomology_constant(two_points, 0).dimension == 2
    ring = Cover(CTX, [Chart(c) for c in "ABC"], {("A", "B"): (Y,), ("B", "C"): (Y,), ("A", "C"): (Y,)})
    assert cohomology_constant(ring, 1).dimension == 1
    disc = Cover(CTX, ring.charts, {("A", "B"): (Y,), ("B", "C"): (Y,), ("A", "C"): (Y,)}, [("A", "B", "C")])
    assert cohomology_constant(disc, 1).dimension == 0
    winding = Cochain(ring, 1, Kind.CONSTANT, {("A", "C"): 1})
    assert solve_constant_coboundary(winding) is None


class TestCoverValidation:
    def test_face_closure(self):
        with pytest.raises(CoverError, match="faces"):
            Cover(CTX, [Chart(c) for c in "ABC"], {("A", "B"): (Y,)}, [("A", "B", "C")])

    def test_duplicate_and_unknown(self):
        with pytest.raises(CoverError):
            Cover(CTX, [Chart("A"), Chart("A")], {})
        with pytest.raises(CoverError):
            Cover(CTX, [Chart("A")], {("A", "Z"): (Y,)})

    def test_transition_order(self):
        with pytest.raises(CoverError):
            Cover(CTX, [Chart("A"), Chart("B")], {("A", "B"): (YT,)})

    def test_cocycle_condition(self):
        bad = Cover(
            CTX,
            [Chart(c) for c in "ABC"],
            {("A", "B"): (Y + 1,), ("B", "C"): (Y,), ("A", "C"): (Y,)},
            [("A", "B", "C")],
        )
        assert bad.check_cocycle_condition()
        assert not affine_cover().check_cocycle_condition()

    def test_inverse_transitions(self):
        cover = affine_cover()
        assert simplify(cover.pull(Y, 0, 1) - (Y - T)) == 0

    def test_cochain_rejects_non_simplices(self):
        with pytest.raises(CoverError):
            Cochain(affine_cover(), 1, Kind.CONSTANT, {("A",): 1})


class TestClassification:
    def test_incoherent(self):
        cover = affine_cover()
        lam = cech.lagrangian_cochain(cover, {"A": YT**2, "B": YT**2, "C": Y**2})
        assert cech.classify_lagrangian_cochain(lam).verdict == Verdict.INCOHERENT
        with pytest.raises(CoverError):
            cech.delta_class(lam)

    def test_missing_chart(self):
        with pytest.raises(CoverError):
            cech.lagrangian_cochain(affine_cover(), {"A": YT})

    def test_global_cochain_must_glue(self):
        with pytest.raises(CoverError):
            cech.global_cochain(affine_cover(), Y)

    def test_patched_is_trivial(self, problem):
        lam = problem("patched").cochain()
        report = cech.delta_class(lam)
        assert report.label == ClassLabel.TRIVIAL
        glued = cech.globalize(lam, report)
        assert coboundary(glued).is_zero()
        expected = parse("1/2*th_t^2 - cos(th)", problem("patched").ctx)
        for v in glued.values.values():
            assert euler_lagrange(Lagrangian(glued.cover.ctx, v - expected)).is_zero()

    def test_undecided_when_difference_is_second_order(self):
        ctx = JetContext.create(1, 1, 2)
        y, yt, ytt = ctx.jet(0), ctx.jet(0, (1,)), ctx.jet(0, (2,))
        s = sp.Symbol("s")
        cyc = OverlapCycle(("A", "B"), s, 0, 2 * sp.pi, (sp.cos(s),))
        cover = Cover(ctx, [Chart("A"), Chart("B")], {("A", "B"): (y,)}, cycles=[cyc])
        lam = cech.lagrangian_cochain(cover, {"A": yt**2, "B": yt**2 + yt**2 + y * ytt})
        report = cech.delta_class(lam)
        assert report.label == ClassLabel.UNDECIDED and report.note

    def test_monopole_refinement_keeps_class(self, problem):
        prob = problem("monopole")
        fine, chart_map = prob.refinement("fine")
        lam = refine(prob.cochain(), fine, chart_map)
        report = cech.delta_class(lam)
        assert report.label == ClassLabel.NONTRIVIAL
        assert all(p.snapped is not None for p in report.periods)

    def test_refinement_commutes_with_coboundary(self, problem):
        prob = problem("monopole")
        fine, chart_map = prob.refinement("fine")
        lam = prob.cochain()
        lhs = refine(coboundary(lam), fine, chart_map)
        rhs = coboundary(refine(lam, fine, chart_map))
        assert (lhs - rhs).is_zero()

    def test_delta_prime_requires_trivial(self, problem):
        prob = problem("circle")
        lam = cech.global_cochain(prob.cover, parse("th_t^2", prob.ctx))
        with pytest.raises(Exception, match="trivial"):
            cech.delta_prime_class(lam)

    def test_circle_velocity_has_no_global_primitive(self, problem):
        with pytest.raises(CoverError):
            cech.globalize_primitive(problem("circle").cochain("velocity"))


def test_period_snaps_to_lattice():
    s = sp.Symbol("s")
    cyc = OverlapCycle(("A", "B"), s, 0, 2 * sp.pi, (sp.cos(s),), (sp.sin(s),))
    cover = Cover(CTX, [Chart("A"), Chart("B")], {("A", "B"): (Y,)}, cycles=[cyc], lattice=sp.pi)
    per = cech.overlap_period(cover, 3 * T * YT + Y, cyc)
    # 3t dy + y dt around the unit circle in the (t, y) plane: -3 pi + pi
    assert per.raw == pytest.approx(-2 * float(sp.pi), abs=1e-9)
    assert per.snapped == -2 * sp.pi and not per.vanishes
    off = cech.overlap_period(cover, 3 * T * YT + Y + sp.Rational(1, 1000) * T * YT, cyc)
    assert off.snapped is None and not off.vanishes
