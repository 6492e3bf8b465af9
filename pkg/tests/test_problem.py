import textwrap
from pathlib import Path

import numpy as np
import pytest
import sympy as sp

from jetvar.cech import ClassLabel, delta_class
from jetvar.expr import parse, simplify
from jetvar.problem import ProblemError, load_problem, parse_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"

HEAD = """[context]
base t
fiber y
order 2
"""


def prob(body, head=HEAD):
    return parse_problem(textwrap.dedent(head) + textwrap.dedent(body))


@pytest.mark.parametrize("path", sorted(PROBLEMS.glob("*.jv")), ids=lambda p: p.stem)
def test_shipped_problems_load(path):
    p = load_problem(path)
    assert p.tasks


def test_context_and_params():
    p = prob(
        """
        [lagrangian osc]
        L = 1/2*y_t^2 - 1/2*k*y^2
        """,
        HEAD + "param k = 3/2\n",
    )
    assert p.ctx.base_names == ("t",) and p.ctx.r == 2
    assert p.params["k"] == sp.Rational(3, 2)
    assert simplify(p.lagrangian().density - parse("1/2*y_t^2 - 3/4*y^2", p.ctx)) == 0


def test_source_field_and_sections():
    p = prob(
        """
        [source drag]
        y = y_tt + y_t

        [field time]
        t = 1

        [section exact]
        y = cos(t)
        grid t 0 1 11

        [section flow]
        integrate drag
        initial 1, 0
        span 0 1
        step 0.1
        precision 20
        """
    )
    assert simplify(p.source("drag").components[0] - parse("y_tt + y_t", p.ctx)) == 0
    assert p.field().xi == (1,)
    sigma, grid = p.build_section(p.section("exact"))
    assert len(grid) == 1 and np.allclose(grid[0], np.linspace(0, 1, 11))
    flow, _ = p.build_section(p.section("flow"))
    assert flow.dps == 20 and flow.values.shape == (1, 11)


def test_chartwise_lagrangians_and_explicit_cover():
    p = prob(
        """
        [cover]
        charts A B
        transition A B: y = y + 1
        overlap-cycle A B: s in [0, 2*pi]: y = cos(s), t = sin(s)
        lattice pi

        [lagrangian L @ A]
        L = y_t^2

        [lagrangian L @ B]
        L = y_t^2 + y_t
        """
    )
    lam = p.cochain()
    assert not p.is_global()
    assert [c.id for c in p.cover.charts] == ["A", "B"]
    assert p.cover.lattice == sp.pi and len(p.cover.cycles) == 1
    with pytest.raises(ProblemError, match="chartwise"):
        p.lagrangian()
    assert delta_class(lam).label == ClassLabel.TRIVIAL


def test_refinement_block(problem):
    p = problem("monopole")
    fine, chart_map = p.refinement("fine")
    assert set(chart_map.values()) <= {c.id for c in p.cover.charts}
    assert len(fine.charts) > len(p.cover.charts)


def test_selection_errors():
    p = prob(
        """
        [field a]
        t = 1
        [field b]
        y = 1
        """
    )
    with pytest.raises(ProblemError, match="several"):
        p.field()
    with pytest.raises(ProblemError, match="no field named"):
        p.field("c")
    with pytest.raises(ProblemError, match="declares no"):
        p.section()


@pytest.mark.parametrize(
    "body, line, message",
    [
        ("y = 1\n", 1, "before the first block"),
        ("[context]\nbase t\nfiber y\norder two\n", 4, "integer"),
        (HEAD + "[lagrangian L]\nL = y_t +\n", 6, "end of input"),
        (HEAD + "[lagrangian L]\nM = y_t\n", 6, "L = "),
        (HEAD + "[widget]\n", 5, "unknown block"),
        (HEAD + "[section s]\ngrid t 0 1\n", 6, "grid syntax"),
        (HEAD + "[section s]\ny = y_t\n", 6, "base coordinates only"),
        (HEAD + "[field v]\nt = y\n", 5, "depends on fiber"),
        (HEAD + "[chart A]\ntransition A B: y = y\n", 5, "unknown chart"),
        (HEAD + "[lagrangian L @ Z]\nL = y\n", 5, "unknown chart"),
        (HEAD + "[section s]\nintegrate nothing\n", 5, "unknown"),
        (HEAD + "[chart A]\ntransition A B: z = y\n[chart B]\n", 6, "fiber coordinates"),
        ("[context]\nbase t\nfiber y\norder 1\nparam t = 1\n", 1, "clashes"),
        (HEAD + "[cover]\nlattice pi\n", 5, "no charts"),
        (HEAD + "[cover]\ncharts A B\n[chart C]\n", 5, "every declared chart"),
    ],
)
def test_errors_carry_line_numbers(body, line, message):
    with pytest.raises(ProblemError, match=message) as info:
        parse_problem(body)
    assert f"<problem>:{line}:" in str(info.value)


def test_errors_carry_path(tmp_path):
    f = tmp_path / "bad.jv"
    f.write_text("[context]\nbase t\n")
    with pytest.raises(ProblemError, match=r"bad\.jv:1:"):
        load_problem(f)
    with pytest.raises(ProblemError, match="cannot read"):
        load_problem(tmp_path / "missing.jv")


def test_cocycle_violation_is_reported():
    with pytest.raises(ProblemError, match="cocycle"):
        prob(
            """
            [cover]
            charts A B C
            simplex A B C
            transition A B: y = y + 1
            transition B C: y = y
            transition A C: y = y
            """
        )


def test_trajectory_section(tmp_path):
    (tmp_path / "traj.txt").write_text("# step 0.5\n0 1\n0.5 2\n1 3\n")
    f = tmp_path / "p.jv"
    f.write_text(textwrap.dedent(HEAD) + "[section data]\nfile traj.txt\n")
    p = load_problem(f)
    sigma, grid = p.build_section(p.section())
    assert grid is None and np.array_equal(sigma.values[0], [1, 2, 3])
