"""Problem-file reader.

A problem file is a sequence of blocks introduced by bracketed headers.
Blank lines and ``#`` comments are ignored.  See docs/problem-format.md for
the grammar.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import sympy as sp

from .cech import Chart, Cover, CoverError, OverlapCycle, global_cochain, lagrangian_cochain, refinement_cover
from .expr import JetContext, JetError, parse
from .jet import ProjectableVectorField, Section, read_trajectory
from .noether import integrate_critical
from .varseq import Lagrangian, SourceForm, euler_lagrange


class ProblemError(JetError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = f"{path or '<problem>'}:{line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line


@dataclass
class LagrangianDecl:
    id: str
    where: str  # chart id or "global"
    density: sp.Expr
    line: int


@dataclass
class SectionDecl:
    id: str
    line: int
    exprs: dict = field(default_factory=dict)
    file: str | None = None
    integrate: str | None = None
    initial: tuple = ()
    span: tuple | None = None
    step: float | None = None
    precision: int | None = None
    grid: list = field(default_factory=list)


@dataclass
class RefinementDecl:
    id: str
    line: int
    chart_map: dict = field(default_factory=dict)
    simplices: list = field(default_factory=list)
    cycles: list = field(default_factory=list)


@dataclass
class Problem:
    path: Path | None
    ctx: JetContext
    params: dict
    cover: Cover | None
    lattice_text: str | None
    lagrangians: dict
    sources: dict
    fields: dict
    sections: dict
    refinements: dict
    tasks: list

    # -- lookups ---------------------------------------------------------

    def _pick(self, table, key, what):
        if key is not None:
            if key not in table:
                raise ProblemError(f"no {what} named {key!r}")
            return table[key]
        if len(table) == 1:
            return next(iter(table.values()))
        if not table:
            raise ProblemError(f"problem declares no {what}")
        raise ProblemError(f"several {what}s declared; choose one with --{what}")

    def lagrangian(self, key=None) -> Lagrangian:
        decls = self.lagrangian_group(key)
        if len(decls) != 1:
            raise ProblemError(f"Lagrangian {decls[0].id!r} is defined chartwise; use a cech command")
        return Lagrangian(self.ctx, decls[0].density)

    def lagrangian_group(self, key=None) -> list:
        return self._pick(self.lagrangians, key, "lagrangian")

    def source(self, key=None, lagrangian=None) -> SourceForm:
        if key is None and lagrangian is None and not self.sources and self.lagrangians:
            return euler_lagrange(self.lagrangian())
        if lagrangian is not None:
            return euler_lagrange(self.lagrangian(lagrangian))
        return self._pick(self.sources, key, "source")

    def field(self, key=None) -> ProjectableVectorField:
        return self._pick(self.fields, key, "field")

    def section(self, key=None) -> SectionDecl:
        return self._pick(self.sections, key, "section")

    def cochain(self, key=None):
        if self.cover is None:
            raise ProblemError("problem declares no cover")
        decls = self.lagrangian_group(key)
        if len(decls) == 1 and decls[0].where == "global":
            return global_cochain(self.cover, decls[0].density)
        if any(d.where == "global" for d in decls):
            raise ProblemError(f"Lagrangian {decls[0].id!r} mixes global and chart declarations")
        return lagrangian_cochain(self.cover, {d.where: d.density for d in decls})

    def is_global(self, key=None) -> bool:
        decls = self.lagrangian_group(key)
        return len(decls) == 1 and decls[0].where == "global"

    def refinement(self, key) -> tuple:
        decl = self._pick(self.refinements, key, "refinement")
        try:
            cover = refinement_cover(self.cover, decl.chart_map, decl.simplices, decl.cycles)
        except CoverError as exc:
            raise ProblemError(str(exc), decl.line) from None
        return cover, decl.chart_map

    def build_section(self, decl: SectionDecl):
        """(Section, grid or None)."""
        ctx = self.ctx
        if decl.exprs:
            exprs = [decl.exprs.get(name) for name in ctx.fiber_names]
            if any(e is None for e in exprs):
                raise ProblemError("closed-form section needs every fiber component", decl.line)
            if len(decl.grid) != ctx.n:
                raise ProblemError("closed-form section needs one grid line per base coordinate", decl.line)
            return Section.closed(ctx, exprs), decl.grid
        if decl.file:
            base = self.path.parent if self.path else Path(".")
            return read_trajectory(base / decl.file, ctx), None
        if decl.integrate:
            src = self.sources.get(decl.integrate)
            if src is None:
                if decl.integrate not in self.lagrangians:
                    raise ProblemError(f"unknown source or Lagrangian {decl.integrate!r}", decl.line)
                src = euler_lagrange(self.lagrangian(decl.integrate))
            if decl.span is None or decl.step is None:
                raise ProblemError("integrated section needs span and step", decl.line)
            return integrate_critical(src, decl.initial, decl.span, decl.step, decl.precision), None
        raise ProblemError("section has no expression, file or integrate line", decl.line)


_HEADER = re.compile(r"^\[\s*([A-Za-z-]+)(?:\s+([^\]@]*?))?(?:\s*@\s*([A-Za-z0-9_]+))?\s*\]$")
_ASSIGN = re.compile(r"^\s*([A-Za-z][A-Za-z0-9_]*)\s*=\s*(.+)$")


def _split_assignments(text: str) -> list:
    """Split ``a = e1, b = e2`` on top-level commas."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    parts.append(cur)
    out = []
    for p in parts:
        m = _ASSIGN.match(p)
        if not m:
            raise ValueError(f"expected 'name = expression', got {p.strip()!r}")
        out.append((m.group(1), m.group(2).strip()))
    return out


class _Reader:
    def __init__(self, text: str, path: Path | None):
        self.path = path
        self.blocks = []
        current = None
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("["):
                m = _HEADER.match(line)
                if not m:
                    self.fail(f"malformed block header {line!r}", lineno)
                current = (m.group(1).lower(), (m.group(2) or "").strip(), m.group(3), lineno, [])
                self.blocks.append(current)
            else:
                if current is None:
                    self.fail("content before the first block header", lineno)
                current[4].append((lineno, line))

    def fail(self, msg, line):
        raise ProblemError(msg, line, str(self.path) if self.path else None)


def load_problem(path) -> Problem:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ProblemError(f"cannot read {path}: {exc}") from None
    return parse_problem(text, path)


def parse_problem(text: str, path: Path | None = None) -> Problem:
    rd = _Reader(text, path)
    contexts = [b for b in rd.blocks if b[0] == "context"]
    if len(contexts) != 1:
        rd.fail(f"expected exactly one [context] block, found {len(contexts)}", contexts[1][3] if contexts else None)
    ctx, params = _context(rd, contexts[0])
    extra = dict(params)

    def expr(text, lineno, more=None):
        names = dict(extra)
        if more:
            names.update(more)
        try:
            return parse(text, ctx, names)
        except JetError as exc:
            rd.fail(str(exc), lineno)

    def exprs_list(text, lineno, more=None):
        return [expr(t, lineno, more) for t in _split_top(text)]

    charts, transitions, simplices, cycles = [], {}, [], []
    lattice = lattice_text = None
    chart_order = None
    cover_line = chart_line = None
    centers = {}
    lagrangians, sources, fields, sections, refinements, tasks = {}, {}, {}, {}, {}, []

    def cycle_line(a, b, payload, lineno):
        m = re.match(r"^([A-Za-z][A-Za-z0-9]*)\s+in\s+\[(.+)\]\s*:\s*(.+)$", payload)
        if not m:
            rd.fail("overlap-cycle syntax: <a> <b>: <s> in [lo, hi]: y = ..., ...", lineno)
        pname = m.group(1)
        s = sp.Symbol(pname, real=True)
        bounds = _split_top(m.group(2))
        if len(bounds) != 2:
            rd.fail("overlap-cycle range needs two bounds", lineno)
        lo, hi = (expr(b_, lineno) for b_ in bounds)
        try:
            assigns = dict(_split_assignments(m.group(3)))
        except ValueError as exc:
            rd.fail(str(exc), lineno)
        fiber = []
        for name in ctx.fiber_names:
            if name not in assigns:
                rd.fail(f"overlap-cycle misses fiber component {name}", lineno)
            fiber.append(expr(assigns.pop(name), lineno, {pname: s}))
        base = []
        for name in ctx.base_names:
            base.append(expr(assigns.pop(name), lineno, {pname: s}) if name in assigns else sp.S.Zero)
        if assigns:
            rd.fail(f"unknown coordinate(s) {', '.join(assigns)} in overlap-cycle", lineno)
        return OverlapCycle((a, b), s, lo, hi, tuple(fiber), tuple(base))

    def edge_line(kind, rest, lineno, default_from=None):
        head, sep, payload = rest.partition(":")
        ids = head.split()
        if default_from is not None and len(ids) == 1:
            ids = [default_from] + ids
        if len(ids) != 2 or not sep:
            rd.fail(f"{kind} syntax: {kind} <from> <to>: ...", lineno)
        return ids[0], ids[1], payload.strip()

    def transition_line(a, b, payload, lineno):
        try:
            assigns = dict(_split_assignments(payload))
        except ValueError as exc:
            rd.fail(str(exc), lineno)
        missing = [n for n in ctx.fiber_names if n not in assigns]
        if missing or len(assigns) != ctx.m:
            rd.fail(f"transition must assign exactly the fiber coordinates {', '.join(ctx.fiber_names)}", lineno)
        transitions[a, b] = tuple(expr(assigns[n], lineno) for n in ctx.fiber_names)

    for kind, name, where, lineno, body in rd.blocks:
        if kind == "context":
            continue
        if kind == "cover":
            cover_line = lineno
            for ln, line in body:
                key, _, rest = line.partition(" ")
                rest = rest.strip()
                if key == "charts":
                    chart_order = rest.split()
                elif key == "simplex":
                    simplices.append(rest.split())
                elif key == "lattice":
                    lattice, lattice_text = expr(rest, ln), rest
                elif key == "transition":
                    transition_line(*edge_line("transition", rest, ln), ln)
                elif key == "overlap-cycle":
                    a, b, payload = edge_line("overlap-cycle", rest, ln)
                    cycles.append(cycle_line(a, b, payload, ln))
                else:
                    rd.fail(f"unknown cover entry {key!r}", ln)
        elif kind == "chart":
            if not name:
                rd.fail("chart block needs an identifier", lineno)
            charts.append(name)
            chart_line = chart_line or lineno
            for ln, line in body:
                key, _, rest = line.partition(" ")
                rest = rest.strip()
                if key == "center":
                    centers[name] = tuple(exprs_list(rest, ln))
                    if len(centers[name]) != ctx.m:
                        rd.fail(f"center needs {ctx.m} values", ln)
                elif key == "transition":
                    transition_line(*edge_line("transition", rest, ln, name), ln)
                elif key == "overlap-cycle":
                    a, b, payload = edge_line("overlap-cycle", rest, ln, name)
                    cycles.append(cycle_line(a, b, payload, ln))
                else:
                    rd.fail(f"unknown chart entry {key!r}", ln)
        elif kind == "lagrangian":
            if not name:
                rd.fail("lagrangian block needs an identifier", lineno)
            if len(body) != 1:
                rd.fail("lagrangian block holds exactly one 'L = ...' line", lineno)
            ln, line = body[0]
            m = _ASSIGN.match(line)
            if not m or m.group(1) != "L":
                rd.fail("expected 'L = <expression>'", ln)
            decl = LagrangianDecl(name, where or "global", expr(m.group(2), ln), lineno)
            lagrangians.setdefault(name, []).append(decl)
        elif kind == "source":
            comps = {}
            for ln, line in body:
                m = _ASSIGN.match(line)
                if not m or m.group(1) not in ctx.fiber_names:
                    rd.fail("source lines read '<fiber name> = <expression>'", ln)
                comps[m.group(1)] = expr(m.group(2), ln)
            sources[name] = SourceForm(ctx, tuple(comps.get(n, 0) for n in ctx.fiber_names))
        elif kind == "field":
            comps = {}
            for ln, line in body:
                m = _ASSIGN.match(line)
                if not m or (m.group(1) not in ctx.base_names and m.group(1) not in ctx.fiber_names):
                    rd.fail("field lines read '<coordinate> = <expression>'", ln)
                comps[m.group(1)] = expr(m.group(2), ln)
            try:
                fields[name] = ProjectableVectorField(
                    ctx,
                    tuple(comps.get(n, 0) for n in ctx.base_names),
                    tuple(comps.get(n, 0) for n in ctx.fiber_names),
                )
            except ValueError as exc:
                rd.fail(str(exc), lineno)
        elif kind == "section":
            decl = SectionDecl(name, lineno)
            for ln, line in body:
                key, _, rest = line.partition(" ")
                rest = rest.strip()
                m = _ASSIGN.match(line)
                if m and m.group(1) in ctx.fiber_names:
                    e = expr(m.group(2), ln)
                    if ctx.depends_on_fiber(e):
                        rd.fail("closed-form sections depend on base coordinates only", ln)
                    decl.exprs[m.group(1)] = e
                elif key == "file":
                    decl.file = rest
                elif key == "integrate":
                    decl.integrate = rest
                elif key == "initial":
                    decl.initial = tuple(float(sp.N(x)) for x in exprs_list(rest, ln))
                elif key == "span":
                    vals = [float(sp.N(x)) for x in exprs_list(rest, ln)]
                    if len(vals) != 2:
                        rd.fail("span needs two values", ln)
                    decl.span = tuple(vals)
                elif key == "step":
                    decl.step = _number(rd, rest, ln)
                elif key == "precision":
                    decl.precision = int(_number(rd, rest, ln))
                elif key == "grid":
                    parts = rest.split()
                    if len(parts) != 4 or parts[0] not in ctx.base_names:
                        rd.fail("grid syntax: grid <base name> <lo> <hi> <count>", ln)
                    lo, hi, count = _number(rd, parts[1], ln), _number(rd, parts[2], ln), int(parts[3])
                    decl.grid.append(np.linspace(lo, hi, count))
                else:
                    rd.fail(f"unknown section entry {key!r}", ln)
            sections[name] = decl
        elif kind == "refinement":
            decl = RefinementDecl(name, lineno)
            for ln, line in body:
                key, _, rest = line.partition(" ")
                rest = rest.strip()
                if key == "chart":
                    m = re.match(r"^([A-Za-z0-9_]+)\s*->\s*([A-Za-z0-9_]+)$", rest)
                    if not m:
                        rd.fail("refinement chart syntax: chart <fine> -> <coarse>", ln)
                    decl.chart_map[m.group(1)] = m.group(2)
                elif key == "simplex":
                    decl.simplices.append(rest.split())
                elif key == "overlap-cycle":
                    a, b, payload = edge_line("overlap-cycle", rest, ln)
                    decl.cycles.append(cycle_line(a, b, payload, ln))
                else:
                    rd.fail(f"unknown refinement entry {key!r}", ln)
            refinements[name] = decl
        elif kind == "tasks":
            tasks.extend((ln, line) for ln, line in body)
        else:
            rd.fail(f"unknown block [{kind}]", lineno)

    cover = None
    if charts or cover_line is not None:
        cover_line = cover_line or chart_line
        order = chart_order or charts
        if not order:
            rd.fail("cover declares no charts", cover_line)
        if charts and sorted(order) != sorted(charts):
            rd.fail("'charts' line must list every declared chart", cover_line)
        try:
            cover = Cover(
                ctx,
                [Chart(c, centers.get(c)) for c in order],
                transitions,
                simplices,
                cycles,
                lattice,
            )
        except CoverError as exc:
            rd.fail(str(exc), cover_line)
        bad = cover.check_cocycle_condition()
        if bad:
            rd.fail(f"transitions violate the cocycle condition on {bad}", cover_line)
    for decls in lagrangians.values():
        for d in decls:
            if d.where != "global" and (cover is None or d.where not in cover._index):
                rd.fail(f"Lagrangian placed on unknown chart {d.where!r}", d.line)
    for decl in sections.values():
        if decl.integrate and decl.integrate not in sources and decl.integrate not in lagrangians:
            rd.fail(f"section integrates unknown {decl.integrate!r}", decl.line)
    for decl in refinements.values():
        if cover is None:
            rd.fail("refinement without a cover", decl.line)
        for fine, coarse in decl.chart_map.items():
            if coarse not in cover._index:
                rd.fail(f"refinement maps {fine} to unknown chart {coarse}", decl.line)
    return Problem(path, ctx, params, cover, lattice_text, lagrangians, sources, fields, sections, refinements, tasks)


def _number(rd, text, ln):
    try:
        return float(text)
    except ValueError:
        rd.fail(f"expected a number, got {text!r}", ln)


def _split_top(text: str) -> list:
    """Split on top-level commas or whitespace."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        if depth == 0 and (ch == "," or ch.isspace()):
            if cur.strip():
                parts.append(cur.strip())
            cur = ""
        else:
            cur += ch
    if cur.strip():
        parts.append(cur.strip())
    return parts


def _context(rd: _Reader, block):
    _, _, _, lineno, body = block
    base, fiber, order = None, None, None
    params = {}
    for ln, line in body:
        key, _, rest = line.partition(" ")
        rest = rest.strip()
        if key == "base":
            base = rest.split()
        elif key == "fiber":
            fiber = rest.split()
        elif key == "order":
            try:
                order = int(rest)
            except ValueError:
                rd.fail("order must be an integer", ln)
        elif key == "param":
            m = _ASSIGN.match(rest)
            if not m:
                rd.fail("param syntax: param <name> = <number>", ln)
            try:
                value = parse(m.group(2), JetContext.create(1, 1, 0, ["paramx"], ["paramy"]))
            except JetError as exc:
                rd.fail(str(exc), ln)
            if value.free_symbols:
                rd.fail("param values must be constants", ln)
            params[m.group(1)] = value
        else:
            rd.fail(f"unknown context entry {key!r}", ln)
    if base is None or fiber is None or order is None:
        rd.fail("context needs base, fiber and order lines", lineno)
    try:
        ctx = JetContext.create(len(base), len(fiber), order, base, fiber)
    except (ValueError, JetError) as exc:
        rd.fail(str(exc), lineno)
    for p in params:
        if p in base or p in fiber:
            rd.fail(f"param {p!r} clashes with a coordinate name", lineno)
    return ctx, params
