"""Command-line driver: ``jetvar <command> <problem file> [options]``.

Exit status: 0 on success, 1 when ``--strict`` is given and the verdict is
negative (not variational, not a symmetry, nontrivial class, ...), 2 on
input errors.
"""
from __future__ import annotations

import argparse
import shlex
import sys
from dataclasses import dataclass, field

import sympy as sp

from . import cech
from .config import Tolerances
from .expr import JetError, parse, simplify, to_text, zero_test_settings
from .noether import (
    CurrentKind,
    check_conservation,
    improved_current,
    noether_current,
    symmetry_report,
    variational_lie_lagrangian,
    variational_lie_source,
)
from .problem import Problem, ProblemError, load_problem
from .varseq import Lagrangian, NotVariationalError, euler_lagrange, helmholtz, vainberg_tonti

EXIT_OK, EXIT_VERDICT, EXIT_INPUT = 0, 1, 2


@dataclass
class Report:
    """Ordered human lines plus key/value pairs for ``--machine`` output."""

    lines: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    negative: bool = False

    def say(self, text: str):
        self.lines.append(text)

    def put(self, key: str, value, text: str | None = None):
        self.pairs.append((key, str(value)))
        if text is not None:
            self.lines.append(text)

    def render(self, machine: bool) -> str:
        if machine:
            return "\n".join(f"{k}={v}" for k, v in self.pairs)
        return "\n".join(self.lines)


def _fmt(e, prob: Problem) -> str:
    return to_text(simplify(e), prob.ctx)


def _fmt_alpha(alpha, prob):
    return "".join(name * k for name, k in zip(prob.ctx.base_names, alpha)) or "0"


# ---------------------------------------------------------------------------
# commands


def cmd_el(prob: Problem, args, rep: Report, tol: Tolerances):
    if prob.cover is not None and not prob.is_global(args.lagrangian) and len(prob.lagrangian_group(args.lagrangian)) > 1:
        lam = prob.cochain(args.lagrangian)
        cls = cech.classify_lagrangian_cochain(lam)
        for s, comps in sorted(cls.source.values.items()):
            chart = prob.cover.charts[s[0]].id
            for name, c in zip(prob.ctx.fiber_names, comps):
                rep.put(f"eta.{chart}.{name}", _fmt(c, prob), f"[{chart}] eta[{name}] = {_fmt(c, prob)}")
        return
    eta = euler_lagrange(prob.lagrangian(args.lagrangian))
    for name, c in zip(prob.ctx.fiber_names, eta.components):
        rep.put(f"eta.{name}", _fmt(c, prob), f"eta[{name}] = {_fmt(c, prob)}")


def _source(prob: Problem, args):
    if getattr(args, "source", None):
        return prob.source(args.source)
    if getattr(args, "lagrangian", None):
        return prob.source(lagrangian=args.lagrangian)
    return prob.source()


def cmd_helmholtz(prob, args, rep, tol):
    eta = _source(prob, args)
    H = helmholtz(eta).nonzero()
    rep.put("locally_variational", str(not H).lower())
    if not H:
        rep.say("locally variational (Helmholtz expressions vanish)")
        return
    rep.negative = True
    rep.say("NOT locally variational")
    names = prob.ctx.fiber_names
    for (i, j, beta), h in sorted(H.items(), key=lambda kv: (kv[0][0], kv[0][1], tuple(kv[0][2]))):
        label = f"H[{names[i]},{names[j]},{_fmt_alpha(beta, prob)}]"
        rep.put(f"helmholtz.{names[i]}.{names[j]}.{_fmt_alpha(beta, prob)}", _fmt(h, prob), f"  {label} = {_fmt(h, prob)}")


def _center(prob, text):
    if not text:
        return None
    vals = [parse(t, prob.ctx, prob.params) for t in text.split(",")]
    if len(vals) != prob.ctx.m:
        raise ProblemError(f"--center needs {prob.ctx.m} comma-separated values")
    return tuple(vals)


def cmd_tonti(prob, args, rep, tol):
    eta = _source(prob, args)
    try:
        lag = vainberg_tonti(eta, _center(prob, args.center))
    except NotVariationalError as exc:
        rep.negative = True
        rep.put("locally_variational", "false", f"NOT locally variational: {exc}")
        return
    check = euler_lagrange(lag).equals(eta)
    rep.put("L", _fmt(lag.density, prob), f"L = {_fmt(lag.density, prob)}")
    rep.put("roundtrip", str(check).lower(), f"euler_lagrange(L) reproduces the source form: {'yes' if check else 'NO'}")
    rep.negative = not check


def _current_lines(rep, prob, key, cur):
    for name, c in zip(prob.ctx.base_names, cur.components):
        rep.put(f"{key}.{name}", _fmt(c, prob), f"{key}[{name}] = {_fmt(c, prob)}")


def cmd_lie(prob, args, rep, tol):
    lag = prob.lagrangian(args.lagrangian)
    v = prob.field(args.field)
    dec = variational_lie_lagrangian(lag, v)
    rep.put("lie.total", _fmt(dec.total.density, prob), f"Lie derivative     = {_fmt(dec.total.density, prob)}")
    rep.put("lie.work", _fmt(dec.work.density, prob), f"  work  Xi_V.eta   = {_fmt(dec.work.density, prob)}")
    rep.put("lie.boundary", _fmt(dec.boundary.density, prob), f"  boundary d_H eps = {_fmt(dec.boundary.density, prob)}")
    _current_lines(rep, prob, "eps", dec.current)
    src = variational_lie_source(euler_lagrange(lag), v)
    for name, c, e, h in zip(prob.ctx.fiber_names, src.total.components, src.euler_part.components, src.helmholtz_part.components):
        rep.put(f"lie_source.{name}", _fmt(c, prob), f"Lie derivative of eta[{name}] = {_fmt(c, prob)}")
        rep.put(f"lie_source.euler.{name}", _fmt(e, prob))
        rep.put(f"lie_source.helmholtz.{name}", _fmt(h, prob))


def cmd_noether(prob, args, rep, tol):
    lag = prob.lagrangian(args.lagrangian)
    v = prob.field(args.field)
    report = symmetry_report(lag, v)
    rep.put("symmetry", str(report.is_symmetry).lower(), f"symmetry: {'yes' if report.is_symmetry else 'no'}")
    cur = noether_current(lag, v)
    _current_lines(rep, prob, "eps", cur)
    residual = simplify(cur.divergence() + variational_lie_lagrangian(lag, v).work.density)
    rep.put("residual", _fmt(residual, prob), f"d_H eps + Xi_V.eta = {_fmt(residual, prob)}")
    rep.negative = not report.is_symmetry


def cmd_improve(prob, args, rep, tol):
    lag = prob.lagrangian(args.lagrangian)
    v = prob.field(args.field)
    report = symmetry_report(lag, v, _center(prob, args.center))
    rep.put("symmetry", str(report.is_symmetry).lower(), f"symmetry: {'yes' if report.is_symmetry else 'no'}")
    rep.put(
        "generalized_symmetry",
        str(report.is_generalized_symmetry).lower(),
        f"generalized symmetry: {'yes' if report.is_generalized_symmetry else 'no'}",
    )
    rep.put("lie.total", _fmt(report.lie_derivative.density, prob), f"Lie derivative of L = {_fmt(report.lie_derivative.density, prob)}")
    _current_lines(rep, prob, "eps", report.canonical)
    if report.current is None:
        rep.negative = True
        rep.say(f"no conserved current: {report.obstruction_note}")
        return
    if report.current.kind != CurrentKind.CANONICAL:
        _current_lines(rep, prob, "eps_improved", report.current)
    work = variational_lie_lagrangian(lag, v).work.density
    residual = simplify(report.current.divergence() + work)
    rep.put("residual", _fmt(residual, prob), f"d_H eps~ + Xi_V.eta = {_fmt(residual, prob)}")
    if report.obstruction_note:
        rep.say(report.obstruction_note)


def _fnum(x) -> str:
    return f"{float(x):.6e}"


def cmd_conserve(prob, args, rep, tol):
    lag = prob.lagrangian(args.lagrangian)
    v = prob.field(args.field)
    eta = euler_lagrange(lag)
    report = symmetry_report(lag, v)
    cur = report.current or report.canonical
    rep.put("current.kind", cur.kind.value, f"current ({cur.kind.value}):")
    _current_lines(rep, prob, "eps", cur)
    sigma, grid = prob.build_section(prob.section(args.section))
    res = check_conservation(cur, sigma, eta, grid, tol.criticality)
    conserved = res.is_critical and res.conservation_residual < tol.conservation
    rep.put("criticality_residual", _fnum(res.criticality_residual), f"criticality residual  = {_fnum(res.criticality_residual)}")
    rep.put("conservation_residual", _fnum(res.conservation_residual), f"conservation residual = {_fnum(res.conservation_residual)}")
    if res.relative_drift is not None:
        rep.put("relative_drift", _fnum(res.relative_drift), f"relative drift        = {_fnum(res.relative_drift)}")
        rep.put("charge", _fnum(res.conserved_value), f"conserved value       = {_fnum(res.conserved_value)}")
    rep.put("critical", str(res.is_critical).lower(), "section is critical" if res.is_critical else "section is NOT critical")
    rep.put("conserved", str(conserved).lower(), "current is conserved" if conserved else "current is NOT conserved")
    rep.negative = not conserved


def _cover_for(prob: Problem, args):
    lam = prob.cochain(args.lagrangian)
    if getattr(args, "refinement", None):
        finer, fmap = prob.refinement(args.refinement)
        lam = cech.refine(lam, finer, fmap)
    return lam


def _period_text(prob, periods):
    out = []
    for p in periods:
        if p.snapped is None:
            out.append(f"{p.raw:.10g} (off lattice)")
            continue
        txt = to_text(p.snapped, prob.ctx)
        lattice = prob.cover.lattice
        if lattice is not None and lattice != 0 and prob.lattice_text:
            k = simplify(p.snapped / lattice)
            txt += f" = {k} x ({prob.lattice_text})"
        out.append(txt)
    return ", ".join(out)


def _class_lines(prob, rep, report, prefix):
    rep.put(f"{prefix}.label", report.label.value)
    rep.put(f"{prefix}.is_coboundary", {True: "true", False: "false", None: "undecided"}[report.is_coboundary])
    for k, p in enumerate(report.periods):
        rep.put(f"{prefix}.period.{k}", to_text(p.snapped, prob.ctx) if p.snapped is not None else repr(p.raw))
    if report.note:
        rep.put(f"{prefix}.note", report.note)


def cmd_cech_classify(prob, args, rep, tol):
    lam = _cover_for(prob, args)
    cls = cech.classify_lagrangian_cochain(lam)
    rep.put("verdict", cls.verdict.value)
    rep.put("d_eta_zero", str(cls.d_source.is_zero()).lower())
    for s, v in sorted(cls.d_lambda.values.items()):
        rep.put("d_lambda." + "-".join(lam.cover.names(s)), _fmt(v, prob))
    if cls.verdict == cech.Verdict.INCOHERENT:
        rep.say("INCOHERENT: local Euler-Lagrange forms disagree on overlaps")
        rep.negative = True
        return
    if cls.verdict == cech.Verdict.GLOBAL:
        rep.say("GLOBAL; delta-class TRIVIAL")
        rep.put("delta.label", "trivial")
        return
    rep.put("differences_trivial", str(cls.differences_trivial).lower())
    report = cech.delta_class(lam, tol.quad, tol.snap)
    _class_lines(prob, rep, report, "delta")
    head = f"NON_GLOBAL; delta-class {report.label.value.upper()}"
    if report.periods:
        head += f" (period = {_period_text(prob, report.periods)})"
    rep.say(head)
    for s, v in sorted(cls.d_lambda.values.items()):
        rep.say(f"  (d lambda){'-'.join(lam.cover.names(s))} = {_fmt(v, prob)}")
    rep.negative = report.label != cech.ClassLabel.TRIVIAL


def cmd_cech_class(prob, args, rep, tol):
    lam = _cover_for(prob, args)
    if prob.is_global(args.lagrangian):
        report = cech.delta_prime_class(lam)
        name = "delta_prime"
    else:
        report = cech.delta_class(lam, tol.quad, tol.snap)
        name = "delta"
    _class_lines(prob, rep, report, name)
    for s, v in sorted(report.representative.values.items()):
        shown = ", ".join(_fmt(x, prob) for x in (v if isinstance(v, tuple) else (v,)))
        rep.put(f"{name}.rep." + "-".join(lam.cover.names(s)), shown)
    text = f"{name.replace('_', '-')} class: {report.label.value.upper()}"
    if report.periods:
        text += f" (period = {_period_text(prob, report.periods)})"
    rep.say(text)
    for s, v in sorted(report.representative.values.items()):
        shown = ", ".join(_fmt(x, prob) for x in (v if isinstance(v, tuple) else (v,)))
        rep.say(f"  representative on {'-'.join(lam.cover.names(s))}: {shown}")
    if report.note:
        rep.say(f"  note: {report.note}")
    rep.negative = report.label != cech.ClassLabel.TRIVIAL


def cmd_cech_globalize(prob, args, rep, tol):
    lam = _cover_for(prob, args)
    try:
        if prob.is_global(args.lagrangian):
            beta = cech.globalize_primitive(lam)
            for s, v in sorted(beta.values.items()):
                chart = lam.cover.charts[s[0]].id
                for name, c in zip(prob.ctx.base_names, v):
                    rep.put(f"beta.{chart}.{name}", _fmt(c, prob), f"[{chart}] beta[{name}] = {_fmt(c, prob)}")
            rep.put("globalized", "true", "global primitive found: the primitives agree on all overlaps")
            return
        out = cech.globalize(lam, cech.delta_class(lam, tol.quad, tol.snap))
    except cech.CoverError as exc:
        rep.negative = True
        rep.put("globalized", "false", str(exc))
        return
    for s, v in sorted(out.values.items()):
        chart = lam.cover.charts[s[0]].id
        rep.put(f"L.{chart}", _fmt(v, prob), f"[{chart}] L' = {_fmt(v, prob)}")
    same = all(
        euler_lagrange(Lagrangian(prob.ctx, out[s])).equals(euler_lagrange(Lagrangian(prob.ctx, lam[s])))
        for s in out.values
    )
    rep.put("same_euler_lagrange", str(same).lower(), f"Euler-Lagrange form unchanged: {'yes' if same else 'NO'}")
    rep.put("globalized", "true", "glued Lagrangian agrees on all overlaps")
    rep.negative = not same


def cmd_cech_cohomology(prob, args, rep, tol):
    cover = prob.cover
    if cover is None:
        raise ProblemError("problem declares no cover")
    if getattr(args, "refinement", None):
        cover, _ = prob.refinement(args.refinement)
    degrees = [args.degree] if args.degree is not None else range(cover.dimension + 1)
    for q in degrees:
        h = cech.cohomology_constant(cover, q)
        rep.put(f"H{q}", h.dimension, f"H^{q} = R^{h.dimension}" if h.dimension else f"H^{q} = 0")
        for k, z in enumerate(h.basis):
            shown = ", ".join(f"{'-'.join(cover.names(s))}: {v}" for s, v in sorted(z.values.items()))
            rep.put(f"H{q}.basis.{k}", shown, f"  generator {k}: {shown}")


COMMANDS = {
    "el": cmd_el,
    "helmholtz": cmd_helmholtz,
    "tonti": cmd_tonti,
    "lie": cmd_lie,
    "noether": cmd_noether,
    "improve": cmd_improve,
    "conserve": cmd_conserve,
}

CECH_COMMANDS = {
    "classify": cmd_cech_classify,
    "class": cmd_cech_class,
    "globalize": cmd_cech_globalize,
    "cohomology": cmd_cech_cohomology,
}


def _add_common(p: argparse.ArgumentParser):
    d = Tolerances()
    p.add_argument("problem", help="problem file")
    p.add_argument("--strict", action="store_true", help="exit 1 on a negative verdict")
    p.add_argument("--machine", action="store_true", help="key=value output")
    p.add_argument("--zero-points", type=int, default=d.zero_points, help="random points in zero tests")
    p.add_argument("--zero-tol", type=float, default=d.zero_tol, help="tolerance of randomized zero tests")
    p.add_argument("--criticality-tol", type=float, default=d.criticality)
    p.add_argument("--conservation-tol", type=float, default=d.conservation)
    p.add_argument("--quad-tol", type=float, default=d.quad, help="overlap period quadrature tolerance")
    p.add_argument("--snap-tol", type=float, default=d.snap, help="lattice snapping tolerance")
    p.add_argument("--lagrangian", help="Lagrangian block id")
    p.add_argument("--source", help="source block id")
    p.add_argument("--field", help="field block id")
    p.add_argument("--section", help="section block id")
    p.add_argument("--center", help="comma-separated homotopy center")
    p.add_argument("--refinement", help="refinement block id")
    p.add_argument("--degree", type=int, help="cohomology degree")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jetvar", description="Variational calculus on jet spaces.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        _add_common(sub.add_parser(name))
    cp = sub.add_parser("cech", help="Cech cochain commands")
    csub = cp.add_subparsers(dest="cech_command", required=True)
    for name in CECH_COMMANDS:
        _add_common(csub.add_parser(name))
    tp = sub.add_parser("tasks", help="run every command listed in the problem's [tasks] block")
    tp.add_argument("problem")
    tp.add_argument("--machine", action="store_true")
    return parser


def _tolerances(args) -> Tolerances:
    return Tolerances(
        zero_points=args.zero_points,
        zero_tol=args.zero_tol,
        criticality=args.criticality_tol,
        conservation=args.conservation_tol,
        quad=args.quad_tol,
        snap=args.snap_tol,
    )


def execute(args, prob: Problem | None = None) -> tuple[int, str]:
    try:
        prob = prob or load_problem(args.problem)
        tol = _tolerances(args)
        handler = COMMANDS[args.command] if args.command != "cech" else CECH_COMMANDS[args.cech_command]
        rep = Report()
        with zero_test_settings(tol.zero_points, tol.zero_tol):
            handler(prob, args, rep, tol)
    except (JetError, ValueError) as exc:
        return EXIT_INPUT, f"error: {exc}"
    code = EXIT_VERDICT if (args.strict and rep.negative) else EXIT_OK
    return code, rep.render(args.machine)


def run_tasks(path, machine=False) -> tuple[int, str]:
    try:
        prob = load_problem(path)
    except JetError as exc:
        return EXIT_INPUT, f"error: {exc}"
    parser = build_parser()
    worst, out = EXIT_OK, []
    for ln, line in prob.tasks:
        words = shlex.split(line)
        try:
            args = parser.parse_args(words[:2] + [str(path)] + words[2:] if words[0] == "cech" else words[:1] + [str(path)] + words[1:])
        except SystemExit:
            return EXIT_INPUT, f"error: {path}:{ln}: bad task {line!r}"
        if machine:
            args.machine = True
        code, text = execute(args, prob)
        out.append(f"== {line}" if not machine else f"task={line}")
        out.append(text)
        worst = max(worst, code)
    return worst, "\n".join(out)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "tasks":
        code, text = run_tasks(args.problem, args.machine)
    else:
        code, text = execute(args)
    stream = sys.stderr if code == EXIT_INPUT else sys.stdout
    if text:
        print(text, file=stream)
    return code


if __name__ == "__main__":
    sys.exit(main())
