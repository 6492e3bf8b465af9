"""The circle and monopole reconstructions, plus a sweep of the monopole charge.

    python3 scripts/cech_demos.py
    python3 scripts/cech_demos.py --charges 0 1/2 1 3/2
"""
import argparse
from dataclasses import dataclass, field
from pathlib import Path

import sympy as sp

from jetvar import cech
from jetvar.expr import to_text
from jetvar.problem import load_problem, parse_problem

ROOT = Path(__file__).resolve().parent.parent


@dataclass
class Config:
    charges: list = field(default_factory=lambda: ["0", "1/4", "1/2", "1"])


def circle():
    prob = load_problem(ROOT / "problems" / "circle.jv")
    for key in ("velocity", "exact"):
        rep = cech.delta_prime_class(prob.cochain(key))
        periods = ", ".join(str(p.value) for p in rep.periods) or "none"
        print(f"circle {key:>8}: delta-prime {rep.label.value:<10} periods: {periods}")


def monopole(charge: str):
    text = (ROOT / "problems" / "monopole.jv").read_text()
    text = "\n".join(f"param g = {charge}" if ln.strip().startswith("param g") else ln for ln in text.splitlines())
    prob = parse_problem(text)
    lam = prob.cochain()
    cls = cech.classify_lagrangian_cochain(lam)
    rep = cech.delta_class(lam)
    period = rep.periods[0].value if rep.periods else sp.S.Zero
    line = f"monopole g={charge:>4}: {cls.verdict.value:<10} delta {rep.label.value:<10} period {to_text(period, prob.ctx)}"
    if rep.label == cech.ClassLabel.TRIVIAL:
        glued = cech.globalize(lam, rep)
        line += f" | glued L = {to_text(glued.values[(0,)], prob.ctx)}"
    print(line)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--charges", nargs="+", default=Config().charges)
    a = ap.parse_args()
    circle()
    for g in a.charges:
        monopole(g)


if __name__ == "__main__":
    main()
