"""Energy drift of the RK4 oscillator versus step size, in float64 and in mpmath.

    python3 scripts/rk4_convergence.py
    python3 scripts/rk4_convergence.py --dps 0 --steps 0.1 0.05 0.025

A fourth-order method should show drift ratios near 16 per halving.  In
float64 the ratio collapses once the truncation error reaches round-off,
which happens near h = 1e-3 on [0, 10].
"""
import argparse
from dataclasses import dataclass

import sympy as sp

from jetvar.expr import JetContext, parse
from jetvar.jet import ProjectableVectorField
from jetvar.noether import canonical_current, check_conservation, integrate_critical
from jetvar.varseq import Lagrangian, euler_lagrange


@dataclass
class Config:
    steps: tuple = (1e-2, 5e-3, 2e-3, 1e-3, 5e-4)
    span: tuple = (0.0, 10.0)
    dps: int = 30  # 0 means float64


def drift_table(cfg: Config):
    ctx = JetContext.create(1, 1, 2)
    lam = Lagrangian(ctx, parse("1/2*y_t^2 - 1/2*y^2", ctx))
    eta = euler_lagrange(lam)
    eps = canonical_current(lam, ProjectableVectorField(ctx, (1,), (0,)))
    rows = []
    for h in cfg.steps:
        sec = integrate_critical(eta, [1, 0], cfg.span, h, cfg.dps or None)
        rows.append((h, float(check_conservation(eps, sec, eta).relative_drift)))
    return rows


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=float, nargs="+", default=list(Config.steps))
    ap.add_argument("--dps", type=int, default=Config.dps)
    a = ap.parse_args()
    rows = drift_table(Config(tuple(a.steps), Config.span, a.dps))
    print(f"{'h':>10} {'relative drift':>16} {'ratio':>8}")
    prev = None
    for h, d in rows:
        ratio = f"{prev / d:8.2f}" if prev and d else ""
        print(f"{h:10.2e} {d:16.4e} {ratio}")
        prev = d
    print("arithmetic:", f"mpmath dps={a.dps}" if a.dps else "float64", "| sympy", sp.__version__)


if __name__ == "__main__":
    main()
